"""Uniform random variables, piecewise-polynomial densities and finite spaces.

Continuous densities are piecewise polynomials with rational coefficients, so
convolution, integration and distribution functions are exact.  Finite
probability spaces carry rational weights for the same reason: partition and
Bayes identities hold with ``==``, not approximately.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as _cartesian
from math import comb, factorial, floor
from typing import Callable, Hashable, Iterable, Sequence

from ._exact import to_fraction

MAX_DEGREE = 12

# ---------------------------------------------------------------------------
# polynomials: tuples of Fraction coefficients, ascending powers


def _ptrim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return tuple(p) if p else (Fraction(0),)


def _padd(p, q):
    n = max(len(p), len(q))
    return _ptrim((p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0)
                  for i in range(n))


def _pscale(p, c):
    return _ptrim(c * a for a in p)


def _pmul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return _ptrim(out)


def _peval(p, x):
    acc = Fraction(0)
    for a in reversed(p):
        acc = acc * x + a
    return acc


def _pint(p):
    """Antiderivative vanishing at 0."""
    return _ptrim([Fraction(0)] + [a / (i + 1) for i, a in enumerate(p)])


def _ppow_linear(c0, c1, m):
    """(c0 + c1*z)**m."""
    return _ptrim(comb(m, k) * c0 ** (m - k) * c1 ** k for k in range(m + 1))


def _pdeg(p):
    return len(_ptrim(p)) - 1


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseDensity:
    """Density given by polynomials between ascending breakpoints.

    ``pieces[i]`` holds the coefficients (ascending powers of the absolute
    variable) on ``(breakpoints[i], breakpoints[i+1]]``; zero elsewhere.
    """
    breakpoints: tuple
    pieces: tuple

    def __post_init__(self):
        bps = tuple(to_fraction(b) for b in self.breakpoints)
        pieces = tuple(_ptrim(to_fraction(c) for c in p) for p in self.pieces)
        if len(bps) < 2 or len(pieces) != len(bps) - 1:
            raise ValueError("need n+1 breakpoints for n pieces")
        if any(a >= b for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly ascending")
        if max(_pdeg(p) for p in pieces) > MAX_DEGREE:
            raise ValueError("convolution order too high")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pieces)
        # exact mass; nonnegativity only spot-checked (ends and midpoint)
        if self.total_mass() != 1:
            raise ValueError(f"density has mass {self.total_mass()}, not 1")
        for p, a, b in zip(pieces, bps, bps[1:]):
            if min(_peval(p, a), _peval(p, (a + b) / 2), _peval(p, b)) < 0:
                raise ValueError("density is negative")

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return self.breakpoints[0], self.breakpoints[-1]

    @property
    def degree(self) -> int:
        return max(_pdeg(p) for p in self.pieces)

    def _piece_index(self, z: Fraction) -> int | None:
        bps = self.breakpoints
        if z <= bps[0] or z > bps[-1]:
            return None
        lo, hi = 0, len(bps) - 1
        while hi - lo > 1:
            m = (lo + hi) // 2
            if z <= bps[m]:
                hi = m
            else:
                lo = m
        return lo

    def pdf(self, z) -> Fraction:
        z = to_fraction(z)
        i = self._piece_index(z)
        return Fraction(0) if i is None else _peval(self.pieces[i], z)

    def _piece_mass(self, i, upto=None) -> Fraction:
        a = self.breakpoints[i]
        b = self.breakpoints[i + 1] if upto is None else upto
        anti = _pint(self.pieces[i])
        return _peval(anti, b) - _peval(anti, a)

    def cdf(self, x) -> Fraction:
        x = to_fraction(x)
        bps = self.breakpoints
        if x <= bps[0]:
            return Fraction(0)
        total = Fraction(0)
        for i in range(len(self.pieces)):
            if x >= bps[i + 1]:
                total += self._piece_mass(i)
            else:
                total += self._piece_mass(i, upto=x)
                break
        return min(Fraction(1), total) if x >= bps[-1] else total

    def total_mass(self) -> Fraction:
        return sum((self._piece_mass(i) for i in range(len(self.pieces))),
                   Fraction(0))

    def moment(self, k: int) -> Fraction:
        total = Fraction(0)
        for i, p in enumerate(self.pieces):
            anti = _pint(_pmul(p, (Fraction(0),) * k + (Fraction(1),)))
            total += _peval(anti, self.breakpoints[i + 1]) - _peval(anti, self.breakpoints[i])
        return total

    def mean(self) -> Fraction:
        return self.moment(1)

    def variance(self) -> Fraction:
        m = self.mean()
        return self.moment(2) - m * m


@dataclass(frozen=True)
class UniformRV:
    a: Fraction
    b: Fraction

    def __post_init__(self):
        a, b = to_fraction(self.a), to_fraction(self.b)
        if not a < b:
            raise ValueError("uniform needs a < b")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def mean(self) -> Fraction:
        return (self.a + self.b) / 2

    @property
    def variance(self) -> Fraction:
        return (self.b - self.a) ** 2 / 12

    def cdf(self, x) -> Fraction:
        return uniform_cdf(self, x)

    def density(self) -> PiecewiseDensity:
        return PiecewiseDensity((self.a, self.b), ((1 / (self.b - self.a),),))

    def sample(self, rng, size):
        """Draws on the half-open (a, b]."""
        u = 1.0 - rng.random(size)
        return float(self.a) + float(self.b - self.a) * u


def uniform_cdf(u: UniformRV, x) -> Fraction:
    x = to_fraction(x)
    if x <= u.a:
        return Fraction(0)
    if x > u.b:
        return Fraction(1)
    return (x - u.a) / (u.b - u.a)


def _conv_pieces(a0, a1, p, b0, b1, q):
    """Density contributions of one piece pair, as (lo, hi, poly) triples."""
    # integrand p(x) q(z - x) as {(zpow, xpow): coef}
    terms: dict[tuple[int, int], Fraction] = {}
    for i, pi in enumerate(p):
        if not pi:
            continue
        for k, qk in enumerate(q):
            if not qk:
                continue
            for j in range(k + 1):
                c = pi * qk * comb(k, j) * (-1) ** j
                key = (k - j, i + j)
                terms[key] = terms.get(key, Fraction(0)) + c
    # antiderivative in x
    anti = {(zp, xp + 1): c / (xp + 1) for (zp, xp), c in terms.items()}

    def at_limit(shift, const):
        # x = const (shift False) or x = z - const (shift True), as poly in z
        out = (Fraction(0),)
        for (zp, xp), c in anti.items():
            zpart = (Fraction(0),) * zp + (c,)
            if shift:
                xpart = _ppow_linear(-const, Fraction(1), xp)
            else:
                xpart = (const ** xp,)
            out = _padd(out, _pmul(zpart, xpart))
        return out

    cuts = sorted({a0 + b0, a0 + b1, a1 + b0, a1 + b1})
    out = []
    for lo, hi in zip(cuts, cuts[1:]):
        zm = (lo + hi) / 2
        low_is_const = a0 >= zm - b1
        up_is_const = a1 <= zm - b0
        low_val = a0 if low_is_const else zm - b1
        up_val = a1 if up_is_const else zm - b0
        if low_val >= up_val:
            continue
        upper = at_limit(not up_is_const, a1 if up_is_const else b0)
        lower = at_limit(not low_is_const, a0 if low_is_const else b1)
        out.append((lo, hi, _padd(upper, _pscale(lower, -1))))
    return out


def convolve(f: PiecewiseDensity, g: PiecewiseDensity) -> PiecewiseDensity:
    """Density of X + Y for independent X ~ f, Y ~ g."""
    if f.degree + g.degree + 1 > MAX_DEGREE:
        raise ValueError("convolution order too high")
    contributions = []
    for i, p in enumerate(f.pieces):
        for j, q in enumerate(g.pieces):
            contributions += _conv_pieces(f.breakpoints[i], f.breakpoints[i + 1], p,
                                          g.breakpoints[j], g.breakpoints[j + 1], q)
    cuts = sorted({c for lo, hi, _ in contributions for c in (lo, hi)})
    pieces = []
    for lo, hi in zip(cuts, cuts[1:]):
        poly = (Fraction(0),)
        for clo, chi, cp in contributions:
            if clo <= lo and hi <= chi:
                poly = _padd(poly, cp)
        pieces.append(poly)
    return PiecewiseDensity(tuple(cuts), tuple(pieces))


def convolve_power(f: PiecewiseDensity, n: int) -> PiecewiseDensity:
    """Density of the sum of n independent copies."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = f
    for _ in range(n - 1):
        out = convolve(out, f)
    return out


def irwin_hall_cdf(n: int, x) -> Fraction:
    """CDF of the sum of n independent U[0,1] (closed form)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = to_fraction(x)
    if x <= 0:
        return Fraction(0)
    if x >= n:
        return Fraction(1)
    s = sum((-1) ** k * comb(n, k) * (x - k) ** n for k in range(floor(x) + 1))
    return Fraction(s) / factorial(n)


# ---------------------------------------------------------------------------
# finite probability spaces


@dataclass(frozen=True)
class DiscreteSpace:
    outcomes: tuple
    weights: tuple

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        weights = tuple(to_fraction(w) for w in self.weights)
        if len(outcomes) != len(weights) or not outcomes:
            raise ValueError("need one weight per outcome")
        if len(set(outcomes)) != len(outcomes):
            raise ValueError("duplicate outcomes")
        if any(w < 0 or w > 1 for w in weights):
            raise ValueError("weights must lie in [0, 1]")
        if sum(weights) != 1:
            raise ValueError("weights must sum to exactly 1")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, outcomes: Iterable[Hashable]) -> DiscreteSpace:
        outcomes = tuple(outcomes)
        return cls(outcomes, (Fraction(1, len(outcomes)),) * len(outcomes))

    @property
    def fullset(self) -> frozenset:
        return frozenset(self.outcomes)

    def event(self, outcomes: Iterable) -> frozenset:
        ev = frozenset(outcomes)
        if not ev <= self.fullset:
            raise ValueError(f"not an event of this space: {set(ev - self.fullset)}")
        return ev

    def pr(self, event: Iterable) -> Fraction:
        ev = self.event(event)
        return sum((w for o, w in zip(self.outcomes, self.weights) if o in ev),
                   Fraction(0))

    def complement(self, event: Iterable) -> frozenset:
        return self.fullset - self.event(event)

    def is_null(self, event: Iterable) -> bool:
        return self.pr(event) == 0


def cond_prob(space: DiscreteSpace, a: Iterable, b: Iterable) -> Fraction:
    """Pr(A; B), with the convention Pr(A; B) = 0 when B is null."""
    a, b = space.event(a), space.event(b)
    pb = space.pr(b)
    if pb == 0:
        return Fraction(0)
    return space.pr(a & b) / pb


def check_partition(space: DiscreteSpace, cells: Sequence[Iterable]) -> list[frozenset]:
    cells = [space.event(c) for c in cells]
    seen: set = set()
    for c in cells:
        if seen & c:
            raise ValueError("not a partition: cells overlap")
        seen |= c
    if seen != space.fullset:
        raise ValueError("not a partition: cells do not cover the space")
    return cells


def bayes(space: DiscreteSpace, partition: Sequence[Iterable], b: Iterable,
          j: int) -> Fraction:
    """Posterior of cell j given B, by Bayes' rule over the partition."""
    cells = check_partition(space, partition)
    b = space.event(b)
    if space.is_null(b):
        raise ValueError("conditioning on null event")
    denom = sum((cond_prob(space, b, c) * space.pr(c) for c in cells), Fraction(0))
    return cond_prob(space, b, cells[j]) * space.pr(cells[j]) / denom


def product_space(s1: DiscreteSpace, s2: DiscreteSpace) -> DiscreteSpace:
    outcomes = tuple(_cartesian(s1.outcomes, s2.outcomes))
    weights = tuple(w1 * w2 for w1, w2 in _cartesian(s1.weights, s2.weights))
    return DiscreteSpace(outcomes, weights)


def distribution_of(space: DiscreteSpace, rv: Callable) -> dict:
    """Law of a real random variable on a finite space, {value: probability}."""
    law: dict = {}
    for o, w in zip(space.outcomes, space.weights):
        v = to_fraction(rv(o))
        law[v] = law.get(v, Fraction(0)) + w
    return dict(sorted(law.items()))


def distribution_function(space: DiscreteSpace, rv: Callable) -> Callable:
    """F(x) = Pr(X <= x)."""
    law = distribution_of(space, rv)

    def F(x):
        x = to_fraction(x)
        return sum((p for v, p in law.items() if v <= x), Fraction(0))
    return F


def discrete_convolve(p: dict, q: dict) -> dict:
    """Law of X + Y for independent X ~ p, Y ~ q."""
    out: dict = {}
    for x, px in p.items():
        for y, qy in q.items():
            out[x + y] = out.get(x + y, Fraction(0)) + px * qy
    return dict(sorted(out.items()))
