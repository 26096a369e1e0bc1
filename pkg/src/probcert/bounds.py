"""Variance ledger and the Doob-Kolmogorov bound engine.

For a martingale S_n built from zero-mean increments with variances s_i^2,

    Pr(max_{i<=n} |S_i| >= eps) <= sum_i s_i^2 / eps^2.

The ledger also tracks a worst-case drift D bounding the higher-order
(non-martingale) part of the error.  The total error is S + Y with
|Y| <= D, so a failure at eps needs |S| >= eps - D; the bound is taken at
that effective threshold.  With D = 0 it is the plain inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np

from ._exact import to_fraction

Mode = Literal["stochastic", "worst_case_only"]
Binding = Literal["stochastic", "deterministic", "none"]


class NotAMartingaleError(ValueError):
    pass


@dataclass(frozen=True)
class StepBlock:
    """``count`` consecutive loop steps sharing one variance and worst case."""
    count: int
    variance: Fraction
    worst_case: Fraction

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("block count must be positive")
        object.__setattr__(self, "variance", to_fraction(self.variance))
        object.__setattr__(self, "worst_case", to_fraction(self.worst_case))
        if self.variance < 0 or self.worst_case < 0:
            raise ValueError("ledger entries must be nonnegative")


@dataclass(frozen=True)
class VarianceLedger:
    """Per-step variance bounds of the first-order error plus the drift bound.

    Steps are stored run-length encoded so that 2**25-step programs stay
    cheap; ``step_variances`` expands them on request.
    """
    blocks: tuple[StepBlock, ...]
    drift_worst_case: Fraction = Fraction(0)
    zero_mean_certified: bool = True
    independence_certified: bool = True
    assumptions: tuple[str, ...] = ()
    events: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("ledger needs at least one step")
        d = self.drift_worst_case
        if not (isinstance(d, float) and math.isinf(d)):
            d = to_fraction(d)
        if d < 0:
            raise ValueError("drift bound must be nonnegative")
        object.__setattr__(self, "drift_worst_case", d)
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "assumptions", tuple(self.assumptions))

    @classmethod
    def uniform(cls, steps: int, variance, worst_case, **kw) -> VarianceLedger:
        return cls((StepBlock(steps, variance, worst_case),), **kw)

    @classmethod
    def from_steps(cls, variances: Sequence, worst_cases: Sequence, **kw) -> VarianceLedger:
        if len(variances) != len(worst_cases):
            raise ValueError("step lists must share one length")
        blocks: list[StepBlock] = []
        for v, w in zip(variances, worst_cases):
            v, w = to_fraction(v), to_fraction(w)
            if blocks and blocks[-1].variance == v and blocks[-1].worst_case == w:
                blocks[-1] = replace(blocks[-1], count=blocks[-1].count + 1)
            else:
                blocks.append(StepBlock(1, v, w))
        return cls(tuple(blocks), **kw)

    @cached_property
    def steps(self) -> int:
        return sum(b.count for b in self.blocks)

    @cached_property
    def total_variance(self) -> Fraction:
        return sum((b.count * b.variance for b in self.blocks), Fraction(0))

    @cached_property
    def worst_case_total(self) -> Fraction:
        return sum((b.count * b.worst_case for b in self.blocks), Fraction(0))

    @cached_property
    def max_step_variance(self) -> Fraction:
        return max(b.variance for b in self.blocks)

    @property
    def deterministic_bound(self):
        return self.worst_case_total + self.drift_worst_case

    @property
    def step_variances(self) -> list[Fraction]:
        return [b.variance for b in self.blocks for _ in range(b.count)]

    @property
    def step_worst_cases(self) -> list[Fraction]:
        return [b.worst_case for b in self.blocks for _ in range(b.count)]

    @property
    def admissible(self) -> bool:
        return self.zero_mean_certified and self.independence_certified

    def half_widths(self) -> np.ndarray:
        """Half-widths of uniform increments matching each step's variance."""
        return np.repeat([math.sqrt(3 * float(b.variance)) for b in self.blocks],
                         [b.count for b in self.blocks])

    def scaled(self, c) -> VarianceLedger:
        """Ledger of the increments multiplied by c > 0."""
        c = to_fraction(c)
        if c <= 0:
            raise ValueError("scale must be positive")
        blocks = tuple(StepBlock(b.count, b.variance * c * c, b.worst_case * c)
                       for b in self.blocks)
        return replace(self, blocks=blocks, drift_worst_case=self.drift_worst_case * c)


def _positive_epsilon(epsilon) -> Fraction:
    eps = to_fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    return eps


def _require_martingale(ledger: VarianceLedger):
    if not ledger.admissible:
        raise NotAMartingaleError("not a martingale: drift or dependence present")


def doob_failure_bound(ledger: VarianceLedger, epsilon) -> Fraction:
    """Upper bound on Pr(max_i |error_i| >= epsilon)."""
    eps = _positive_epsilon(epsilon)
    _require_martingale(ledger)
    return _stochastic_bound(ledger, eps)


def _stochastic_bound(ledger: VarianceLedger, eps: Fraction) -> Fraction:
    if eps > ledger.deterministic_bound:
        return Fraction(0)
    effective = eps - ledger.drift_worst_case
    if effective <= 0:
        return Fraction(1)
    return min(Fraction(1), ledger.total_variance / (effective * effective))


def success_lower_bound(ledger: VarianceLedger, epsilon) -> Fraction:
    """Lower bound on Pr(max_i |error_i| < epsilon)."""
    return max(Fraction(0), 1 - doob_failure_bound(ledger, epsilon))


def max_safe_steps(per_step_variance, epsilon, p_fail) -> int:
    """Largest n with n * variance / epsilon**2 <= p_fail."""
    var, eps, p = (to_fraction(per_step_variance), _positive_epsilon(epsilon),
                   to_fraction(p_fail))
    if var <= 0:
        raise ValueError("per-step variance must be positive")
    if p <= 0:
        raise ValueError("p_fail must be positive")
    return math.floor(p * eps * eps / var)


TINY = math.ulp(0.0)


def required_epsilon(ledger: VarianceLedger, p_fail) -> float:
    """Smallest float epsilon at which the Doob bound alone is at most p_fail.

    This is sqrt(total_variance / p_fail) plus the drift bound.  With zero
    variance and zero drift every positive epsilon works and the smallest
    positive float is returned.
    """
    p = to_fraction(p_fail)
    if not 0 < p <= 1:
        raise ValueError("p_fail must lie in (0, 1]")
    _require_martingale(ledger)
    total, drift = ledger.total_variance, ledger.drift_worst_case
    if isinstance(drift, float):
        return math.inf
    if total == 0:
        return max(TINY, math.nextafter(float(drift), math.inf)) if drift else TINY
    # the uncapped Doob expression: above the deterministic bound the
    # certificate reports 0 anyway, and the caller sees the binding flag
    def passes(e: float) -> bool:
        eff = Fraction(e) - drift
        return eff > 0 and total <= p * eff * eff

    eps = math.sqrt(float(total / p)) + float(drift)
    while not passes(eps):
        eps = math.nextafter(eps, math.inf)
    while passes(lower := math.nextafter(eps, 0.0)):
        eps = lower
    return eps


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    epsilon: Fraction
    steps: int
    failure_bound: Fraction
    success_bound: Fraction
    drift_worst_case: Fraction
    worst_case_total: Fraction
    mode: Mode
    assumptions: tuple[str, ...]
    binding: Binding = "stochastic"
    total_variance: Fraction = Fraction(0)
    max_step_variance: Fraction = Fraction(0)
    p_fail: Fraction | None = None
    max_safe_steps: int | None = None

    @property
    def deterministic_bound(self):
        return self.worst_case_total + self.drift_worst_case

    def bound_at(self, epsilon) -> Fraction:
        """Failure bound this certificate implies at another epsilon."""
        eps = _positive_epsilon(epsilon)
        # the nearest float to our own epsilon stands for it in simulations
        if eps in (self.epsilon, Fraction(float(self.epsilon))):
            return self.failure_bound
        if eps > self.deterministic_bound:
            return Fraction(0)
        if self.mode != "stochastic":
            return Fraction(1)
        effective = eps - self.drift_worst_case
        if effective <= 0:
            return Fraction(1)
        return min(Fraction(1), self.total_variance / (effective * effective))


def certify(ledger: VarianceLedger, epsilon, p_fail=None) -> Certificate:
    """Certificate at epsilon, downgrading to worst case when inadmissible."""
    eps = _positive_epsilon(epsilon)
    assumptions = list(ledger.assumptions)
    deterministic = eps > ledger.deterministic_bound
    if ledger.admissible:
        mode: Mode = "stochastic"
        failure = _stochastic_bound(ledger, eps)
        binding: Binding = "deterministic" if deterministic else "stochastic"
    else:
        mode = "worst_case_only"
        failure = Fraction(0) if deterministic else Fraction(1)
        binding = "deterministic" if deterministic else "none"
        if not ledger.zero_mean_certified:
            assumptions.append("downgraded: nonzero-mean (drifting) error term present")
        if not ledger.independence_certified:
            assumptions.append("downgraded: errors not certified conditionally zero-mean")
    if ledger.total_variance == 0 and ledger.drift_worst_case == 0:
        assumptions.append("no random error: any positive epsilon is certified")
    safe = None
    if p_fail is not None and ledger.max_step_variance > 0:
        safe = max_safe_steps(ledger.max_step_variance, eps, p_fail)
    return Certificate(
        epsilon=eps, steps=ledger.steps, failure_bound=failure,
        success_bound=max(Fraction(0), 1 - failure),
        drift_worst_case=ledger.drift_worst_case,
        worst_case_total=ledger.worst_case_total, mode=mode,
        assumptions=tuple(assumptions), binding=binding,
        total_variance=ledger.total_variance,
        max_step_variance=ledger.max_step_variance,
        p_fail=None if p_fail is None else to_fraction(p_fail),
        max_safe_steps=safe)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MartingaleCheck:
    verdict: Literal["pass", "fail", "inconclusive"]
    statistics: dict  # name -> (estimate, standard error)
    tolerance: float

    @property
    def failed(self) -> list[str]:
        return [k for k, (est, se) in self.statistics.items()
                if abs(est) > self.tolerance * se]


def empirical_martingale_check(increments, tolerance: float = 4.0,
                               max_lag: int = 5) -> MartingaleCheck:
    """Sampling check that increments look like a zero-mean martingale.

    ``increments`` has one row per trial and one column per step.  Pooled
    over steps, it estimates the mean increment, the mean of the next
    increment given the sign of the running sum, and lag-k correlations.
    Each must sit within ``tolerance`` standard errors of zero.
    """
    x = np.asarray(increments, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("need at least 2 trials and 2 steps")
    if not np.any(x):
        return MartingaleCheck("inconclusive", {}, tolerance)
    sd = x.std()
    if sd == 0:
        return MartingaleCheck("inconclusive", {}, tolerance)

    stats: dict[str, tuple[float, float]] = {}
    stats["mean"] = (float(x.mean()), float(sd / math.sqrt(x.size)))

    s = np.cumsum(x, axis=1)[:, :-1]
    nxt = x[:, 1:]
    for name, mask in (("cond_mean_pos", s > 0), ("cond_mean_neg", s < 0)):
        sel = nxt[mask]
        if sel.size >= 2:
            stats[name] = (float(sel.mean()), float(sel.std(ddof=1) / math.sqrt(sel.size)))

    for k in range(1, min(max_lag, x.shape[1] - 1) + 1):
        a, b = x[:, :-k], x[:, k:]
        denom = math.sqrt(float(np.sum(a * a)) * float(np.sum(b * b)))
        if denom == 0:
            continue
        stats[f"lag{k}_corr"] = (float(np.sum(a * b)) / denom, 1.0 / math.sqrt(a.size))

    ok = all(abs(est) <= tolerance * se for est, se in stats.values())
    return MartingaleCheck("pass" if ok else "fail", stats, tolerance)
