"""Monte Carlo validation of certificates.

Two simulators estimate Pr(max_i |error_i| >= eps):

* ``simulate_abstract`` draws independent uniform increments matching a
  ledger's per-step variances;
* ``simulate_concrete`` runs the program itself in emulated low-precision
  formats next to a finer reference and records the real error.

Trials are split into fixed-size blocks, each with its own random stream
derived from (seed, block index).  Results depend only on the seed and the
inputs, never on how many threads ran the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np

from ._exact import lowest_set_exponent, to_fraction
from .analyzer import Analysis, NodeType, _fixed_bits, analyze
from .bounds import Certificate, VarianceLedger, certify
from .formats import NumberFormat, floating, parse_format
from .ir import AnalysisError, BinOp, Expr, Name, Narrow, Neg, Num, ProgramIR, walk

BLOCK_SIZE = 2048
STEP_CHUNK = 512
VIOLATION_SIGMAS = 4.0
MIN_TRIALS = 100
REF_EXTRA_BITS = 20


def default_threads() -> int:
    env = os.environ.get("PROBCERT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SimConfig:
    trials: int
    seed: int
    epsilon_grid: tuple = ()
    mode: Literal["abstract", "concrete"] = "abstract"
    threads: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        grid = tuple(float(e) for e in self.epsilon_grid)
        if any(e <= 0 for e in grid):
            raise ValueError("epsilon grid must be positive")
        object.__setattr__(self, "epsilon_grid", grid)

    def block_rng(self, block: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.seed, spawn_key=(block,))))

    def blocks(self) -> list[tuple[int, int]]:
        return [(b, min(BLOCK_SIZE, self.trials - b * BLOCK_SIZE))
                for b in range(math.ceil(self.trials / BLOCK_SIZE))]


@dataclass
class SimReport:
    mode: str
    steps: int
    trials: int
    seed: int
    epsilons: list[float]
    counts: list[int]
    frequencies: list[float]
    stderrs: list[float]
    bounds: list[float]
    verdicts: list[str]
    final_mean: float
    final_variance: float
    expected_variance: float
    max_abs_error: float
    max_abs_mean_error: float
    drift_worst_case: float
    drift_ok: bool
    increments: np.ndarray | None = field(default=None, repr=False)

    @property
    def violated(self) -> bool:
        return "violated" in self.verdicts

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("increments")
        return d


def _verdict(freq, stderr, bound, trials) -> str:
    if trials < MIN_TRIALS:
        return "inconclusive"
    return "violated" if freq > bound + VIOLATION_SIGMAS * stderr else "sound"


@dataclass
class _Tally:
    max_abs: np.ndarray
    final: np.ndarray
    step_sum: np.ndarray
    step_sumsq: np.ndarray
    increments: np.ndarray | None


def _report(mode, steps, cfg: SimConfig, tallies: list[_Tally], bound_at,
            expected_variance, drift) -> SimReport:
    max_abs = np.concatenate([t.max_abs for t in tallies])
    final = np.concatenate([t.final for t in tallies])
    step_sum = sum(t.step_sum for t in tallies)
    step_sumsq = sum(t.step_sumsq for t in tallies)
    trials = cfg.trials
    eps, counts, freqs, ses, bounds, verdicts = [], [], [], [], [], []
    for e in sorted(set(cfg.epsilon_grid)):
        c = int(np.count_nonzero(max_abs >= e))
        f = c / trials
        se = math.sqrt(f * (1 - f) / trials)
        b = float(bound_at(e))
        eps.append(e)
        counts.append(c)
        freqs.append(f)
        ses.append(se)
        bounds.append(b)
        verdicts.append(_verdict(f, se, b, trials))
    mean_i = step_sum / trials
    var_i = np.maximum(step_sumsq / trials - mean_i ** 2, 0.0)
    se_i = np.sqrt(var_i / trials)
    excess = float(np.max(np.abs(mean_i) - VIOLATION_SIGMAS * se_i)) if steps else 0.0
    drift_f = float(drift)
    incs = None
    if all(t.increments is not None for t in tallies):
        incs = np.concatenate([t.increments for t in tallies])
    return SimReport(
        mode=mode, steps=steps, trials=trials, seed=cfg.seed, epsilons=eps,
        counts=counts, frequencies=freqs, stderrs=ses, bounds=bounds,
        verdicts=verdicts, final_mean=float(final.mean()),
        final_variance=float(final.var(ddof=1)) if trials > 1 else 0.0,
        expected_variance=float(expected_variance),
        max_abs_error=float(max_abs.max()),
        max_abs_mean_error=float(np.max(np.abs(mean_i))) if steps else 0.0,
        drift_worst_case=drift_f, drift_ok=excess <= drift_f, increments=incs)


def _run_blocks(cfg: SimConfig, work):
    threads = cfg.threads or default_threads()
    blocks = cfg.blocks()
    if threads <= 1 or len(blocks) == 1:
        return [work(b, size) for b, size in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda bs: work(*bs), blocks))


def _bound_function(ledger: VarianceLedger, certificate: Certificate | None):
    if certificate is not None:
        return certificate.bound_at
    return lambda e: certify(ledger, to_fraction(e)).failure_bound


# ---------------------------------------------------------------------------
# abstract walks


def simulate_abstract(ledger: VarianceLedger, cfg: SimConfig,
                      certificate: Certificate | None = None,
                      keep_increments: bool = False) -> SimReport:
    """Random walks with independent U(-h_i, h_i] increments, h_i = sqrt(3 s_i^2)."""
    half = ledger.half_widths()
    n = len(half)

    def work(block, size):
        rng = cfg.block_rng(block)
        s = np.zeros(size)
        running = np.zeros(size)
        step_sum = np.zeros(n)
        step_sumsq = np.zeros(n)
        kept = []
        for start in range(0, n, STEP_CHUNK):
            h = half[start:start + STEP_CHUNK]
            u = rng.random((size, len(h)))
            inc = h * (1.0 - 2.0 * u)
            path = s[:, None] + np.cumsum(inc, axis=1)
            running = np.maximum(running, np.abs(path).max(axis=1))
            step_sum[start:start + len(h)] = path.sum(axis=0)
            step_sumsq[start:start + len(h)] = (path * path).sum(axis=0)
            s = path[:, -1]
            if keep_increments:
                kept.append(inc)
        return _Tally(running, s, step_sum, step_sumsq,
                      np.concatenate(kept, axis=1) if keep_increments else None)

    tallies = _run_blocks(cfg, work)
    return _report("abstract", n, cfg, tallies, _bound_function(ledger, certificate),
                   ledger.total_variance, ledger.drift_worst_case)


# ---------------------------------------------------------------------------
# concrete emulation


def round_to_precision(x: np.ndarray, p: int, truncate: bool = False) -> np.ndarray:
    """Round float64 values to p significand bits (nearest-even or toward zero)."""
    m, e = np.frexp(x)
    s = np.ldexp(m, p)
    r = np.trunc(s) if truncate else np.rint(s)
    return np.ldexp(r, e - p)


def _shift_round(a: np.ndarray, d: int, truncate: bool) -> np.ndarray:
    """a / 2**d rounded to an integer (floor, or nearest with ties to even)."""
    if d <= 0:
        return a << (-d)
    q = a >> d
    if truncate:
        return q
    r = a - (q << d)
    half = np.int64(1) << (d - 1)
    return q + ((r > half) | ((r == half) & ((q & 1) == 1)))


class _Fixed:
    __slots__ = ("a", "e")

    def __init__(self, a, e):
        self.a, self.e = a, e


def _to_float(v) -> np.ndarray:
    if isinstance(v, _Fixed):
        return np.ldexp(np.asarray(v.a, dtype=np.float64), v.e)
    return v


def _round_into(v, fmt: NumberFormat):
    if fmt.is_fixed:
        lsb = fmt.lsb_exponent
        if isinstance(v, _Fixed):
            return _Fixed(_shift_round(np.asarray(v.a, dtype=np.int64), lsb - v.e,
                                       fmt.truncates), lsb)
        scaled = np.ldexp(v, -lsb)
        q = np.floor(scaled) if fmt.truncates else np.rint(scaled)
        return _Fixed(q.astype(np.int64), lsb)
    return round_to_precision(_to_float(v), fmt.precision, fmt.truncates)


def _align(u: _Fixed, v: _Fixed):
    e = min(u.e, v.e)
    return (np.asarray(u.a, dtype=np.int64) << (u.e - e),
            np.asarray(v.a, dtype=np.int64) << (v.e - e), e)


class _Program:
    """Compiled evaluator for one side (program or reference) of the emulation."""

    def __init__(self, ir: ProgramIR, types: dict[int, NodeType] | None,
                 reference: str, ref_prec: int = 53, ref_grid: int = 0):
        self.ir = ir
        self.types = types          # None on the reference side
        self.reference = reference  # "program" | "exact" | "float"
        self.ref_prec = ref_prec
        self.ref_grid = ref_grid

    def const(self, value: Fraction, e: Expr):
        if self.reference == "float":
            return np.float64(float(value))
        if self.reference == "exact":
            g = lowest_set_exponent(value)
            g = self.ref_grid if g is None else g
            return _Fixed(np.int64(value / Fraction(2) ** g), g)
        t = self.types[e.uid]
        if t.repr == "fixed":
            return _Fixed(np.int64(value / Fraction(2) ** t.grid), t.grid)
        return np.float64(float(value))

    def step(self, env: dict):
        """Run the body once; env maps names to values, returns new carried value."""
        out = None
        local = dict(env)
        for st in self.ir.body:
            v = self.ev(st.expr, local)
            if st.target == self.ir.output:
                out = v
            else:
                local[st.target] = v
        return out

    def ev(self, e: Expr, env):
        if isinstance(e, Num):
            v = self.const(e.value, e)
        elif isinstance(e, Name):
            if e.id in self.ir.consts:
                v = self.const(self.ir.consts[e.id].value, e)
            else:
                v = env[e.id]
        elif isinstance(e, Neg):
            c = self.ev(e.operand, env)
            v = _Fixed(-c.a, c.e) if isinstance(c, _Fixed) else -c
        elif isinstance(e, Narrow):
            v = self.ev(e.operand, env)
        elif isinstance(e, BinOp):
            a, b = self.ev(e.left, env), self.ev(e.right, env)
            fixed_ctx = isinstance(a, _Fixed) and isinstance(b, _Fixed)
            if fixed_ctx:
                if e.op == "mul":
                    v = _Fixed(np.asarray(a.a, dtype=np.int64) * b.a, a.e + b.e)
                else:
                    x, y, g = _align(a, b)
                    v = _Fixed(x + y if e.op == "add" else x - y, g)
            else:
                x, y = _to_float(a), _to_float(b)
                v = x + y if e.op == "add" else x - y if e.op == "sub" else x * y
                if self.reference == "float" and self.ref_prec < 53:
                    v = round_to_precision(v, self.ref_prec)
        else:
            raise TypeError(e)
        if self.types is not None:
            for _, fmt in self.types[e.uid].roundings:
                v = _round_into(v, fmt)
        return v


def _check_reference(ir: ProgramIR, an: Analysis, reference):
    """Resolve and validate the reference precision; returns (kind, prec)."""
    has_mul = any(isinstance(e, BinOp) and e.op == "mul"
                  for st in ir.body for e in walk(st.expr))
    formats = [s.fmt for s in ir.sensors.values()] + [v.fmt for v in ir.vars.values()]
    formats += [st.fmt for st in ir.body if st.fmt is not None]
    formats += [e.fmt for st in ir.body for e in walk(st.expr) if isinstance(e, Narrow)]
    all_fixed = all(f.is_fixed for f in formats)
    if reference is None:
        reference = "exact" if (all_fixed and not has_mul) else floating(53)
    if isinstance(reference, str) and reference != "exact":
        reference = parse_format(reference)
    if reference == "exact":
        if has_mul or not all_fixed:
            raise AnalysisError("reference precision insufficient: exact reference "
                                "needs an add/sub-only fixed-point program")
        return "exact", 53
    if not isinstance(reference, NumberFormat) or reference.is_fixed:
        raise ValueError("reference must be 'exact' or a float format")
    p = reference.precision
    if p > 53:
        raise AnalysisError("reference precision beyond float64 is not emulated")
    for f in formats:
        if not f.is_fixed and f.precision >= p:
            raise AnalysisError(f"reference precision insufficient: {reference} is "
                                f"not strictly finer than {f}")
    for st in ir.body:
        for e in walk(st.expr):
            t = an.types[e.uid]
            if t.repr == "fixed" and _fixed_bits(an.ranges[e], t.grid) + 1 >= p:
                raise AnalysisError(f"reference precision insufficient for {e.label}")
    return "float", p


def _emulation_guard(ir: ProgramIR, an: Analysis):
    for st in ir.body:
        for e in walk(st.expr):
            t = an.types[e.uid]
            grids = [t.grid] if t.grid is not None else []
            if isinstance(e, BinOp) and e.op == "mul":
                lt, rt = an.types[e.left.uid], an.types[e.right.uid]
                if lt.grid is not None and rt.grid is not None:
                    grids.append(lt.grid + rt.grid)
            for g in grids:
                if _fixed_bits(an.ranges[e], g) > 62:
                    raise AnalysisError(f"{e.label}: fixed-point value exceeds int64 emulation")


def simulate_concrete(ir: ProgramIR, cfg: SimConfig, reference=None,
                      certificate: Certificate | None = None,
                      analysis: Analysis | None = None,
                      keep_increments: bool = False) -> SimReport:
    """Run the program in its formats and in a finer reference, per trial.

    ``reference`` is ``"exact"`` (integer arithmetic on a grid up to 2**-20
    finer than any program format, at least 2**-4; add/sub-only fixed-point programs), a float
    format strictly finer than the program's, or None to pick one.
    """
    an = analysis or analyze(ir)
    kind, prec = _check_reference(ir, an, reference)
    _emulation_guard(ir, an)
    ledger = an.ledger

    lsbs = [f.lsb_exponent for f in
            [s.fmt for s in ir.sensors.values()] + [v.fmt for v in ir.vars.values()]
            if f.is_fixed]
    finest = min(lsbs) if lsbs else 0
    ref_grid = finest - REF_EXTRA_BITS
    # back off towards the program grid until the carried value fits int64
    while (kind == "exact" and _fixed_bits(ir.carried.range, ref_grid) > 62
           and ref_grid < finest - 4):
        ref_grid += 1
    if kind == "exact" and _fixed_bits(ir.carried.range, ref_grid) > 62:
        raise AnalysisError("exact reference exceeds int64 emulation; use a float reference")

    prog = _Program(ir, an.types, "program")
    ref = _Program(ir, None, kind, prec, ref_grid)
    n = ir.loop_count
    carried = ir.carried

    def init_value(side, v: Fraction, fmt: NumberFormat):
        if side == "prog":
            if fmt.is_fixed:
                return _Fixed(np.int64(v / Fraction(2) ** fmt.lsb_exponent), fmt.lsb_exponent)
            return np.float64(float(v))
        if kind == "exact":
            return _Fixed(np.int64(v / Fraction(2) ** ref_grid), ref_grid)
        return np.float64(float(v))

    def draw_sensor(rng, s, size):
        lo, hi = s.range.lo, s.range.hi
        if kind == "exact":
            scale = Fraction(2) ** ref_grid
            ilo, ihi = math.ceil(lo / scale), math.floor(hi / scale)
            true = _Fixed(rng.integers(ilo, ihi, size=size, endpoint=True), ref_grid)
        else:
            u = 1.0 - rng.random(size)
            true = float(lo) + float(hi - lo) * u
            if prec < 53:
                true = round_to_precision(true, prec)
        # sensors always quantize to nearest
        return true, _round_into(true, replace(s.fmt, rounding="nearest"))

    def diff(p, r) -> np.ndarray:
        if isinstance(p, _Fixed) and isinstance(r, _Fixed):
            x, y, g = _align(p, r)
            return np.ldexp((x - y).astype(np.float64), g)
        return _to_float(p) - _to_float(r)

    def work(block, size):
        rng = cfg.block_rng(block)
        penv = {v.name: init_value("prog", v.init, v.fmt) for v in ir.vars.values()}
        renv = {v.name: init_value("ref", v.init, v.fmt) for v in ir.vars.values()}
        running = np.zeros(size)
        prev = np.zeros(size)
        step_sum = np.zeros(n)
        step_sumsq = np.zeros(n)
        kept = np.empty((size, n)) if keep_increments else None
        for i in range(n):
            for name, s in ir.sensors.items():
                true, seen = draw_sensor(rng, s, size)
                renv[name], penv[name] = true, seen
            penv[carried.name] = prog.step(penv)
            renv[carried.name] = ref.step(renv)
            err = np.broadcast_to(diff(penv[carried.name], renv[carried.name]), (size,))
            running = np.maximum(running, np.abs(err))
            step_sum[i] = err.sum()
            step_sumsq[i] = (err * err).sum()
            if kept is not None:
                kept[:, i] = err - prev
            prev = err
        return _Tally(running, np.array(prev, dtype=float), step_sum, step_sumsq, kept)

    tallies = _run_blocks(cfg, work)
    return _report("concrete", n, cfg, tallies, _bound_function(ledger, certificate),
                   ledger.total_variance, ledger.drift_worst_case)
