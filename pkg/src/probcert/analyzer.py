"""Static error analysis of a single-loop program.

Three passes over the loop body:

* ranges: interval enclosure of every expression node, using the declared
  loop-invariant range of the carried variable (checked for stability);
* typing: which nodes round, into which format, following the machine
  semantics of the assignment's format;
* ledger: a reverse (adjoint) pass gives each error site's first-order
  coefficient on the output, a forward pass bounds the error products,
  and a short recurrence turns those into the worst-case drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from ._exact import float_up, lowest_set_exponent
from .bounds import StepBlock, VarianceLedger
from .formats import (ErrorTerm, NumberFormat, quantization_error_model,
                      rounding_error_model)
from .intervals import ONE, ZERO, Interval
from .ir import (AnalysisError, Assign, BinOp, Expr, Name, Narrow, Neg, Num,
                 ProgramIR, names_in, walk)

ITERATION_BUDGET = 10_000


# ---------------------------------------------------------------------------
# ranges


@dataclass
class Ranges:
    """Value enclosures per node uid, valid on every loop iteration."""
    nodes: dict[int, Interval]
    dcarry: dict[int, Interval]
    carried: Interval
    temps: dict[str, Interval]
    labels: dict[int, str]
    method: str = "invariant"

    def by_label(self) -> dict[str, Interval]:
        return {self.labels[k]: v for k, v in self.nodes.items()}

    def __getitem__(self, e: Expr) -> Interval:
        return self.nodes[e.uid]


def _eval_body(ir: ProgramIR, carry: Interval, dcarry: Interval | None,
               values: dict, derivs: dict):
    """Naive interval evaluation; records value (and derivative) per node."""
    env: dict[str, tuple[Interval, Interval]] = {}
    for name, s in ir.sensors.items():
        env[name] = (s.range, ZERO)
    for name, c in ir.consts.items():
        env[name] = (Interval.point(c.value), ZERO)
    for name, v in ir.vars.items():
        env[name] = (Interval.point(v.init), ZERO)
    env[ir.output] = (carry, dcarry if dcarry is not None else ZERO)

    def ev(e: Expr):
        if isinstance(e, Num):
            r = (Interval.point(e.value), ZERO)
        elif isinstance(e, Name):
            r = env[e.id]
        elif isinstance(e, Neg):
            v, d = ev(e.operand)
            r = (-v, -d)
        elif isinstance(e, Narrow):
            r = ev(e.operand)
        elif isinstance(e, BinOp):
            (lv, ld), (rv, rd) = ev(e.left), ev(e.right)
            if e.op == "add":
                r = (lv + rv, ld + rd)
            elif e.op == "sub":
                r = (lv - rv, ld - rd)
            else:
                r = (lv * rv, ld * rv + lv * rd)
        else:
            raise TypeError(e)
        values[e.uid] = r[0]
        derivs[e.uid] = r[1]
        return r

    out = None
    for st in ir.body:
        r = ev(st.expr)
        if st.target == ir.output:
            out = r[0]
        else:
            env[st.target] = r
    return out


def _enclose(ir: ProgramIR, carry: Interval):
    """Per-node enclosures: naive evaluation intersected with the mean-value form."""
    naive, deriv = {}, {}
    _eval_body(ir, carry, ONE, naive, deriv)
    at_mid, _ = {}, {}
    m = carry.mid
    _eval_body(ir, Interval.point(m), ONE, at_mid, _)
    offset = carry - m
    nodes = {}
    for uid, v in naive.items():
        mv = at_mid[uid] + deriv[uid] * offset
        nodes[uid] = v.intersect(mv) or v
    out_root = next(st.expr for st in ir.body if st.target == ir.output)
    return nodes, deriv, nodes[out_root.uid]


def _temp_closure(ir: ProgramIR, names: set[str]) -> set[str]:
    temps = {st.target: st for st in ir.body if st.target != ir.output}
    seen, todo = set(), list(names)
    while todo:
        n = todo.pop()
        if n in seen:
            continue
        seen.add(n)
        if n in temps:
            todo.extend(names_in(temps[n].expr))
    return seen


def _accumulation_increment(ir: ProgramIR) -> Expr | None:
    """The g in ``out = out + g`` (or ``g + out``, ``out - g``), if that form."""
    root = next(st.expr for st in ir.body if st.target == ir.output)
    if not isinstance(root, BinOp) or root.op == "mul":
        return None
    candidates = [(root.left, root.right)]
    if root.op == "add":
        candidates.append((root.right, root.left))
    for carry, g in candidates:
        if isinstance(carry, Name) and carry.id == ir.output:
            if ir.output not in _temp_closure(ir, names_in(g)):
                return g
    return None


def propagate_ranges(ir: ProgramIR) -> Ranges:
    """Enclose every node's value and check the carried range is invariant."""
    declared = ir.carried.range
    init = Interval.point(ir.carried.init)
    nodes, deriv, out = _enclose(ir, declared)
    labels = {e.uid: e.label for st in ir.body for e in walk(st.expr)}
    temps = {st.target: nodes[st.expr.uid] for st in ir.body if st.target != ir.output}
    ranges = Ranges(nodes, deriv, declared, temps, labels)

    if out.issubset(declared):
        return ranges

    g = _accumulation_increment(ir)
    if g is not None:
        gr = nodes[g.uid]
        if _signed(g, ir):
            gr = -gr
        n = ir.loop_count
        final = init + gr.scale(n)
        if final.issubset(declared):
            ranges.method = "accumulation"
            return ranges
        raise AnalysisError(
            f"range divergence: {ir.output} can reach {final} after {n} steps, "
            f"outside declared {declared}; declare a wider invariant range")

    reach = init
    for k in range(min(ir.loop_count, ITERATION_BUDGET)):
        _, _, step = _enclose(ir, reach)
        nxt = reach.hull(step)
        if not nxt.issubset(declared):
            raise AnalysisError(
                f"range divergence: {ir.output} reaches {nxt} within {k + 1} steps, "
                f"outside declared {declared}; declare a wider invariant range")
        if nxt == reach:
            break
        reach = nxt
    else:
        if ir.loop_count > ITERATION_BUDGET:
            raise AnalysisError(
                f"range divergence: could not show {declared} is invariant for "
                f"{ir.output}; declare a wider invariant range")
    ranges.method = "iterated"
    return ranges


def _signed(g: Expr, ir: ProgramIR) -> bool:
    root = next(st.expr for st in ir.body if st.target == ir.output)
    return root.op == "sub" and root.right is g


# ---------------------------------------------------------------------------
# typing: where roundings happen


@dataclass
class NodeType:
    ctx: NumberFormat
    repr: str                  # "fixed" or "float" after roundings
    grid: int | None = None    # fixed: value is a multiple of 2**grid
    prec: int | None = None    # float: significand bits of the value
    roundings: list[tuple[str, NumberFormat]] = field(default_factory=list)


def _fixed_bits(r: Interval, grid: int) -> int:
    return math.floor(r.mag() / Fraction(2) ** grid).bit_length()


def _literal_grid(value: Fraction, ctx: NumberFormat, where: str) -> NodeType:
    if not ctx.representable(value):
        raise AnalysisError(f"{where}: constant {value} not representable in {ctx}")
    if ctx.is_fixed:
        g = lowest_set_exponent(value)
        return NodeType(ctx, "fixed", grid=ctx.lsb_exponent if g is None else g)
    return NodeType(ctx, "float", prec=ctx.precision)


def _convert(t: NodeType, target: NumberFormat, r: Interval, kind="format_narrow"):
    """Append the rounding (if any) that puts value ``t`` into ``target``."""
    if target.is_fixed:
        if t.repr == "fixed" and t.grid >= target.lsb_exponent:
            return
        t.roundings.append((kind, target))
        t.repr, t.grid, t.prec = "fixed", target.lsb_exponent, None
    else:
        if t.repr == "float" and t.prec <= target.precision:
            return
        if t.repr == "fixed" and _fixed_bits(r, t.grid) <= target.precision:
            t.repr, t.prec, t.grid = "float", target.precision, None
            return
        t.roundings.append((kind, target))
        t.repr, t.prec, t.grid = "float", target.precision, None


def _leaf_type(fmt: NumberFormat, ctx: NumberFormat) -> NodeType:
    if fmt.is_fixed:
        return NodeType(ctx, "fixed", grid=fmt.lsb_exponent)
    return NodeType(ctx, "float", prec=fmt.precision)


def type_program(ir: ProgramIR, ranges: Ranges) -> dict[int, NodeType]:
    """Machine typing of every node: its value representation and roundings."""
    types: dict[int, NodeType] = {}
    temp_fmt: dict[str, NumberFormat] = {}

    def ty(e: Expr, ctx: NumberFormat) -> NodeType:
        r = ranges[e]
        if isinstance(e, Num):
            t = _literal_grid(e.value, ctx, e.label)
        elif isinstance(e, Name):
            if e.id in ir.consts:
                t = _literal_grid(ir.consts[e.id].value, ctx, e.label)
            else:
                fmt = temp_fmt.get(e.id) or ir.format_of(e.id)
                t = _leaf_type(fmt, ctx)
                if t.repr != ("fixed" if ctx.is_fixed else "float"):
                    _convert(t, ctx, r)
        elif isinstance(e, Neg):
            c = ty(e.operand, ctx)
            t = NodeType(ctx, c.repr, grid=c.grid, prec=c.prec)
        elif isinstance(e, Narrow):
            c = ty(e.operand, ctx)
            t = NodeType(ctx, c.repr, grid=c.grid, prec=c.prec)
            _convert(t, e.fmt, r)
        elif isinstance(e, BinOp):
            a, b = ty(e.left, ctx), ty(e.right, ctx)
            for child, ct in ((e.left, a), (e.right, b)):
                if ct.repr != ("fixed" if ctx.is_fixed else "float"):
                    _convert(ct, ctx, ranges[child])
            if ctx.is_fixed:
                grid = min(a.grid, b.grid) if e.op != "mul" else a.grid + b.grid
                t = NodeType(ctx, "fixed", grid=grid)
                if grid < ctx.lsb_exponent:
                    kind = "mul" if e.op == "mul" else "format_narrow"
                    t.roundings.append((kind, ctx))
                    t.grid = ctx.lsb_exponent
            else:
                t = NodeType(ctx, "float", prec=ctx.precision,
                             roundings=[(e.op, ctx)])
        else:
            raise TypeError(e)
        types[e.uid] = t
        return t

    for st in ir.body:
        ctx = ir.assign_format(st)
        root = ty(st.expr, ctx)
        _convert(root, ctx, ranges[st.expr])
        temp_fmt[st.target] = ctx
    return types


# ---------------------------------------------------------------------------
# ledger


@dataclass(frozen=True)
class ErrorEvent:
    site: str
    term: ErrorTerm
    coefficient: Interval        # first-order effect on this step's output
    loop_coefficient: Interval   # factor applied to carried error each step

    @property
    def variance_contribution(self) -> Fraction:
        return self.coefficient.mag() ** 2 * self.term.variance_bound

    @property
    def worst_contribution(self) -> Fraction:
        return self.coefficient.mag() * self.term.worst_case


# polynomials in the carried-error bound E, nonnegative coefficients
def _padd(p, q):
    n = max(len(p), len(q))
    return tuple((p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0)
                 for i in range(n))


def _pscale(p, c):
    return tuple(c * a for a in p)


def _pmul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return tuple(out)


def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return tuple(p)


@dataclass
class Analysis:
    ir: ProgramIR
    ranges: Ranges
    types: dict[int, NodeType]
    events: list[ErrorEvent]
    loop_coefficient: Interval
    higher_order: tuple          # Q(E) coefficients
    ledger: VarianceLedger


def _site_term(kind, fmt, r, floor, where) -> ErrorTerm:
    try:
        return rounding_error_model(kind, fmt, r, floor)
    except ValueError as exc:
        raise AnalysisError(f"{where}: {exc}") from None


def build_ledger(ir: ProgramIR, ranges: Ranges | None = None) -> VarianceLedger:
    return analyze(ir, ranges).ledger


def analyze(ir: ProgramIR, ranges: Ranges | None = None) -> Analysis:
    if ranges is None:
        ranges = propagate_ranges(ir)
    types = type_program(ir, ranges)
    floor = ir.magnitude_floor

    sensor_terms = {}
    for name, s in ir.sensors.items():
        try:
            sensor_terms[name] = quantization_error_model(s.fmt, s.range, floor)
        except ValueError as exc:
            raise AnalysisError(f"sensor {name}: {exc}") from None

    node_terms: dict[int, list[tuple[str, ErrorTerm]]] = {}
    for st in ir.body:
        for e in walk(st.expr):
            terms = []
            for kind, fmt in types[e.uid].roundings:
                terms.append((kind, _site_term(kind, fmt, ranges[e], floor, e.label)))
            node_terms[e.uid] = terms

    # reverse pass: first-order coefficients on the output
    adj: dict[int, Interval] = {}
    temp_adj: dict[str, Interval] = {}
    sensor_adj: dict[str, Interval] = {}
    carry_adj = ZERO

    def push(e: Expr, a: Interval):
        nonlocal carry_adj
        adj[e.uid] = adj.get(e.uid, ZERO) + a
        if isinstance(e, BinOp):
            if e.op == "add":
                push(e.left, a)
                push(e.right, a)
            elif e.op == "sub":
                push(e.left, a)
                push(e.right, -a)
            else:
                push(e.left, a * ranges[e.right])
                push(e.right, a * ranges[e.left])
        elif isinstance(e, Neg):
            push(e.operand, -a)
        elif isinstance(e, Narrow):
            push(e.operand, a)
        elif isinstance(e, Name):
            if e.id == ir.output:
                carry_adj = carry_adj + a
            elif e.id in ir.sensors:
                sensor_adj[e.id] = sensor_adj.get(e.id, ZERO) + a
            elif e.id in temp_adj or any(s.target == e.id for s in ir.body):
                temp_adj[e.id] = temp_adj.get(e.id, ZERO) + a

    for st in reversed(ir.body):
        a = ONE if st.target == ir.output else temp_adj.get(st.target)
        if a is not None:
            push(st.expr, a)

    loop_coef = carry_adj
    events: list[ErrorEvent] = []
    for name, term in sensor_terms.items():
        c = sensor_adj.get(name, ZERO)
        events.append(ErrorEvent(f"sensor {name}", term, c, loop_coef))
    for st in ir.body:
        for e in walk(st.expr):
            for kind, term in node_terms[e.uid]:
                if term.is_exact:
                    continue
                events.append(ErrorEvent(f"{e.label} ({kind})", term,
                                         adj.get(e.uid, ZERO), loop_coef))

    # forward pass: error magnitude = linear part L(E) + higher-order H(E)
    mags: dict[str, tuple] = {}

    def fwd(e: Expr):
        zero = (Fraction(0),)
        if isinstance(e, Num):
            L, H = zero, zero
        elif isinstance(e, Name):
            if e.id == ir.output:
                L, H = (Fraction(0), Fraction(1)), zero
            elif e.id in ir.sensors:
                L, H = (sensor_terms[e.id].worst_case,), zero
            elif e.id in mags:
                L, H = mags[e.id]
            else:
                L, H = zero, zero
        elif isinstance(e, (Neg, Narrow)):
            L, H = fwd(e.operand)
        elif isinstance(e, BinOp):
            (Lu, Hu), (Lv, Hv) = fwd(e.left), fwd(e.right)
            if e.op in ("add", "sub"):
                L, H = _padd(Lu, Lv), _padd(Hu, Hv)
            else:
                mu, mv = ranges[e.left].mag(), ranges[e.right].mag()
                L = _padd(_pscale(Lv, mu), _pscale(Lu, mv))
                H = _padd(_padd(_pscale(Hv, mu), _pscale(Hu, mv)),
                          _pmul(_padd(Lu, Hu), _padd(Lv, Hv)))
        else:
            raise TypeError(e)
        w = sum((t.worst_case for _, t in node_terms[e.uid]), Fraction(0))
        return _padd(L, (w,)), H

    Q = (Fraction(0),)
    for st in ir.body:
        LH = fwd(st.expr)
        if st.target == ir.output:
            Q = _trim(LH[1])
        else:
            mags[st.target] = LH

    variance = sum((ev.variance_contribution for ev in events), Fraction(0))
    worst = sum((ev.worst_contribution for ev in events), Fraction(0))
    zero_mean = all(ev.term.zero_mean for ev in events if ev.coefficient.mag() > 0)
    pure = loop_coef == ONE
    independent = pure or ir.conditional_zero_mean
    drift = _drift_bound(ir.loop_count, loop_coef, worst, Q)

    ledger = VarianceLedger(
        (StepBlock(ir.loop_count, variance, worst),),
        drift_worst_case=drift,
        zero_mean_certified=zero_mean,
        independence_certified=independent,
        assumptions=tuple(_assumptions(ir, loop_coef, Q, ranges)),
        events=tuple(events))
    return Analysis(ir, ranges, types, events, loop_coef, Q, ledger)


def _drift_bound(n: int, A: Interval, W: Fraction, Q: tuple):
    """Sum over steps of |Y_i| <= |A - 1| E_i + Q(E_i).

    E_i bounds the total error entering step i: E_0 = 0 and
    E_{i+1} = |A| E_i + W + Q(E_i).  Exact when nothing depends on E,
    otherwise iterated in floats rounded upward (sound, possibly inf).
    """
    g = (A - ONE).mag()
    if g == 0 and len(Q) == 1:
        return n * Q[0]
    a = float_up(A.mag())
    gf, Wf = float_up(g), float_up(W)
    Qf = [float_up(c) for c in Q]

    def up(x):
        return math.nextafter(x, math.inf) if math.isfinite(x) else x

    def q_of(E):
        acc = 0.0
        for c in reversed(Qf):
            acc = up(up(acc * E) + c)
        return acc

    E, D = 0.0, 0.0
    for i in range(n):
        qe = q_of(E)
        D = up(D + up(up(gf * E) + qe))
        E_next = up(up(up(a * E) + Wf) + qe)
        if E_next == E:
            rest = n - i - 1
            D = up(D + up(rest * up(up(gf * E) + qe)))
            break
        E = E_next
        if math.isinf(D):
            break
    return Fraction(D) if math.isfinite(D) else math.inf


def _assumptions(ir: ProgramIR, A: Interval, Q: tuple, ranges: Ranges) -> list[str]:
    out = ["each rounding and quantization error is uniform over +-ulp/2 of its "
           "result range and independent of earlier errors",
           "error events within one loop step are uncorrelated",
           f"{ir.output} stays in its declared range {ir.carried.range} "
           f"(checked: {ranges.method})",
           "no overflow or underflow of any format"]
    if ir.magnitude_floor is not None:
        out.append(f"float values stay above magnitude floor {ir.magnitude_floor}")
    if ir.conditional_zero_mean:
        out.append("assume conditional_zero_mean: E(X_i | X_1..X_{i-1}) = 0")
    if A != ONE:
        out.append(f"propagated error (loop coefficient {A}) bounded worst-case as drift")
    if any(Q):
        out.append("higher-order error products bounded worst-case as drift")
    return out
