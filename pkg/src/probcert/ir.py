"""Program IR and its text syntax.

A program is a set of declarations, one loop with a straight-line body, and
a designated output::

    # discrete integration of a fixed-point sensor
    sensor x in [-1, 1] : fixed(lsb=-16);
    var a = 0 in [-1000000, 1000000] : fixed(lsb=-16);
    loop n=1000000 { a = a + x; }
    output a;

Other statements: ``const h = 0.0625 : float(p=24);``, ``assume
conditional_zero_mean;`` and ``assume magnitude_floor = 1e-6;``.  Body
assignments may carry a format annotation (``t = x * x : fixed(lsb=-8);``),
otherwise they use the output's format.  ``narrow(expr, fmt)`` rounds a
value into another format explicitly.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .formats import NumberFormat, parse_format
from .intervals import Interval


class AnalysisError(ValueError):
    pass


class ParseError(AnalysisError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line, self.col, self.message = line, col, message


# -- expression AST ---------------------------------------------------------

_ids = itertools.count()


@dataclass(eq=False)
class Expr:
    pos: tuple[int, int] = field(default=(0, 0), kw_only=True)
    uid: int = field(default_factory=lambda: next(_ids), kw_only=True)

    @property
    def label(self) -> str:
        return f"{self.pos[0]}:{self.pos[1]} {self.describe()}"

    def describe(self) -> str:
        return type(self).__name__.lower()

    def children(self) -> tuple[Expr, ...]:
        return ()


@dataclass(eq=False)
class Num(Expr):
    value: Fraction

    def describe(self):
        return f"const {self.value}"


@dataclass(eq=False)
class Name(Expr):
    id: str

    def describe(self):
        return f"read {self.id}"


@dataclass(eq=False)
class BinOp(Expr):
    op: str  # "add" | "sub" | "mul"
    left: Expr
    right: Expr

    def describe(self):
        return self.op

    def children(self):
        return (self.left, self.right)


@dataclass(eq=False)
class Neg(Expr):
    operand: Expr

    def describe(self):
        return "neg"

    def children(self):
        return (self.operand,)


@dataclass(eq=False)
class Narrow(Expr):
    operand: Expr
    fmt: NumberFormat

    def describe(self):
        return f"narrow to {self.fmt}"

    def children(self):
        return (self.operand,)


def walk(e: Expr):
    yield e
    for c in e.children():
        yield from walk(c)


def names_in(e: Expr) -> set[str]:
    return {n.id for n in walk(e) if isinstance(n, Name)}


# -- declarations and program -----------------------------------------------


@dataclass(frozen=True)
class Sensor:
    name: str
    range: Interval
    fmt: NumberFormat


@dataclass(frozen=True)
class Const:
    name: str
    value: Fraction
    fmt: NumberFormat


@dataclass(frozen=True)
class Var:
    name: str
    init: Fraction
    range: Interval
    fmt: NumberFormat


@dataclass
class Assign:
    target: str
    expr: Expr
    fmt: NumberFormat | None
    pos: tuple[int, int]


@dataclass
class ProgramIR:
    sensors: dict[str, Sensor]
    consts: dict[str, Const]
    vars: dict[str, Var]
    loop_count: int
    body: list[Assign]
    output: str
    conditional_zero_mean: bool = False
    magnitude_floor: Fraction | None = None

    @property
    def carried(self) -> Var:
        return self.vars[self.output]

    def format_of(self, name: str) -> NumberFormat:
        for table in (self.sensors, self.consts, self.vars):
            if name in table:
                return table[name].fmt
        for st in self.body:
            if st.target == name:
                return st.fmt or self.carried.fmt
        raise KeyError(name)

    def assign_format(self, st: Assign) -> NumberFormat:
        if st.target == self.output:
            return self.carried.fmt
        return st.fmt or self.carried.fmt

    def with_loop_count(self, n: int) -> ProgramIR:
        from dataclasses import replace
        return replace(self, loop_count=n)


# -- tokenizer --------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<format>(?:float|fixed)\s*\([^)]*\)(?:\s*,\s*trunc\b)?)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/=;:,(){}\[\]^])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks, line, start, i = [], 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, i - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, i - start + 1))
        i = m.end()
    toks.append(_Tok("eof", "", line, i - start + 1))
    return toks


# -- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def take(self, kind=None, text=None) -> _Tok:
        t = self.tok
        if (kind and t.kind != kind) or (text and t.text != text):
            want = text or kind
            got = t.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        self.i += 1
        return t

    def at(self, text) -> bool:
        return self.tok.text == text

    def number(self) -> Fraction:
        neg = False
        if self.at("-") or self.at("+"):
            neg = self.take().text == "-"
        t = self.take("num")
        value = Fraction(t.text)
        if self.at("^"):
            # 2^-16 style powers
            self.take("op", "^")
            sign = -1 if self.at("-") else 1
            if self.at("-") or self.at("+"):
                self.take()
            exp = self.take("num")
            if not exp.text.isdigit():
                raise self.error("integer exponent expected", exp)
            value = value ** (sign * int(exp.text))
        return -value if neg else value

    def fmt(self) -> NumberFormat:
        t = self.take("format")
        try:
            return parse_format(t.text)
        except ValueError as exc:
            raise self.error(str(exc), t) from None

    def range_(self) -> Interval:
        t = self.take("op", "[")
        lo = self.number()
        self.take("op", ",")
        hi = self.number()
        self.take("op", "]")
        if lo > hi:
            raise self.error(f"empty range [{lo}, {hi}]", t)
        return Interval(lo, hi)

    # expressions
    def expr(self) -> Expr:
        left = self.term()
        while self.at("+") or self.at("-"):
            t = self.take()
            right = self.term()
            left = BinOp("add" if t.text == "+" else "sub", left, right, pos=(t.line, t.col))
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.at("*") or self.at("/"):
            t = self.take()
            if t.text == "/":
                raise self.error("unsupported: division", t)
            right = self.unary()
            left = BinOp("mul", left, right, pos=(t.line, t.col))
        return left

    def unary(self) -> Expr:
        if self.at("-"):
            t = self.take()
            return Neg(self.unary(), pos=(t.line, t.col))
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            return Num(self.number(), pos=(t.line, t.col))
        if t.text == "(":
            self.take()
            e = self.expr()
            self.take("op", ")")
            return e
        if t.kind == "name":
            self.take()
            if t.text == "narrow":
                self.take("op", "(")
                inner = self.expr()
                self.take("op", ",")
                f = self.fmt()
                self.take("op", ")")
                return Narrow(inner, f, pos=(t.line, t.col))
            if t.text == "loop":
                raise self.error("unsupported: nested loops", t)
            if self.at("("):
                raise self.error(f"unsupported: function call {t.text}()", t)
            return Name(t.text, pos=(t.line, t.col))
        raise self.error(f"unexpected {t.text or 'end of input'!r} in expression")

    # statements
    def program(self) -> ProgramIR:
        sensors, consts, vars_ = {}, {}, {}
        loop = None
        output = None
        czm, floor = False, None
        declared: set[str] = set()

        def declare(tok):
            if tok.text in declared:
                raise self.error(f"duplicate declaration of {tok.text!r}", tok)
            declared.add(tok.text)

        while self.tok.kind != "eof":
            kw = self.take("name")
            if kw.text == "sensor":
                name = self.take("name")
                declare(name)
                self.take("name", "in")
                r = self.range_()
                self.take("op", ":")
                sensors[name.text] = Sensor(name.text, r, self.fmt())
            elif kw.text == "const":
                name = self.take("name")
                declare(name)
                self.take("op", "=")
                v = self.number()
                self.take("op", ":")
                f = self.fmt()
                if not f.representable(v):
                    raise self.error(f"constant {v} not representable in {f}", name)
                consts[name.text] = Const(name.text, v, f)
            elif kw.text == "var":
                name = self.take("name")
                declare(name)
                self.take("op", "=")
                v = self.number()
                self.take("name", "in")
                r = self.range_()
                self.take("op", ":")
                f = self.fmt()
                if not f.representable(v):
                    raise self.error(f"initial value {v} not representable in {f}", name)
                if v not in r:
                    raise self.error(f"initial value {v} outside declared range {r}", name)
                vars_[name.text] = Var(name.text, v, r, f)
            elif kw.text == "loop":
                if loop is not None:
                    raise self.error("only one loop is supported", kw)
                loop = self.loop()
                continue
            elif kw.text == "output":
                if output is not None:
                    raise self.error("duplicate output", kw)
                output = self.take("name")
            elif kw.text == "assume":
                what = self.take("name")
                if what.text == "conditional_zero_mean":
                    czm = True
                elif what.text == "magnitude_floor":
                    self.take("op", "=")
                    floor = self.number()
                    if floor <= 0:
                        raise self.error("magnitude floor must be positive", what)
                else:
                    raise self.error(f"unknown assumption {what.text!r}", what)
            else:
                raise self.error(f"unknown statement {kw.text!r}", kw)
            self.take("op", ";")

        if loop is None:
            raise self.error("program has no loop")
        if output is None:
            raise self.error("program has no output")
        count, body = loop
        ir = ProgramIR(sensors, consts, vars_, count, body, output.text, czm, floor)
        _validate(ir, output)
        return ir

    def loop(self):
        t = self.take("name", "n")
        self.take("op", "=")
        count = self.take("num")
        if not count.text.isdigit() or int(count.text) < 1:
            raise self.error("loop count must be a positive integer", count)
        open_ = self.take("op", "{")
        body = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated loop body", open_)
            if self.at("loop"):
                raise self.error("unsupported: nested loops")
            target = self.take("name")
            self.take("op", "=")
            e = self.expr()
            f = None
            if self.at(":"):
                self.take()
                f = self.fmt()
            self.take("op", ";")
            body.append(Assign(target.text, e, f, (target.line, target.col)))
        close = self.take("op", "}")
        if not body:
            raise self.error("empty loop body", close)
        return int(count.text), body


def _validate(ir: ProgramIR, out_tok: _Tok):
    if ir.output not in ir.vars:
        raise ParseError(f"output {ir.output!r} must be a declared var",
                         out_tok.line, out_tok.col)
    defined = set(ir.sensors) | set(ir.consts) | set(ir.vars)
    assigned: set[str] = set()
    for st in ir.body:
        for e in walk(st.expr):
            if isinstance(e, Name) and e.id not in defined:
                raise ParseError(f"undefined name {e.id!r}", *e.pos)
        if st.target in ir.sensors or st.target in ir.consts:
            raise ParseError(f"cannot assign to {st.target!r}", *st.pos)
        if st.target in assigned:
            raise ParseError(f"{st.target!r} assigned twice in the loop body", *st.pos)
        if st.target in ir.vars and st.target != ir.output:
            raise ParseError(f"{st.target!r} is loop-carried but not the output; "
                             "only one loop-carried error path is supported", *st.pos)
        if st.target == ir.output and st.fmt is not None and st.fmt != ir.carried.fmt:
            raise ParseError("output assignment format must match its declaration", *st.pos)
        assigned.add(st.target)
        defined.add(st.target)
    if ir.output not in assigned:
        raise ParseError(f"output {ir.output!r} is never assigned in the loop",
                         out_tok.line, out_tok.col)
    # the output may be read before its assignment only
    out_idx = next(i for i, st in enumerate(ir.body) if st.target == ir.output)
    for st in ir.body[out_idx + 1:]:
        if ir.output in names_in(st.expr):
            raise ParseError("output read after its update in the same iteration",
                             *st.pos)


def parse_program(text: str) -> ProgramIR:
    return _Parser(text).program()
