"""Command-line driver: ``probcert analyze | simulate | report``.

Documents are JSON.  Rationals are written as exact decimal strings when
their decimal expansion terminates and as ``"p/q"`` otherwise.  Floats are
plain JSON numbers (shortest round-trip repr) except infinities, written
``"inf"``.  Everything except the run manifest is covered by
``content_digest``, so two runs on the same inputs produce the same digest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import fields
from datetime import datetime, timezone
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path

from . import __version__
from ._exact import float_up, to_fraction
from .analyzer import analyze
from .bounds import (Certificate, NotAMartingaleError, VarianceLedger, StepBlock,
                     certify, max_safe_steps, required_epsilon)
from .ir import AnalysisError, ParseError, parse_program
from .montecarlo import SimConfig, SimReport, simulate_abstract, simulate_concrete

CERT_SCHEMA = "probcert/certificate@1"
SIM_SCHEMA = "probcert/simreport@1"
LEDGER_SCHEMA = "probcert/ledger@1"

EXIT_OK, EXIT_ERROR, EXIT_DOWNGRADED, EXIT_VIOLATED = 0, 1, 2, 3

REPORT_P_FAILS = ("1e-3", "1e-6", "1e-9")


class CliError(Exception):
    pass


# -- number encoding ---------------------------------------------------------

def _terminates(q: Fraction) -> bool:
    d = q.denominator
    for f in (2, 5):
        while d % f == 0:
            d //= f
    return d == 1


def encode_number(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        if not _terminates(x):
            return f"{x.numerator}/{x.denominator}"
        digits = max(x.denominator.bit_length(), 1) + len(str(abs(x.numerator))) + 2
        with localcontext() as ctx:
            ctx.prec = digits
            s = format(Decimal(x.numerator) / Decimal(x.denominator), "f")
        return s
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def decode_number(s):
    """Inverse of :func:`encode_number` (Fraction, or float for inf)."""
    if isinstance(s, int) and not isinstance(s, bool):
        return Fraction(s)
    if s in ("inf", "-inf"):
        return float(s)
    if isinstance(s, float):
        return s
    return to_fraction(s)


def _encode_tree(obj):
    if isinstance(obj, dict):
        return {k: _encode_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode_tree(v) for v in obj]
    return encode_number(obj)


# -- documents ---------------------------------------------------------------

def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _manifest(command: str, params: dict, started: datetime, digest: str) -> dict:
    return {
        "command": command,
        "parameters": params,
        "input_digest": digest,
        "tool_version": __version__,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
    }


def make_document(schema: str, key: str, body: dict, input_digest: str,
                  manifest: dict | None = None, **extra) -> dict:
    core = {"schema": schema, "tool_version": __version__,
            "input_digest": input_digest, key: body, **extra}
    doc = dict(core)
    doc["content_digest"] = sha256_hex(_canonical(core))
    if manifest is not None:
        doc["manifest"] = manifest
    return doc


def content_digest(doc: dict) -> str:
    core = {k: v for k, v in doc.items() if k not in ("content_digest", "manifest")}
    return sha256_hex(_canonical(core))


def certificate_body(cert: Certificate) -> dict:
    return _encode_tree({f.name: getattr(cert, f.name) for f in fields(cert)})


def certificate_from_body(body: dict) -> Certificate:
    kw = {}
    for f in fields(Certificate):
        v = body.get(f.name)
        if f.name in ("mode", "binding"):
            kw[f.name] = v
        elif f.name == "assumptions":
            kw[f.name] = tuple(v)
        elif f.name in ("steps", "max_safe_steps"):
            kw[f.name] = None if v is None else int(v)
        elif f.name == "p_fail":
            kw[f.name] = None if v is None else decode_number(v)
        else:
            kw[f.name] = decode_number(v)
    return Certificate(**kw)


def ledger_body(ledger: VarianceLedger) -> dict:
    return _encode_tree({
        "blocks": [[b.count, b.variance, b.worst_case] for b in ledger.blocks],
        "drift_worst_case": ledger.drift_worst_case,
        "zero_mean_certified": ledger.zero_mean_certified,
        "independence_certified": ledger.independence_certified,
        "assumptions": list(ledger.assumptions),
    })


def ledger_from_body(body: dict) -> VarianceLedger:
    blocks = tuple(StepBlock(int(c), decode_number(v), decode_number(w))
                   for c, v, w in body["blocks"])
    return VarianceLedger(
        blocks=blocks, drift_worst_case=decode_number(body["drift_worst_case"]),
        zero_mean_certified=body["zero_mean_certified"],
        independence_certified=body["independence_certified"],
        assumptions=tuple(body["assumptions"]))


def simreport_body(report: SimReport) -> dict:
    return _encode_tree(report.to_dict())


def _write(doc: dict, out: str | None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_json(path: str, schema: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: {exc}") from None
    if doc.get("schema") != schema:
        raise CliError(f"{path}: expected a {schema} document")
    if content_digest(doc) != doc.get("content_digest"):
        print(f"warning: {path}: content digest does not match its body",
              file=sys.stderr)
    return doc


def _read_program(path: str):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"{path}: {exc}") from None
    try:
        ir = parse_program(raw.decode())
    except ParseError as exc:
        raise CliError(f"{path}:{exc}") from None
    return ir, sha256_hex(raw)


# -- commands ----------------------------------------------------------------

def _worst_case_epsilon(ledger: VarianceLedger) -> float:
    d = ledger.deterministic_bound
    if isinstance(d, float):
        return math.inf
    e = float_up(d)
    return math.nextafter(e, math.inf) if Fraction(e) == d else e


def cmd_analyze(args) -> int:
    started = datetime.now(timezone.utc)
    ir, digest = _read_program(args.program)
    if args.steps is not None:
        ir = ir.with_loop_count(args.steps)
    an = analyze(ir)
    ledger = an.ledger

    query = args.query
    if query == "epsilon":
        if args.p_fail is None or args.epsilon is not None:
            raise CliError("--query epsilon needs --p-fail and no --epsilon")
        try:
            eps = required_epsilon(ledger, args.p_fail)
        except NotAMartingaleError:
            eps = _worst_case_epsilon(ledger)
        if not math.isfinite(eps):
            raise CliError("no finite epsilon can be certified")
    else:
        if args.epsilon is None:
            raise CliError("supply --epsilon, or --p-fail with --query epsilon")
        if query == "steps" and args.p_fail is None:
            raise CliError("--query steps needs --p-fail")
        eps = args.epsilon
    cert = certify(ledger, eps, p_fail=args.p_fail)

    params = {"epsilon": args.epsilon, "p_fail": args.p_fail, "query": query,
              "steps": args.steps, "program": args.program}
    doc = make_document(CERT_SCHEMA, "certificate", certificate_body(cert), digest,
                        _manifest("analyze", params, started, digest))
    _write(doc, args.out)
    if args.ledger_out:
        _write(make_document(LEDGER_SCHEMA, "ledger", ledger_body(ledger), digest),
               args.ledger_out)
    return EXIT_OK if cert.mode == "stochastic" else EXIT_DOWNGRADED


def _parse_grid(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        grid = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"bad --eps-grid {text!r}") from None
    if any(not e > 0 for e in grid):
        raise CliError("--eps-grid values must be positive")
    return grid


def cmd_simulate(args) -> int:
    started = datetime.now(timezone.utc)
    cdoc = _load_json(args.certificate, CERT_SCHEMA)
    cert = certificate_from_body(cdoc["certificate"])

    raw = Path(args.input).read_bytes()
    ledger_doc = None
    if raw.lstrip().startswith(b"{"):
        ledger_doc = _load_json(args.input, LEDGER_SCHEMA)
        digest = ledger_doc["input_digest"]
    else:
        digest = sha256_hex(raw)
    if digest != cdoc["input_digest"]:
        raise CliError("certificate does not match program")

    grid = sorted(set(_parse_grid(args.eps_grid) + [float(cert.epsilon)]))
    cfg = SimConfig(trials=args.trials, seed=args.seed, epsilon_grid=grid,
                    mode=args.mode, threads=args.threads)
    if args.mode == "abstract":
        if ledger_doc is not None:
            ledger = ledger_from_body(ledger_doc["ledger"])
        else:
            ir, _ = _read_program(args.input)
            ledger = analyze(ir.with_loop_count(cert.steps)).ledger
        report = simulate_abstract(ledger, cfg, certificate=cert)
    else:
        if ledger_doc is not None:
            raise CliError("concrete simulation needs the program, not a ledger")
        ir, _ = _read_program(args.input)
        report = simulate_concrete(ir.with_loop_count(cert.steps), cfg,
                                   reference=args.reference, certificate=cert)

    params = {"trials": args.trials, "seed": args.seed, "eps_grid": grid,
              "mode": args.mode, "reference": args.reference,
              "input": args.input, "certificate": args.certificate}
    doc = make_document(SIM_SCHEMA, "report", simreport_body(report), digest,
                        _manifest("simulate", params, started, digest),
                        certificate_digest=cdoc["content_digest"])
    _write(doc, args.out)
    return EXIT_VIOLATED if report.violated else EXIT_OK


def _fmt(x) -> str:
    return f"{float(x):.3g}"


def render_report(cdoc: dict, sdoc: dict | None = None) -> tuple[str, list[str]]:
    """Text report and TSV plot rows for a certificate (and simreport)."""
    cert = certificate_from_body(cdoc["certificate"])
    lines = [f"certificate for input sha256:{cdoc['input_digest'][:16]}",
             f"mode: {cert.mode}  steps: {cert.steps}  binding: {cert.binding}",
             f"total variance: {_fmt(cert.total_variance)}  "
             f"deterministic worst case: {_fmt(cert.deterministic_bound)}",
             "assumptions:"]
    lines += [f"  - {a}" for a in cert.assumptions] or ["  (none)"]

    rows: list[tuple[float, float, float | None, float | None, str]] = []
    if sdoc is not None:
        rep = sdoc["report"]
        for i, e in enumerate(rep["epsilons"]):
            rows.append((float(e), float(rep["bounds"][i]), float(rep["frequencies"][i]),
                         float(rep["stderrs"][i]), rep["verdicts"][i]))
    else:
        rows.append((float(cert.epsilon), float(cert.failure_bound), None, None, ""))

    lines.append("epsilon table:")
    for e, b, freq, se, verdict in rows:
        row = f"  eps={e:g} -> failure <= {b:.3g}"
        if freq is not None:
            row += f"   empirical {freq:.3g} +/- {se:.2g}  {verdict}"
        lines.append(row)

    lines.append(f"max safe steps at eps={float(cert.epsilon):g}:")
    if cert.mode != "stochastic" or cert.max_step_variance == 0:
        lines.append("  (not applicable)")
    else:
        for p in REPORT_P_FAILS:
            n = max_safe_steps(cert.max_step_variance, cert.epsilon, p)
            lines.append(f"  p_fail={p} -> n <= {n}")

    tsv = ["eps\tbound\tempirical\tstderr"]
    for e, b, freq, se, _ in rows:
        tsv.append("\t".join([repr(e), repr(b),
                              "" if freq is None else repr(freq),
                              "" if se is None else repr(se)]))
    return "\n".join(lines) + "\n", tsv


def cmd_report(args) -> int:
    cdoc = _load_json(args.certificate, CERT_SCHEMA)
    sdoc = None
    if args.simreport:
        sdoc = _load_json(args.simreport, SIM_SCHEMA)
        if sdoc["input_digest"] != cdoc["input_digest"]:
            raise CliError("simreport and certificate describe different programs")
        if sdoc.get("certificate_digest") != cdoc["content_digest"]:
            raise CliError("simreport was produced against a different certificate")
    text, tsv = render_report(cdoc, sdoc)
    sys.stdout.write(text)
    if args.plot_data:
        Path(args.plot_data).write_text("\n".join(tsv) + "\n")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="probcert", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"probcert {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyze a program and emit a certificate")
    a.add_argument("program")
    a.add_argument("--epsilon", help="error threshold (exact decimal)")
    a.add_argument("--p-fail", help="target failure probability")
    a.add_argument("--query", choices=("epsilon", "steps"))
    a.add_argument("--steps", type=int, help="override the loop count")
    a.add_argument("--out")
    a.add_argument("--ledger-out")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="Monte Carlo check of a certificate")
    s.add_argument("input", help="program file or ledger document")
    s.add_argument("certificate")
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eps-grid", help="comma-separated epsilons")
    s.add_argument("--mode", choices=("abstract", "concrete"), default="abstract")
    s.add_argument("--reference", help="exact, or a float format for concrete mode")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="render a certificate and optional simreport")
    r.add_argument("certificate")
    r.add_argument("simreport", nargs="?")
    r.add_argument("--plot-data", help="write eps/bound/empirical/stderr TSV here")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, AnalysisError, ValueError) as exc:
        print(f"probcert: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
