"""Acceptance gate: one check per criterion, each at its stated tolerance.

Run under pytest (a PASS/FAIL line per criterion is printed in the summary)
or directly with ``python tests/test_acceptance.py``.
"""

import math
import random
import sys
import time
from decimal import Decimal, getcontext
from fractions import Fraction as F
from pathlib import Path

import pytest

from probcert.analyzer import analyze
from probcert.bounds import (VarianceLedger, certify, doob_failure_bound,
                             empirical_martingale_check, max_safe_steps, required_epsilon)
from probcert.cli import main as cli_main
from probcert.ir import parse_program
from probcert.montecarlo import SimConfig, simulate_abstract, simulate_concrete
from probcert.prob import UniformRV, convolve_power, irwin_hall_cdf

sys.path.insert(0, str(Path(__file__).resolve().parent))
from spaces import law_violations, random_event, random_partition, random_space  # noqa: E402

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"

pytestmark = pytest.mark.acceptance


def program(name, n=None):
    ir = parse_program((PROGRAMS / name).read_text())
    return ir if n is None else ir.with_loop_count(n)


def sensor_sum_formula():
    ir = program("listing1.prog")
    led = analyze(ir).ledger
    cert = certify(led, "0.01")
    want_var = F(10 ** 6, 2 ** 32 * 12)
    want_bound = want_var / F(1, 100) ** 2
    ok = (ir.loop_count == 10 ** 6 and led.total_variance == want_var
          and cert.failure_bound == want_bound and cert.mode == "stochastic"
          and round(float(cert.failure_bound), 5) == 0.19403)
    return ok, f"variance {led.total_variance}, failure {float(cert.failure_bound):.6f}"


def flight_arithmetic():
    led = analyze(program("flight.prog")).ledger
    sigma2 = F(1, 2 ** 23) / 12
    bound = certify(led, "0.01").failure_bound
    eps = required_epsilon(led, "1e-9")
    cert = certify(led, eps, p_fail="1e-9")
    getcontext().prec = 40
    exact_eps = (Decimal(sigma2.numerator) / Decimal(sigma2.denominator) * Decimal(10) ** 9).sqrt()
    ok = (led.steps == 2 ** 25 and led.total_variance == sigma2
          and bound == sigma2 * 10 ** 4 and f"{float(bound):.3g}" == "9.93e-05"
          and abs(Decimal(eps) / exact_eps - 1) <= Decimal("1e-6")
          and round(eps, 3) == 3.152
          and cert.deterministic_bound == 1 and cert.binding == "deterministic")
    return ok, (f"sum var {led.total_variance}, failure {float(bound):.4g}, "
                f"eps(1e-9) {eps:.6f} vs worst case {cert.deterministic_bound} "
                f"(binding {cert.binding})")


DOOB_TARGETS = (0.05, 0.1, 0.2, 0.4, 0.6, 0.9)


def doob_soundness(trials=100_000):
    worst = []
    for n in (10, 100, 1000):
        led = VarianceLedger.uniform(n, F(1, 12), F(1, 2))
        total = n / 12
        grid = [math.sqrt(total / b) for b in DOOB_TARGETS]
        r = simulate_abstract(led, SimConfig(trials, 1000 + n, grid))
        if r.violated or not all(0.05 - 1e-9 <= b <= 0.9 + 1e-9 for b in r.bounds):
            return False, f"n={n}: {r.verdicts} bounds {r.bounds}"
        worst.append(max(f - b for f, b in zip(r.frequencies, r.bounds)))
    return True, f"18 grid points sound; max(freq - bound) = {max(worst):.4f}"


def convolution_oracle():
    u = UniformRV(0, 1).density()
    worst = 0.0
    for n in range(1, 7):
        f = convolve_power(u, n)
        for k in range(100):
            x = F(k * n, 99)
            worst = max(worst, abs(float(f.cdf(x)) - float(irwin_hall_cdf(n, x))))
    exact2 = irwin_hall_cdf(2, 1) == F(1, 2)
    third = abs(float(irwin_hall_cdf(3, 1)) - 1 / 6) <= 1e-12
    return worst <= 1e-10 and exact2 and third, f"max |convolution - Irwin-Hall| = {worst:.2e}"


def finite_space_laws(cases=1000):
    rng = random.Random(5)
    failures = 0
    for _ in range(cases):
        s = random_space(rng)
        bad = law_violations(s, random_event(rng, s), random_event(rng, s),
                             random_partition(rng, s))
        failures += bool(bad)
    return failures == 0, f"{cases} random spaces, {failures} with a violated identity"


CONCRETE_EPS_SIGMAS = (0.8, 1.0, 1.25, 1.6, 2.0)


def concrete_vs_abstract(trials=10_000):
    ir = program("listing1_small.prog")
    an = analyze(ir)
    n = ir.loop_count
    sd = math.sqrt(float(an.ledger.total_variance))
    grid = [k * sd for k in CONCRETE_EPS_SIGMAS]
    conc = simulate_concrete(ir, SimConfig(trials, 61, grid), analysis=an)
    abst = simulate_abstract(an.ledger, SimConfig(trials, 62, grid))
    z = [abs(fc - fa) / math.sqrt(sc ** 2 + sa ** 2)
         for fc, fa, sc, sa in zip(conc.frequencies, abst.frequencies,
                                   conc.stderrs, abst.stderrs)]
    want = n * 2.0 ** -32 / 12
    rel = abs(conc.final_variance / want - 1)
    ok = n == 10 ** 4 and max(z) <= 4 and rel <= 0.05 and not conc.violated
    return ok, f"max z = {max(z):.2f} over 5 eps, variance off by {rel:.2%}"


def drift_rejection(trials=10_000):
    code = cli_main(["analyze", str(PROGRAMS / "listing1_trunc.prog"),
                     "--epsilon", "0.01", "--out", "/dev/null"])
    ir = program("listing1_trunc.prog", 100)
    r = simulate_concrete(ir, SimConfig(trials, 71, [0.001]), keep_increments=True)
    check = empirical_martingale_check(r.increments)
    ok = code == 2 and check.verdict == "fail" and "mean" in check.failed
    est, se = check.statistics["mean"]
    return ok, f"exit {code}; mean increment {est:.3g} at {abs(est) / se:.0f} standard errors"


def inversion_round_trips(cases=1000):
    rng = random.Random(8)
    bad = 0

    def log_uniform(lo, hi):
        return F(10 ** rng.uniform(lo, hi))

    for _ in range(cases):
        var, eps, p = log_uniform(-20, 0), log_uniform(-6, 1), log_uniform(-12, 0)
        n = max_safe_steps(var, eps, p)
        worst = max(eps, var, F(1))
        above = doob_failure_bound(VarianceLedger.uniform(n + 1, var, worst), eps)
        below_ok = n == 0 or doob_failure_bound(VarianceLedger.uniform(n, var, worst), eps) <= p
        steps = rng.randint(1, 1000)
        led = VarianceLedger.uniform(steps, var, F(10) ** 6)
        e = required_epsilon(led, p)
        e_ok = (doob_failure_bound(led, e) <= p
                and doob_failure_bound(led, math.nextafter(e, 0)) > p)
        bad += not (below_ok and above > p and e_ok)
    return bad == 0, f"{cases} random triples, {bad} boundary failures"


CRITERIA = [
    (1, "sensor-sum formula reproduction", sensor_sum_formula, 1.0),
    (2, "flight-scenario arithmetic", flight_arithmetic, 1.0),
    (3, "Doob-Kolmogorov empirical soundness", doob_soundness, 120.0),
    (4, "convolution oracle equivalence", convolution_oracle, 5.0),
    (5, "finite-space probability laws", finite_space_laws, 10.0),
    (6, "concrete-vs-abstract agreement", concrete_vs_abstract, 60.0),
    (7, "drift rejection", drift_rejection, 30.0),
    (8, "inversion round-trips", inversion_round_trips, 5.0),
]


def run_criterion(number, title, check, limit):
    t0 = time.perf_counter()
    ok, detail = check()
    elapsed = time.perf_counter() - t0
    passed = ok and elapsed < limit
    line = (f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} "
            f"({elapsed:.2f}s / {limit:g}s) {detail}")
    return passed, line, ok, elapsed


@pytest.mark.parametrize("number, title, check, limit", CRITERIA,
                         ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, title, check, limit, acceptance_log):
    passed, line, ok, elapsed = run_criterion(number, title, check, limit)
    print(line)
    acceptance_log(line)
    assert ok, line
    assert elapsed < limit, line


if __name__ == "__main__":
    results = [run_criterion(*c) for c in CRITERIA]
    for _, line, _, _ in results:
        print(line)
    sys.exit(0 if all(r[0] for r in results) else 1)
