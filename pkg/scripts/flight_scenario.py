"""Ten-hour flight: analytic bounds for 2**25 accumulations of a 24-bit sensor.

Prints the variance budget, the failure bound over an epsilon grid, the
epsilon needed for several failure targets (with the binding bound) and the
largest certifiable step count at eps = 0.01.
"""

import argparse
from pathlib import Path

from probcert.analyzer import analyze
from probcert.bounds import certify, max_safe_steps, required_epsilon
from probcert.ir import parse_program

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--program", default=ROOT / "programs" / "flight.prog", type=Path)
    args = ap.parse_args()

    led = analyze(parse_program(args.program.read_text())).ledger
    print(f"steps                 {led.steps}")
    print(f"sum of variances      {led.total_variance}  (~{float(led.total_variance):.4e})")
    print(f"worst-case total      {led.worst_case_total}")
    print()
    print("eps        failure bound   binding")
    for eps in ("0.0005", "0.001", "0.002", "0.005", "0.01", "0.1", "1", "1.5"):
        c = certify(led, eps)
        print(f"{eps:<10} {float(c.failure_bound):<15.4g} {c.binding}")
    print()
    print("p_fail     required eps    binding")
    for p in ("1e-3", "1e-6", "1e-9"):
        eps = required_epsilon(led, p)
        c = certify(led, eps, p_fail=p)
        print(f"{p:<10} {eps:<15.6g} {c.binding}")
    print()
    print("p_fail     max safe steps at eps=0.01")
    for p in ("1e-3", "1e-6", "1e-9"):
        print(f"{p:<10} {max_safe_steps(led.max_step_variance, '0.01', p)}")


if __name__ == "__main__":
    main()
