"""Euler stepper in single precision: mean error trajectory against the drift bound."""

import argparse
from pathlib import Path

from probcert.analyzer import analyze
from probcert.ir import parse_program
from probcert.montecarlo import SimConfig, simulate_concrete

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=4096)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ir = parse_program((ROOT / "programs" / "euler.prog").read_text())
    an = analyze(ir)
    led = an.ledger
    print(f"loop coefficient {an.loop_coefficient}")
    for e in an.events:
        print(f"  {e.site:<28} coeff {e.coefficient}  var {float(e.variance_contribution):.3g}")
    print(f"per-step variance {float(led.max_step_variance):.4g}, "
          f"drift bound {float(led.drift_worst_case):.4g}, "
          f"worst case {float(led.deterministic_bound):.4g}")
    eps = [float(led.drift_worst_case) * k for k in (1.0, 1.5, 2.0)]
    r = simulate_concrete(ir, SimConfig(args.trials, args.seed, eps), analysis=an)
    print(f"max |mean error| {r.max_abs_mean_error:.4g} "
          f"(drift check {'ok' if r.drift_ok else 'FAILED'})")
    print(f"max |error| {r.max_abs_error:.4g}")
    for e, b, f, v in zip(r.epsilons, r.bounds, r.frequencies, r.verdicts):
        print(f"  eps={e:.4g} bound={b:.4g} empirical={f:.4g} {v}")


if __name__ == "__main__":
    main()
