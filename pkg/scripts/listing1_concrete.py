"""Sensor accumulation loop emulated bit-exactly against an exact reference, next to the abstract walk."""

import argparse
import math
from pathlib import Path

from probcert.analyzer import analyze
from probcert.ir import parse_program
from probcert.montecarlo import SimConfig, simulate_abstract, simulate_concrete

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--program", default=ROOT / "programs" / "listing1_small.prog", type=Path)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ir = parse_program(args.program.read_text())
    if args.steps:
        ir = ir.with_loop_count(args.steps)
    an = analyze(ir)
    sd = math.sqrt(float(an.ledger.total_variance))
    grid = [k * sd for k in (0.8, 1.0, 1.25, 1.6, 2.0, 3.0)]
    conc = simulate_concrete(ir, SimConfig(args.trials, args.seed, grid), analysis=an)
    abst = simulate_abstract(an.ledger, SimConfig(args.trials, args.seed + 1, grid))

    print(f"n = {ir.loop_count}, trials = {args.trials}, sd(S_n) = {sd:.4g}")
    print(f"variance of S_n: concrete {conc.final_variance:.4g}, "
          f"model {float(an.ledger.total_variance):.4g}")
    print("eps          bound    concrete  abstract  z")
    for i, e in enumerate(conc.epsilons):
        fc, fa = conc.frequencies[i], abst.frequencies[i]
        se = math.hypot(conc.stderrs[i], abst.stderrs[i])
        z = abs(fc - fa) / se if se else 0.0
        print(f"{e:<12.4g} {conc.bounds[i]:<8.4f} {fc:<9.4f} {fa:<9.4f} {z:.2f}")


if __name__ == "__main__":
    main()
