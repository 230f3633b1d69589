"""Acceptance rate of a bit-flipping R0 as a function of its proof size.

Each row compares the Monte Carlo rate (with a Wilson 95% interval) to 2^-|K|.
"""

import argparse
from dataclasses import replace

from qdbcast.bcast import BroadcastParams
from qdbcast.runner import RunConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6, 8])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2026)
    args = ap.parse_args()

    print(f"{'|K|':>4} {'accepted':>9} {'rate':>7} {'wilson95':>17} {'2^-|K|':>8}")
    for k in args.sizes:
        cfg = RunConfig(
            trials=args.trials,
            master_seed=args.seed,
            adversary=f"R0BitFlip:proof_size={k}",
            bcast=replace(BroadcastParams(), k_min=k),
        )
        agg = run_experiment(cfg)["aggregate"]
        lo, hi = agg["cheat_acceptance_wilson95"]
        print(f"{k:>4} {agg['cheat_accepted']:>4}/{agg['cheat_attempts']:<4} "
              f"{agg['cheat_acceptance_rate']:>7.4f} [{lo:.4f}, {hi:.4f}] {2.0 ** -k:>8.4f}")


if __name__ == "__main__":
    main()
