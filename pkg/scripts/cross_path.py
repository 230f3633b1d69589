"""Run the same configuration on the oracle and state-vector paths and compare rates."""

import argparse
from dataclasses import replace

import numpy as np
from scipy import stats

from qdbcast.runner import RunConfig, run_experiment

KEYS = ("agreement_rate", "abort_rate", "conflict_rate", "broadcast_rate")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--adversary", default="HonestAll")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = RunConfig(trials=args.trials, master_seed=args.seed, adversary=args.adversary)
    aggs = {p: run_experiment(replace(base, quantum_path=p))["aggregate"] for p in ("oracle", "qsim")}
    n = args.trials
    print(f"{'metric':<16} {'oracle':>8} {'qsim':>8} {'p':>8}")
    for key in KEYS:
        k = [round(aggs[p][key] * n) for p in aggs]
        table = np.array([k, [n - v for v in k]])
        p = stats.chi2_contingency(table).pvalue if table.min(axis=1).all() else float("nan")
        print(f"{key:<16} {aggs['oracle'][key]:>8.4f} {aggs['qsim'][key]:>8.4f} {p:>8.3f}")


if __name__ == "__main__":
    main()
