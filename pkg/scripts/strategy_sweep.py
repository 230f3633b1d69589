"""One line per catalog strategy: abort, agreement, detectable-broadcast and cheat rates."""

import argparse

from qdbcast.adversary import strategy_catalog
from qdbcast.runner import RunConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quantum-path", default="oracle")
    args = ap.parse_args()

    print(f"{'strategy':<26} {'guar':>4} {'abort':>6} {'agree':>6} {'detect':>6} {'cheats':>9}")
    for strat in strategy_catalog():
        cfg = RunConfig(trials=args.trials, master_seed=args.seed,
                        adversary=strat.label(), quantum_path=args.quantum_path)
        a = run_experiment(cfg)["aggregate"]
        print(f"{strat.label():<26} {'yes' if strat.guarantee else 'no':>4} {a['abort_rate']:>6.3f} "
              f"{a['agreement_rate']:>6.3f} {a['detectable_broadcast_rate']:>6.3f} "
              f"{a['cheat_accepted']:>4}/{a['cheat_attempts']:<4}")


if __name__ == "__main__":
    main()
