#!/usr/bin/env python3
"""Run the synthetic-label benchmark and print the per-model AUC table.

Usage:
    python3 scripts/run_synth_benchmark.py [--seeds 101,202,303] [--max-epochs 25]
"""

import argparse

from convres.synthbench import mean_auc, run_benchmark


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="101,202,303")
    parser.add_argument("--max-epochs", type=int, default=25)
    args = parser.parse_args()
    seeds = tuple(int(s) for s in args.seeds.split(","))

    runs, oracle = run_benchmark(seeds=seeds, max_epochs=args.max_epochs, log=print)

    print()
    print(f"{'model':<14}{'mean AUC':>10}")
    for model_type in ("logistic", "residual", "plain"):
        print(f"{model_type:<14}{mean_auc(runs, model_type):>10.4f}")
    print(f"{'oracle':<14}{oracle:>10.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
