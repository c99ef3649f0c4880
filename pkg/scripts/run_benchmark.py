#!/usr/bin/env python3
"""Run the synthetic benchmark for one setting and print a comparison
table: lag-adjusted estimator vs. principal-components baseline.

Usage:
    python3 scripts/run_benchmark.py --setting S0 --reps 20
    python3 scripts/run_benchmark.py --setting forni_p100_u4_f4 --reps 20
"""

import argparse
import sys
import time

from lagfactor import FORNI_TABLE_ROWS, forni_setting, run_benchmark, table_setting
from lagfactor.evaluate import METRIC_FIELDS


def resolve_setting(name, seed):
    if name.startswith("forni"):
        for row in FORNI_TABLE_ROWS:
            built = forni_setting(*row, seed=seed)
            if built.name == name:
                return built
        raise SystemExit(f"unknown forni setting {name!r}")
    return table_setting(name, seed=seed)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--setting", default="S0")
    parser.add_argument("--reps", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--criterion", default="pic",
                        choices=("pic", "pic_star"))
    args = parser.parse_args()

    setting = resolve_setting(args.setting, args.seed)
    print(f"setting={setting.name}  p={setting.n_series}  "
          f"T={setting.n_obs}  K={setting.n_factors}  reps={args.reps}")

    start = time.perf_counter()
    result = run_benchmark(setting, args.reps, criterion=args.criterion)
    elapsed = time.perf_counter() - start

    header = f"{'metric':<16}" + "".join(
        f"{m:>22}" for m in result.methods)
    print("-" * len(header))
    print(header)
    print("-" * len(header))
    for metric in METRIC_FIELDS:
        cells = []
        for method in result.methods:
            med = result.median(method, metric)
            std = result.std(method, metric)
            cells.append(f"{med:12.4f} ({std:6.4f})")
        print(f"{metric:<16}" + "".join(f"{c:>22}" for c in cells))
    for method in result.methods:
        frac = result.k_hat_fraction(method, setting.n_factors)
        print(f"k_hat == {setting.n_factors} [{method}]: "
              f"{100 * frac:.0f}% of reps")
    if result.failures:
        print(f"failed replications: {len(result.failures)}")
        for rep, msg in result.failures:
            print(f"  rep {rep}: {msg}")
    print(f"total {elapsed:.1f}s  ({elapsed / args.reps:.1f}s per rep)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
