#!/usr/bin/env python3
"""Run the shipped reference colocation through every policy and print the
affordable-load comparison (CSV via --csv)."""

import argparse
import importlib.resources

from coco.cli import _compare_report
from coco.scenario import load_scenario
from coco.sim import Policy, compare_policies


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default=None,
                        help="scenario file (default: packaged reference)")
    parser.add_argument("--csv", action="store_true")
    args = parser.parse_args()

    path = args.scenario or str(
        importlib.resources.files("coco") / "data" / "reference.yaml")
    loaded = load_scenario(path)
    result = compare_policies(loaded.scenario(), list(Policy))
    order = [w.spec.name for w in loaded.workloads]
    print(_compare_report(result, order, "csv" if args.csv else "table"), end="")


if __name__ == "__main__":
    main()
