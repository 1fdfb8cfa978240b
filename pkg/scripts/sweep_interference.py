#!/usr/bin/env python3
"""Sweep the unpartitioned-contention interference factor and report how the
coco vs no-partition retainment ratio responds.  Useful for calibrating a
scenario against measured colocation numbers."""

import argparse
import dataclasses
import importlib.resources

from coco.scenario import load_scenario
from coco.sim import Policy, compare_policies


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default=None)
    parser.add_argument("--alphas", default="1,2,3,4,5,6,8",
                        help="comma-separated interference factors")
    args = parser.parse_args()

    path = args.scenario or str(
        importlib.resources.files("coco") / "data" / "reference.yaml")
    base = load_scenario(path).scenario()
    print(f"{'alpha':>6}  {'coco':>8}  {'none':>8}  {'ratio':>6}")
    for alpha in (float(a) for a in args.alphas.split(",")):
        scenario = dataclasses.replace(base, interference_alpha=alpha)
        result = compare_policies(scenario, [Policy.COCO, Policy.NO_PARTITION])
        totals = {p: m.total_retainment for p, m in result.rows}
        ratio = result.ratios[Policy.COCO]
        print(f"{alpha:6.1f}  {totals[Policy.COCO]:8.4f}  "
              f"{totals[Policy.NO_PARTITION]:8.4f}  {ratio:6.2f}")


if __name__ == "__main__":
    main()
