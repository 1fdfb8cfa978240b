"""Command-line front end: profile, simulate, compare, schemata, validate.

Exit status: 0 success, 2 validation error, 3 infeasible SLO or admission
failure.  Output files are written atomically; a failing run leaves no
partial output behind.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from coco.errors import (CocoError, EpochUnderflowError, InfeasibleSloError,
                         ScenarioError, ValidationError)
from coco.profiler import build_profile
from coco.resctrl import ResctrlLayout, apply as apply_clos_set, serialize_clos_set
from coco.closconfig import default_partition
from coco.scenario import LoadedScenario, dump_profiles, load_scenario
from coco.sim import (CompareResult, Policy, SimMetrics, compare_policies,
                      max_affordable_load, run_scenario)

CSV_HEADER = "policy,workload,affordable_load,retainment,violations,migrations,overhead_fraction"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3


def _fmt(x: float) -> str:
    return format(x, ".10g")


def _write_output(path: str | None, content: str) -> None:
    if path is None:
        sys.stdout.write(content)
        return
    tmp = Path(path + ".tmp")
    tmp.write_text(content)
    os.replace(tmp, path)


def _metrics_csv_rows(policy: Policy, metrics: SimMetrics,
                      order: list[str]) -> list[str]:
    rows = []
    for name in order:
        m = metrics.per_workload[name]
        rows.append(",".join([
            policy.value, name, _fmt(m.affordable_load), _fmt(m.retainment),
            str(m.slo_violations), str(metrics.migrations),
            _fmt(metrics.overhead_fraction)]))
    return rows

def _policy_total_row(policy: Policy, metrics: SimMetrics) -> str:
    affordable = sum(m.affordable_load for m in metrics.per_workload.values())
    violations = sum(m.slo_violations for m in metrics.per_workload.values())
    return ",".join([
        policy.value, "all", _fmt(affordable), _fmt(metrics.total_retainment),
        str(violations), str(metrics.migrations), _fmt(metrics.overhead_fraction)])


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
             for r in rows]
    return "\n".join(lines) + "\n"


def _simulate_report(policy: Policy, metrics: SimMetrics, order: list[str],
                     fmt: str) -> str:
    if fmt == "csv":
        return "\n".join([CSV_HEADER] + _metrics_csv_rows(policy, metrics, order)) + "\n"
    rows = [["workload", "affordable_load", "retainment", "violations", "quanta"]]
    for name in order:
        m = metrics.per_workload[name]
        rows.append([name, _fmt(m.affordable_load), _fmt(m.retainment),
                     str(m.slo_violations), str(m.quanta_received)])
    footer = (f"policy={policy.value} migrations={metrics.migrations} "
              f"overhead_fraction={_fmt(metrics.overhead_fraction)} "
              f"total_retainment={_fmt(metrics.total_retainment)}\n")
    return _table(rows) + footer


def _compare_report(result: CompareResult, order: list[str], fmt: str) -> str:
    if fmt == "csv":
        lines = [CSV_HEADER]
        lines.extend(_policy_total_row(p, m) for p, m in result.rows)
        return "\n".join(lines) + "\n"
    rows = [["policy", "workload", "affordable_load", "retainment"]]
    for policy, metrics in result.rows:
        for name in order:
            m = metrics.per_workload[name]
            rows.append([policy.value, name, _fmt(m.affordable_load),
                         _fmt(m.retainment)])
    summary = [["policy", "total_retainment", "migrations",
                "overhead_fraction", "vs_none"]]
    for policy, metrics in result.rows:
        ratio = result.ratios.get(policy)
        summary.append([policy.value, _fmt(metrics.total_retainment),
                        str(metrics.migrations), _fmt(metrics.overhead_fraction),
                        _fmt(ratio) if ratio is not None else "-"])
    return _table(rows) + "\n" + _table(summary)


def _load(path: str, seed: int | None) -> LoadedScenario:
    loaded = load_scenario(path)
    if seed is not None:
        loaded = LoadedScenario(loaded.path, loaded.machine, loaded.workloads,
                                loaded.policies, {**loaded.sim_params, "seed": seed},
                                loaded.clos_set)
    return loaded


def _cmd_validate(args) -> int:
    loaded = _load(args.scenario, args.seed)
    print(f"{loaded.path}: ok ({len(loaded.workloads)} workloads, "
          f"{loaded.machine.clos_count} CLOSs, {loaded.machine.llc_ways} ways)")
    return EXIT_OK


def _cmd_profile(args) -> int:
    loaded = _load(args.scenario, args.seed)
    profiles = {}
    for lw in loaded.workloads:
        if lw.model is not None:
            profiles[lw.spec.name] = build_profile(lw.model, loaded.machine,
                                                   lw.spec.slo)
    if not profiles:
        raise ScenarioError(f"{loaded.path}: no workload carries a model to profile")
    _write_output(args.output, dump_profiles(profiles))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    loaded = _load(args.scenario, args.seed)
    scenario = loaded.scenario()
    metrics = run_scenario(scenario)
    order = [w.spec.name for w in loaded.workloads]
    _write_output(args.output,
                  _simulate_report(scenario.policy, metrics, order, args.format))
    return EXIT_OK


def _cmd_compare(args) -> int:
    loaded = _load(args.scenario, args.seed)
    if args.policies:
        policies = [Policy.from_name(p.strip())
                    for p in args.policies.split(",") if p.strip()]
    else:
        policies = list(loaded.policies) or list(Policy)
    result = compare_policies(loaded.scenario(), policies)
    order = [w.spec.name for w in loaded.workloads]
    _write_output(args.output, _compare_report(result, order, args.format))
    return EXIT_OK


def _cmd_schemata(args) -> int:
    loaded = _load(args.scenario, args.seed)
    clos_set = loaded.clos_set or default_partition(loaded.machine)
    sys.stdout.write(serialize_clos_set(clos_set))
    if args.apply:
        layout = ResctrlLayout.from_env(args.root)
        report = apply_clos_set(clos_set, layout)
        for g in report.groups:
            line = f"{g.group}: {g.action}"
            if g.error:
                line += f" ({g.error})"
            print(line, file=sys.stderr)
        if not report.ok:
            return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coco",
        description="Time-shared CLOS partitioning: profiling, scheduling, simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("scenario", help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="override sim seed")
        if output:
            p.add_argument("-o", "--output", default=None, help="output file")

    p = sub.add_parser("validate", help="schema-check a scenario file")
    common(p, output=False)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("profile", help="profile ground-truth models into a profile file")
    common(p)
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("simulate", help="run the scenario's policy once")
    common(p)
    p.add_argument("--format", choices=("csv", "table"), default="table")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="affordable-load comparison across policies")
    common(p)
    p.add_argument("--policies", default=None,
                   help="comma-separated policy names (default: scenario's list)")
    p.add_argument("--format", choices=("csv", "table"), default="table")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("schemata", help="print (optionally apply) the CLOS set")
    common(p, output=False)
    p.add_argument("--apply", action="store_true",
                   help="write group directories under the resctrl root")
    p.add_argument("--root", default=None,
                   help="resctrl root path (default: $RESCTRL_ROOT or /sys/fs/resctrl)")
    p.set_defaults(func=_cmd_schemata)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleSloError, EpochUnderflowError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ScenarioError, ValidationError, CocoError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
