"""Deterministic discrete-time colocation simulator.

Each epoch is split into fixed quanta.  A workload's achievable throughput in
a quantum is its full-allocation sustainable load divided by the slowdown at
its CLOS's effective allocation, inflated while a cache-warmup window is open
after a working-set switch and while sharing a working set.  A quantum
violates the SLO when the offered load, apportioned over the workload's
active quanta, exceeds that achievable throughput.

Policies that leave a resource axis unpartitioned (no partitioning at all,
cache-only, bandwidth-only) give concurrently active workloads a fair share
of the contended axis and multiply slowdowns by a configurable interference
factor; with the factor at its default of 1 the fair split is the whole
penalty.
"""

from __future__ import annotations

import dataclasses
import enum
import random
from dataclasses import dataclass, field

from coco.closconfig import ClosSet, default_partition
from coco.closconfig import validate as validate_clos_set
from coco.core import AllocationState, MachineSpec, WorkloadSpec, slowdown_xy
from coco.errors import InfeasibleSloError, ValidationError
from coco.scheduler import EpochPlan, admission_control, plan_epoch, round_robin_plan

AFFORDABLE_SEARCH_TOL = 0.005
VIOLATION_SLACK = 1e-9


class Policy(enum.Enum):
    COCO = "coco"
    COCO_CONFLICTING = "coco-conflicting"
    CAT_ONLY = "cat-only"
    MBA_ONLY = "mba-only"
    ROUND_ROBIN = "rr"
    NO_PARTITION = "none"

    @classmethod
    def from_name(cls, name: str) -> "Policy":
        for p in cls:
            if p.value == name:
                return p
        raise ValidationError(
            f"unknown policy {name!r}; expected one of "
            + ", ".join(p.value for p in cls))


@dataclass(frozen=True)
class WarmupParams:
    """Post-migration cache-refill penalty: window length and inflation."""

    window: int = 2
    factor: float = 1.15

    def __post_init__(self):
        if self.window < 0:
            raise ValidationError("warmup window must be >= 0")
        if self.factor < 1:
            raise ValidationError("warmup factor must be >= 1")


@dataclass(frozen=True)
class Scenario:
    machine: MachineSpec
    workloads: tuple[WorkloadSpec, ...]
    policy: Policy
    epoch_quanta: int = 20
    quantum_ms: float = 100.0
    duration: int = 10
    warmup: WarmupParams = WarmupParams()
    seed: int = 0
    clos_set: ClosSet | None = None
    interference_alpha: float = 1.0
    pairing_penalty: float = 1.05
    load_jitter: float = 0.0
    overhead_margin: float = 0.05

    def __post_init__(self):
        if not self.workloads:
            raise ValidationError("scenario needs at least one workload")
        names = [w.name for w in self.workloads]
        if len(set(names)) != len(names):
            raise ValidationError("workload names must be unique")
        if self.duration < 1:
            raise ValidationError("duration must be >= 1 epoch")
        if self.quantum_ms <= 0:
            raise ValidationError("quantum must be > 0")
        if self.epoch_quanta < 1:
            raise ValidationError("epoch_quanta must be >= 1")
        if self.interference_alpha < 1:
            raise ValidationError("interference_alpha must be >= 1")
        if self.pairing_penalty < 1:
            raise ValidationError("pairing_penalty must be >= 1")
        if not 0 <= self.load_jitter < 1:
            raise ValidationError("load_jitter must be in [0, 1)")
        if not 0 <= self.overhead_margin < 1:
            raise ValidationError("overhead_margin must be in [0, 1)")
        if self.clos_set is not None:
            if self.clos_set.machine != self.machine:
                raise ValidationError("clos_set belongs to a different machine")
            problems = validate_clos_set(self.clos_set)
            if problems:
                raise ValidationError("clos_set invalid: " + "; ".join(problems))

    def effective_clos_set(self) -> ClosSet:
        base = self.clos_set or default_partition(self.machine)
        if self.policy is Policy.COCO_CONFLICTING:
            return anti_monotone_set(base)
        return base


@dataclass(frozen=True)
class WorkloadMetrics:
    affordable_load: float
    retainment: float
    slo_violations: int
    quanta_received: int


@dataclass(frozen=True)
class SimMetrics:
    per_workload: dict[str, WorkloadMetrics]
    migrations: int
    overhead_fraction: float
    total_retainment: float

    def serialize(self) -> str:
        lines = [f"migrations={self.migrations}",
                 f"overhead_fraction={self.overhead_fraction:.10g}",
                 f"total_retainment={self.total_retainment:.10g}"]
        for name in sorted(self.per_workload):
            m = self.per_workload[name]
            lines.append(
                f"{name}: affordable={m.affordable_load:.10g} "
                f"retainment={m.retainment:.10g} violations={m.slo_violations} "
                f"quanta={m.quanta_received}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AffordableResult:
    """Outcome of the uniform load-scaling search."""

    multiplier: float
    affordable: dict[str, float]
    metrics: SimMetrics


@dataclass(frozen=True)
class CompareResult:
    rows: tuple[tuple[Policy, SimMetrics], ...]
    ratios: dict[Policy, float | None]


def anti_monotone_set(clos_set: ClosSet) -> ClosSet:
    """The conflicting configuration: widest masks get the smallest MBA."""
    lc = clos_set.lc_configs()  # width descending
    mba_sorted = sorted(c.mba_percent for c in lc)  # ascending -> widest gets least
    replacement = {c.id: m for c, m in zip(lc, mba_sorted)}
    configs = tuple(
        dataclasses.replace(c, mba_percent=replacement.get(c.id, c.mba_percent))
        for c in clos_set.configs)
    return dataclasses.replace(clos_set, configs=configs)


@dataclass(frozen=True)
class _ClosView:
    """Effective allocation a CLOS provides under the scenario's policy."""

    ways: float
    mba: float
    contended: bool


def _views(scenario: Scenario, clos_set: ClosSet,
           active_ids: list[int]) -> dict[int, _ClosView]:
    machine = scenario.machine
    n_active = max(1, len(active_ids))
    views = {}
    for clos_id in active_ids:
        cfg = clos_set.by_id(clos_id)
        if scenario.policy is Policy.CAT_ONLY:
            views[clos_id] = _ClosView(cfg.width, 100.0 / n_active, True)
        elif scenario.policy is Policy.MBA_ONLY:
            views[clos_id] = _ClosView(machine.llc_ways / n_active,
                                       float(cfg.mba_percent), True)
        else:
            views[clos_id] = _ClosView(float(cfg.width), float(cfg.mba_percent),
                                       False)
    return views


def _reference_state(scenario: Scenario, clos_set: ClosSet) -> AllocationState | None:
    lc = clos_set.lc_configs()
    smallest = min(lc, key=lambda c: (c.width, c.id))
    if scenario.policy is Policy.CAT_ONLY:
        return AllocationState(smallest.width, 100)
    if scenario.policy is Policy.MBA_ONLY:
        return AllocationState(scenario.machine.llc_ways,
                               min(c.mba_percent for c in lc))
    return None


@dataclass
class _Tally:
    violations: int = 0
    quanta: int = 0
    min_affordable: float = field(default=float("inf"))
    ideal_capacity: float = 0.0
    actual_capacity: float = 0.0


def _jitter_factors(scenario: Scenario, rng: random.Random) -> dict[str, float]:
    if scenario.load_jitter == 0:
        return {w.name: 1.0 for w in scenario.workloads}
    return {w.name: 1.0 + scenario.load_jitter * (2.0 * rng.random() - 1.0)
            for w in scenario.workloads}


def _simulate(scenario: Scenario, *, apply_admission: bool
              ) -> tuple[dict[str, _Tally], int, tuple[WorkloadSpec, ...]]:
    """Core loop shared by run_scenario and the affordable-load search."""
    tallies = {w.name: _Tally() for w in scenario.workloads}
    rng = random.Random(scenario.seed)
    total_quanta = scenario.duration * scenario.epoch_quanta
    migrations = 0

    if scenario.policy is Policy.NO_PARTITION:
        n = len(scenario.workloads)
        ways = max(1, scenario.machine.llc_ways // n)
        step = scenario.machine.mba_step
        mba = min(100, max(step, ((100 // n + step // 2) // step) * step))
        for _epoch in range(scenario.duration):
            jit = _jitter_factors(scenario, rng)
            for w in scenario.workloads:
                sd = slowdown_xy(w.profile, ways, mba) * scenario.interference_alpha
                t = tallies[w.name]
                achievable = w.sl_full / sd
                offered = w.offered_load * jit[w.name]
                violated = offered > achievable * (1.0 + VIOLATION_SLACK)
                t.violations += scenario.epoch_quanta if violated else 0
                t.quanta += scenario.epoch_quanta
                t.min_affordable = min(t.min_affordable, achievable)
                t.ideal_capacity += scenario.epoch_quanta * achievable
                t.actual_capacity += scenario.epoch_quanta * achievable
        return tallies, migrations, scenario.workloads

    clos_set = scenario.effective_clos_set()
    reference = _reference_state(scenario, clos_set)
    workloads = scenario.workloads
    rejected: tuple[WorkloadSpec, ...] = ()
    if apply_admission and scenario.policy in (Policy.COCO, Policy.COCO_CONFLICTING):
        admitted, rejected = admission_control(
            workloads, clos_set, scenario.epoch_quanta,
            overhead_margin=scenario.overhead_margin, reference_state=reference)
        workloads = admitted
        for w in rejected:
            if w.offered_load > 0:
                tallies[w.name].violations = total_quanta
    if not workloads:
        return tallies, migrations, workloads

    pairing = scenario.policy is not Policy.ROUND_ROBIN
    by_name = {w.name: w for w in workloads}
    stable_plan: EpochPlan | None = None
    if scenario.policy is not Policy.ROUND_ROBIN:
        stable_plan = plan_epoch(workloads, clos_set, scenario.epoch_quanta,
                                 reference_state=reference, pairing=pairing)
    prev_members: dict[int, tuple[str, ...]] = {}
    for epoch in range(scenario.duration):
        if scenario.policy is Policy.ROUND_ROBIN:
            plan = round_robin_plan(workloads, clos_set, scenario.epoch_quanta,
                                    epoch=epoch)
        else:
            plan = stable_plan
        assert plan is not None
        jit = _jitter_factors(scenario, rng)
        views = _views(scenario, clos_set, sorted(plan.schedule))
        for clos_id in sorted(plan.schedule):
            view = views[clos_id]
            for seg in plan.schedule[clos_id]:
                switched = (clos_id in prev_members
                            and set(prev_members[clos_id]) != set(seg.members))
                if switched:
                    migrations += 1
                for name in seg.members:
                    w = by_name[name]
                    t = tallies[name]
                    sd = slowdown_xy(w.profile, view.ways, view.mba)
                    if view.contended:
                        sd *= scenario.interference_alpha
                    if len(seg.members) == 2:
                        sd *= scenario.pairing_penalty
                    base_achievable = w.sl_full / sd
                    warm_achievable = base_achievable / scenario.warmup.factor
                    share = plan.active_quanta(name) / scenario.epoch_quanta
                    apportioned = w.offered_load * jit[name] / share
                    warm_quanta = min(scenario.warmup.window, seg.quanta) if switched else 0
                    for q in range(seg.quanta):
                        achievable = warm_achievable if q < warm_quanta else base_achievable
                        if apportioned > achievable * (1.0 + VIOLATION_SLACK):
                            t.violations += 1
                        t.quanta += 1
                        t.min_affordable = min(t.min_affordable, achievable * share)
                        t.ideal_capacity += base_achievable
                        t.actual_capacity += achievable
                prev_members[clos_id] = seg.members
    return tallies, migrations, workloads


def _overhead(tallies: dict[str, _Tally]) -> float:
    """Capacity lost to warmup windows as a fraction of nominal capacity."""
    ideal = sum(t.ideal_capacity for t in tallies.values())
    actual = sum(t.actual_capacity for t in tallies.values())
    if ideal == 0 or actual >= ideal:
        return 0.0
    return 1.0 - actual / ideal


def _metrics_from(scenario: Scenario, tallies: dict[str, _Tally],
                  migrations: int) -> SimMetrics:
    per = {}
    overhead = _overhead(tallies)
    total_ret = 0.0
    for w in scenario.workloads:
        t = tallies[w.name]
        affordable = 0.0 if t.quanta == 0 else t.min_affordable
        retainment = affordable / w.sl_full
        total_ret += retainment
        per[w.name] = WorkloadMetrics(affordable, retainment, t.violations, t.quanta)
    return SimMetrics(per, migrations, overhead, total_ret)


def run_scenario(scenario: Scenario) -> SimMetrics:
    """Simulate the scenario once at its stated offered loads.

    Per-workload ``affordable_load`` is the capacity view: the largest offered
    load the workload's worst active quantum could have served.  Admission
    control applies to the coco policies; rejected workloads receive no quanta
    and count one violation per simulated quantum.
    """
    tallies, migrations, _ = _simulate(scenario, apply_admission=True)
    return _metrics_from(scenario, tallies, migrations)


def _total_violations(scenario: Scenario, multiplier: float) -> int:
    scaled = dataclasses.replace(scenario, workloads=tuple(
        dataclasses.replace(w, offered_load=w.offered_load * multiplier)
        for w in scenario.workloads))
    tallies, _, _ = _simulate(scaled, apply_admission=False)
    return sum(t.violations for t in tallies.values())


def max_affordable_load(scenario: Scenario,
                        tol: float = AFFORDABLE_SEARCH_TOL) -> AffordableResult:
    """Largest uniform scaling of all offered loads with zero SLO violations.

    Binary search on the multiplier to relative tolerance ``tol`` (0.5%
    default).  Admission control is bypassed: the search characterizes the
    violation boundary of the full workload set.
    """
    if all(w.offered_load == 0 for w in scenario.workloads):
        raise InfeasibleSloError("all offered loads are zero; nothing to scale")
    if _total_violations(scenario, 0.0) > 0:
        raise InfeasibleSloError("SLO violations occur even at zero load")
    lo, hi = 0.0, 1.0
    while _total_violations(scenario, hi) == 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e15:
            raise InfeasibleSloError("no violation boundary found while scaling up")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _total_violations(scenario, mid) == 0:
            lo = mid
        else:
            hi = mid
    m_star = lo
    scaled = dataclasses.replace(scenario, workloads=tuple(
        dataclasses.replace(w, offered_load=w.offered_load * m_star)
        for w in scenario.workloads))
    tallies, migrations, _ = _simulate(scaled, apply_admission=False)
    affordable = {w.name: w.offered_load * m_star for w in scenario.workloads}
    per = {}
    total_ret = 0.0
    for w in scenario.workloads:
        t = tallies[w.name]
        ret = affordable[w.name] / w.sl_full
        total_ret += ret
        per[w.name] = WorkloadMetrics(affordable[w.name], ret, t.violations, t.quanta)
    metrics = SimMetrics(per, migrations, _overhead(tallies), total_ret)
    return AffordableResult(m_star, affordable, metrics)


def compare_policies(base: Scenario, policies: list[Policy]) -> CompareResult:
    """Affordable-load comparison of policies on otherwise-identical scenarios."""
    rows = []
    for policy in policies:
        scenario = dataclasses.replace(base, policy=policy)
        rows.append((policy, max_affordable_load(scenario).metrics))
    baseline = next((m.total_retainment for p, m in rows
                     if p is Policy.NO_PARTITION), None)
    ratios: dict[Policy, float | None] = {}
    for policy, metrics in rows:
        if baseline and baseline > 0:
            ratios[policy] = metrics.total_retainment / baseline
        else:
            ratios[policy] = None
    return CompareResult(tuple(rows), ratios)
