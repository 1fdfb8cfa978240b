"""Time-sharing of cache/memory-bandwidth partitions for SLO-bound workloads."""

from coco.core import (AllocationState, Dominance, MachineSpec,
                       SensitivityProfile, SloSpec, WorkloadSpec, dominance_of,
                       retainment_at, slowdown_at, weights_of)
from coco.closconfig import (ClosConfig, ClosSet, MigrationEvent, ReconfigPlan,
                             default_partition, diff, validate)
from coco.profiler import GroundTruthModel, build_profile, max_sustainable_load
from coco.scheduler import (EpochPlan, QueueState, TimeSlice, admission_control,
                            pair_compatible, plan_epoch, round_robin_plan)
from coco.sim import (Policy, Scenario, SimMetrics, WarmupParams,
                      compare_policies, max_affordable_load, run_scenario)

__all__ = [
    "AllocationState", "Dominance", "MachineSpec", "SensitivityProfile",
    "SloSpec", "WorkloadSpec", "dominance_of", "retainment_at", "slowdown_at",
    "weights_of", "ClosConfig", "ClosSet", "MigrationEvent", "ReconfigPlan",
    "default_partition", "diff", "validate", "GroundTruthModel",
    "build_profile", "max_sustainable_load", "EpochPlan", "QueueState",
    "TimeSlice", "admission_control", "pair_compatible", "plan_epoch",
    "round_robin_plan", "Policy", "Scenario", "SimMetrics", "WarmupParams",
    "compare_policies", "max_affordable_load", "run_scenario",
]

__version__ = "0.1.0"
