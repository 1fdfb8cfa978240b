"""Core value types: machine envelope, allocation states, sensitivity profiles.

Slowdown is the ratio of the SLO-sustaining load at full allocation to the
SLO-sustaining load at a restricted allocation state; load retainment is its
reciprocal.  Scheduling weights are slowdowns normalized to sum to one.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field

from coco.errors import ValidationError

# Monotonicity slack for profile grids: binary-searched loads wobble within
# their search tolerance, genuine violations are orders of magnitude larger.
MONOTONE_EPS = 1e-9

DOMINANCE_THETA = 1.5


class Dominance(enum.Enum):
    LLC_DOMINANT = "llc"
    MB_DOMINANT = "mb"
    BALANCED = "balanced"


@dataclass(frozen=True)
class MachineSpec:
    """Hardware envelope: LLC ways, CLOS count, MBA granularity."""

    llc_ways: int
    clos_count: int
    mba_step: int
    max_bandwidth: float = 0.0  # bytes/sec, informational
    cores: int = 16

    def __post_init__(self):
        if self.llc_ways < 1:
            raise ValidationError("llc_ways must be >= 1")
        if self.clos_count < 2:
            raise ValidationError("clos_count must be >= 2 (one CLOS is reserved)")
        if self.llc_ways < self.clos_count:
            raise ValidationError("llc_ways must be >= clos_count (each CLOS needs a way)")
        if self.mba_step < 1 or 100 % self.mba_step != 0:
            raise ValidationError("mba_step must divide 100")
        if self.cores < 1:
            raise ValidationError("cores must be >= 1")

    def mba_levels(self) -> tuple[int, ...]:
        return tuple(range(self.mba_step, 101, self.mba_step))

    def validate_state(self, state: "AllocationState") -> None:
        if not 1 <= state.llc_ways <= self.llc_ways:
            raise ValidationError(
                f"llc_ways {state.llc_ways} outside [1, {self.llc_ways}]")
        if not self.mba_step <= state.mba_percent <= 100:
            raise ValidationError(
                f"mba_percent {state.mba_percent} outside [{self.mba_step}, 100]")
        if state.mba_percent % self.mba_step != 0:
            raise ValidationError(
                f"mba_percent {state.mba_percent} not a multiple of {self.mba_step}")


@dataclass(frozen=True, order=True)
class AllocationState:
    """Resource allocation: LLC ways and MBA throttle percentage."""

    llc_ways: int
    mba_percent: int

    def __post_init__(self):
        if self.llc_ways < 1:
            raise ValidationError("llc_ways must be >= 1")
        if not 1 <= self.mba_percent <= 100:
            raise ValidationError("mba_percent must be in [1, 100]")


@dataclass(frozen=True)
class SloSpec:
    """Tail-latency objective: bound at a percentile."""

    percentile: float
    latency_bound_ms: float

    def __post_init__(self):
        if not 0.0 < self.percentile < 1.0:
            raise ValidationError("percentile must be in (0, 1)")
        if self.latency_bound_ms <= 0:
            raise ValidationError("latency_bound_ms must be > 0")


@dataclass(frozen=True)
class SensitivityProfile:
    """Rectangular grid of slowdown values over allocation states.

    ``way_levels`` and ``mba_levels`` are strictly ascending; the last level
    of each axis is the full allocation, where slowdown is exactly 1.
    ``slowdowns[i][j]`` belongs to (way_levels[i], mba_levels[j]).
    """

    way_levels: tuple[int, ...]
    mba_levels: tuple[int, ...]
    slowdowns: tuple[tuple[float, ...], ...]
    sl_full: float = 1.0

    def __post_init__(self):
        ways, mbas, grid = self.way_levels, self.mba_levels, self.slowdowns
        if not ways or not mbas:
            raise ValidationError("profile grid must be nonempty")
        if list(ways) != sorted(set(ways)) or ways[0] < 1:
            raise ValidationError("way_levels must be strictly ascending, >= 1")
        if list(mbas) != sorted(set(mbas)) or mbas[0] < 1 or mbas[-1] != 100:
            raise ValidationError("mba_levels must be strictly ascending and end at 100")
        if len(grid) != len(ways) or any(len(row) != len(mbas) for row in grid):
            raise ValidationError("slowdown grid shape does not match axis levels")
        if self.sl_full <= 0:
            raise ValidationError("sl_full must be > 0")
        if abs(grid[-1][-1] - 1.0) > 1e-12:
            raise ValidationError("slowdown at full allocation must be 1.0")
        for i, row in enumerate(grid):
            for j, s in enumerate(row):
                if s < 1.0 - 1e-12:
                    raise ValidationError(f"slowdown < 1 at grid point ({i},{j})")
                if i + 1 < len(ways) and grid[i + 1][j] > s + MONOTONE_EPS:
                    raise ValidationError("slowdown not monotone along the ways axis")
                if j + 1 < len(mbas) and row[j + 1] > s + MONOTONE_EPS:
                    raise ValidationError("slowdown not monotone along the MBA axis")

    @property
    def full_state(self) -> AllocationState:
        return AllocationState(self.way_levels[-1], self.mba_levels[-1])

    def grid(self) -> dict[AllocationState, float]:
        """Grid as a state -> slowdown mapping."""
        return {
            AllocationState(w, m): self.slowdowns[i][j]
            for i, w in enumerate(self.way_levels)
            for j, m in enumerate(self.mba_levels)
        }

    @classmethod
    def from_grid(cls, mapping: dict[AllocationState, float],
                  sl_full: float = 1.0) -> "SensitivityProfile":
        """Build from a complete rectangular state -> slowdown mapping."""
        ways = tuple(sorted({s.llc_ways for s in mapping}))
        mbas = tuple(sorted({s.mba_percent for s in mapping}))
        if len(mapping) != len(ways) * len(mbas):
            raise ValidationError("grid mapping is not a complete rectangle")
        rows = tuple(
            tuple(mapping[AllocationState(w, m)] for m in mbas) for w in ways
        )
        return cls(ways, mbas, rows, sl_full)


def _cell(levels: tuple[int, ...], x: float) -> tuple[int, float]:
    """Locate x on an ascending axis: (lower index, blend fraction), clamped."""
    if x <= levels[0]:
        return 0, 0.0
    if x >= levels[-1]:
        return len(levels) - 1, 0.0
    i = bisect.bisect_right(levels, x) - 1
    if levels[i] == x:
        return i, 0.0
    return i, (x - levels[i]) / (levels[i + 1] - levels[i])


def bilinear(way_levels: tuple[int, ...], mba_levels: tuple[int, ...],
             grid, ways: float, mba: float) -> float:
    """Bilinear interpolation on a rectangular grid, clamped to its hull."""
    i, fw = _cell(way_levels, ways)
    j, fm = _cell(mba_levels, mba)
    i2 = min(i + 1, len(way_levels) - 1)
    j2 = min(j + 1, len(mba_levels) - 1)
    top = grid[i][j] * (1 - fm) + grid[i][j2] * fm
    bot = grid[i2][j] * (1 - fm) + grid[i2][j2] * fm
    return top * (1 - fw) + bot * fw


def slowdown_xy(profile: SensitivityProfile, ways: float, mba: float) -> float:
    """Continuous slowdown lookup with bilinear interpolation.

    Queries outside the grid hull but within [1, max_ways] x (0, 100] clamp to
    the hull boundary (calibrated grids may not reach the machine minimums).
    """
    if ways < 1 - 1e-9 or ways > profile.way_levels[-1] + 1e-9:
        raise ValidationError(
            f"ways {ways} outside machine bounds [1, {profile.way_levels[-1]}]")
    if mba <= 0 or mba > 100 + 1e-9:
        raise ValidationError(f"mba {mba} outside machine bounds (0, 100]")
    return bilinear(profile.way_levels, profile.mba_levels, profile.slowdowns,
                    ways, mba)


def slowdown_at(profile: SensitivityProfile, state: AllocationState) -> float:
    """Slowdown at an allocation state (grid value or bilinear interpolation)."""
    return slowdown_xy(profile, state.llc_ways, state.mba_percent)


def retainment_at(profile: SensitivityProfile, state: AllocationState) -> float:
    """Load retainment (1/slowdown) at an allocation state; in (0, 1]."""
    return 1.0 / slowdown_at(profile, state)


def weights_of(slowdowns: list[float]) -> list[float]:
    """Scheduling weights: each slowdown normalized by the total."""
    if not slowdowns:
        raise ValidationError("weights_of requires a nonempty slowdown list")
    for s in slowdowns:
        if s < 1.0 or not math.isfinite(s):
            raise ValidationError(f"slowdown {s} must be a finite value >= 1")
    total = sum(slowdowns)
    return [s / total for s in slowdowns]


def dominance_of(profile: SensitivityProfile,
                 theta: float = DOMINANCE_THETA) -> Dominance:
    """Classify which resource axis dominates the profile's sensitivity.

    Compares the slowdown at the most-restricted cache endpoint (min ways,
    full bandwidth) against the most-restricted bandwidth endpoint (full
    cache, min MBA).
    """
    a = profile.slowdowns[0][-1]   # (min ways, 100%)
    b = profile.slowdowns[-1][0]   # (full ways, min MBA)
    if a >= theta * b:
        return Dominance.LLC_DOMINANT
    if b >= theta * a:
        return Dominance.MB_DOMINANT
    return Dominance.BALANCED


@dataclass(frozen=True)
class WorkloadSpec:
    """A latency-critical workload: SLO, sensitivity profile, offered load."""

    name: str
    slo: SloSpec
    profile: SensitivityProfile
    offered_load: float
    dominance: Dominance = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.name:
            raise ValidationError("workload name must be nonempty")
        if self.offered_load < 0:
            raise ValidationError("offered_load must be >= 0")
        if self.dominance is None:
            object.__setattr__(self, "dominance", dominance_of(self.profile))

    @property
    def sl_full(self) -> float:
        return self.profile.sl_full
