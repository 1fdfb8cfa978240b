"""Measured load-retainment rows for three reference applications.

Each application has one retainment row per resource axis, measured on a
20-way / 4-CLOS machine: cache masks of 3/6/9/20 ways at full bandwidth, and
MBA throttles of 20..100% at full cache.  Combined states compose
multiplicatively under an independence assumption; a full 2D grid measured
directly always overrides this composition.
"""

from __future__ import annotations

import bisect

from coco.core import AllocationState, MachineSpec, SensitivityProfile
from coco.errors import ValidationError

CALIBRATION_WAYS = 20

# retainment (fraction of full-allocation sustainable load) per cache mask width
CAT_RETAINMENT: dict[str, dict[int, float]] = {
    "memcached": {20: 1.0, 9: 0.881, 6: 0.838, 3: 0.80},
    "nginx":     {20: 1.0, 9: 0.75,  6: 0.62,  3: 0.33},
    "mongodb":   {20: 1.0, 9: 0.583, 6: 0.373, 3: 0.26},
}

# retainment per MBA throttle percentage
MBA_RETAINMENT: dict[str, dict[int, float]] = {
    "memcached": {100: 1.0, 80: 0.914, 60: 0.872, 40: 0.82,  20: 0.784},
    "nginx":     {100: 1.0, 80: 0.93,  60: 0.901, 40: 0.873, 20: 0.811},
    "mongodb":   {100: 1.0, 80: 0.825, 60: 0.74,  40: 0.699, 20: 0.642},
}

APPS = tuple(sorted(CAT_RETAINMENT))


def _interp_row(row: dict[int, float], x: float) -> float:
    """Piecewise-linear interpolation of a retainment row, clamped at the ends."""
    levels = sorted(row)
    if x <= levels[0]:
        return row[levels[0]]
    if x >= levels[-1]:
        return row[levels[-1]]
    i = bisect.bisect_right(levels, x) - 1
    x0, x1 = levels[i], levels[i + 1]
    f = (x - x0) / (x1 - x0)
    return row[x0] * (1 - f) + row[x1] * f


def retainment_fraction(app: str, ways: float, mba: float) -> float:
    """Multiplicatively composed retainment at (ways, mba) for a known app."""
    if app not in CAT_RETAINMENT:
        raise ValidationError(f"unknown calibration app {app!r}; have {APPS}")
    return _interp_row(CAT_RETAINMENT[app], ways) * _interp_row(MBA_RETAINMENT[app], mba)


def calibrated_profile(app: str, sl_full: float = 1.0) -> SensitivityProfile:
    """Sensitivity profile for a reference app on the 20-way machine."""
    if app not in CAT_RETAINMENT:
        raise ValidationError(f"unknown calibration app {app!r}; have {APPS}")
    ways = tuple(sorted(CAT_RETAINMENT[app]))
    mbas = tuple(sorted(MBA_RETAINMENT[app]))
    rows = tuple(
        tuple(1.0 / (CAT_RETAINMENT[app][w] * MBA_RETAINMENT[app][m]) for m in mbas)
        for w in ways
    )
    return SensitivityProfile(ways, mbas, rows, sl_full)


def calibrated_capacity_fn(app: str, full_capacity: float):
    """Saturation-capacity function shaped like a reference app's rows.

    Capacity ratios to full equal the composed retainment, so a profiler run
    against this function reproduces the measured row within search tolerance.
    """
    if full_capacity <= 0:
        raise ValidationError("full_capacity must be > 0")

    def capacity(state: AllocationState) -> float:
        return full_capacity * retainment_fraction(app, state.llc_ways, state.mba_percent)

    return capacity


def reference_machine() -> MachineSpec:
    """The machine the calibration rows were measured on."""
    return MachineSpec(llc_ways=20, clos_count=4, mba_step=10,
                       max_bandwidth=204.8e9, cores=16)
