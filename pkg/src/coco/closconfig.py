"""CLOS capacity bit-masks and MBA shares: validation and reconfiguration.

Masks are contiguous bit ranges (deployable CAT hardware requires
contiguity); MBA percentages are treated as non-overlapping shares summing to
at most 100.  Reconfiguration plans flag any CLOS whose cache and bandwidth
move in opposite directions instead of rejecting them, so the conflicting
baseline can still be simulated.
"""

from __future__ import annotations

from dataclasses import dataclass

from coco.core import AllocationState, MachineSpec
from coco.errors import ValidationError

RESERVED_WAYS = 2  # background partition width on the reference machine


@dataclass(frozen=True)
class ClosConfig:
    """One CLOS: id, cache capacity bit-mask, MBA percentage."""

    id: int
    mask: int
    mba_percent: int

    @property
    def width(self) -> int:
        return self.mask.bit_count()

    def is_contiguous(self) -> bool:
        if self.mask <= 0:
            return False
        shifted = self.mask >> (self.mask & -self.mask).bit_length() - 1
        return shifted & (shifted + 1) == 0

    def state(self) -> AllocationState:
        return AllocationState(self.width, self.mba_percent)


@dataclass(frozen=True)
class ClosSet:
    """A complete CLOS configuration for one machine."""

    machine: MachineSpec
    configs: tuple[ClosConfig, ...]
    reserved_id: int = 0

    def by_id(self, clos_id: int) -> ClosConfig:
        for c in self.configs:
            if c.id == clos_id:
                return c
        raise KeyError(clos_id)

    def lc_configs(self) -> tuple[ClosConfig, ...]:
        """Latency-critical CLOSs, widest mask first (id breaks ties)."""
        lc = [c for c in self.configs if c.id != self.reserved_id]
        return tuple(sorted(lc, key=lambda c: (-c.width, c.id)))


@dataclass(frozen=True)
class MigrationEvent:
    """Per-CLOS change between two configurations."""

    clos_id: int
    delta_ways: int
    delta_mba: int
    flush_required: bool
    conflict: bool = False


@dataclass(frozen=True)
class ReconfigPlan:
    events: tuple[MigrationEvent, ...]
    valid: bool


def _largest_remainder(quotas: list[float], total: int, minimum: int) -> list[int]:
    """Round quotas to integers summing to ``total``, each >= ``minimum``."""
    base = [int(q) for q in quotas]
    fracs = sorted(range(len(quotas)), key=lambda i: (quotas[i] - base[i], -i),
                   reverse=True)
    leftover = total - sum(base)
    for k in range(leftover):
        base[fracs[k % len(base)]] += 1
    # enforce the floor by taking from the largest shares
    for i in range(len(base)):
        while base[i] < minimum:
            donor = max(range(len(base)), key=lambda j: (base[j], -j))
            if base[donor] <= minimum:
                raise ValidationError("cannot satisfy per-CLOS minimum")
            base[donor] -= 1
            base[i] += 1
    return base


def default_partition(machine: MachineSpec) -> ClosSet:
    """Reference partitioning: reserved background CLOS plus graded LC CLOSs.

    On a 20-way, 4-CLOS, step-10 machine this yields mask widths {2,3,6,9}
    and MBA shares {10,10,30,50} with CLOS0 reserved.  Other machines keep
    the same shape: the reserved CLOS takes 2 ways (less on tiny machines),
    the LC CLOSs split the remaining ways 1:2:...:(K-1) and the remaining
    bandwidth 1:3:5:... (largest-remainder rounding, every CLOS at least one
    way and one MBA step).
    """
    k = machine.clos_count
    if k > machine.llc_ways:
        raise ValidationError("more CLOSs than LLC ways")
    n_lc = k - 1
    reserved_ways = max(1, min(RESERVED_WAYS, machine.llc_ways - n_lc))
    lc_ways_total = machine.llc_ways - reserved_ways
    ratio = [i + 1 for i in range(n_lc)]
    quotas = [lc_ways_total * r / sum(ratio) for r in ratio]
    widths = [reserved_ways] + _largest_remainder(quotas, lc_ways_total, 1)

    units_total = 100 // machine.mba_step
    if units_total < k:
        raise ValidationError("mba_step too coarse for clos_count shares")
    lc_units = units_total - 1
    odd = [2 * i + 1 for i in range(n_lc)]
    mba_quotas = [lc_units * r / sum(odd) for r in odd]
    mba_units = [1] + _largest_remainder(mba_quotas, lc_units, 1)

    configs = []
    bit = 0
    for clos_id in range(k):
        w = widths[clos_id]
        mask = ((1 << w) - 1) << bit
        bit += w
        configs.append(ClosConfig(clos_id, mask, mba_units[clos_id] * machine.mba_step))
    clos_set = ClosSet(machine, tuple(configs), reserved_id=0)
    problems = validate(clos_set)
    if problems:
        raise ValidationError("; ".join(problems))
    return clos_set


def validate(clos_set: ClosSet) -> list[str]:
    """All invariant violations in the set; empty list means ok."""
    v: list[str] = []
    machine = clos_set.machine
    ids = [c.id for c in clos_set.configs]
    if len(clos_set.configs) != machine.clos_count:
        v.append(f"expected {machine.clos_count} configs, got {len(clos_set.configs)}")
    if len(set(ids)) != len(ids):
        v.append("duplicate clos ids")
    for c in clos_set.configs:
        if not 0 <= c.id < machine.clos_count:
            v.append(f"clos id out of range: clos {c.id}")
        if c.mask == 0:
            v.append(f"zero mask: clos {c.id}")
        elif not c.is_contiguous():
            v.append(f"non-contiguous mask: clos {c.id}")
        if c.mask >> machine.llc_ways:
            v.append(f"mask exceeds llc_ways: clos {c.id}")
        if not machine.mba_step <= c.mba_percent <= 100:
            v.append(f"mba out of range: clos {c.id}")
        elif c.mba_percent % machine.mba_step != 0:
            v.append(f"mba not a step multiple: clos {c.id}")
    for i, a in enumerate(clos_set.configs):
        for b in clos_set.configs[i + 1:]:
            if a.mask & b.mask:
                v.append(f"overlap: clos {a.id}, clos {b.id}")
    if clos_set.reserved_id not in ids:
        v.append(f"reserved clos {clos_set.reserved_id} not present")
    if sum(c.mba_percent for c in clos_set.configs) > 100:
        v.append("mba shares exceed 100")
    return v


def diff(old: ClosSet, new: ClosSet) -> ReconfigPlan:
    """Migration events between two valid sets on the same machine.

    A CLOS that gained or lost cache ways (or whose mask moved) must flush
    the changed ways; a plan is flagged invalid when any CLOS's ways and MBA
    move in opposite directions.
    """
    if old.machine != new.machine:
        raise ValidationError("clos sets belong to different machines")
    for label, s in (("old", old), ("new", new)):
        problems = validate(s)
        if problems:
            raise ValidationError(f"{label} set invalid: " + "; ".join(problems))
    events = []
    for c_old in sorted(old.configs, key=lambda c: c.id):
        c_new = new.by_id(c_old.id)
        if c_old.mask == c_new.mask and c_old.mba_percent == c_new.mba_percent:
            continue
        delta_ways = c_new.width - c_old.width
        delta_mba = c_new.mba_percent - c_old.mba_percent
        events.append(MigrationEvent(
            clos_id=c_old.id,
            delta_ways=delta_ways,
            delta_mba=delta_mba,
            flush_required=c_old.mask != c_new.mask,
            conflict=delta_ways * delta_mba < 0,
        ))
    return ReconfigPlan(tuple(events), valid=not any(e.conflict for e in events))
