import dataclasses

import pytest

from coco.calibration import calibrated_profile, reference_machine
from coco.closconfig import ClosConfig, ClosSet, default_partition
from coco.core import AllocationState, MachineSpec, SloSpec, WorkloadSpec
from coco.errors import InfeasibleSloError
from coco.scenario import load_scenario
from coco.sim import (Policy, Scenario, WarmupParams, anti_monotone_set,
                      compare_policies, max_affordable_load, run_scenario)

from conftest import SLO, make_workload

NO_WARMUP = WarmupParams(window=0, factor=1.0)


def solo_machine():
    return MachineSpec(llc_ways=20, clos_count=2, mba_step=10)


def three_bit_set(machine, lc_mba=50):
    """Reserved CLOS on the upper ways; one 3-bit LC CLOS at the bottom."""
    return ClosSet(machine, (
        ClosConfig(0, ((1 << 17) - 1) << 3, 100 - lc_mba),
        ClosConfig(1, 0b111, lc_mba),
    ), reserved_id=0)


def single_lc_set(machine, width, lc_mba=50):
    reserved = machine.llc_ways - width
    return ClosSet(machine, (
        ClosConfig(0, ((1 << reserved) - 1) << width, 100 - lc_mba),
        ClosConfig(1, (1 << width) - 1, lc_mba),
    ), reserved_id=0)


def memcached_workload(offered=60000.0):
    return WorkloadSpec("memcached-solo", SloSpec(0.99, 1.5),
                        calibrated_profile("memcached", sl_full=120000.0),
                        offered_load=offered)


@pytest.fixture(scope="module")
def reference(reference_path):
    return load_scenario(reference_path)


class TestRunScenario:
    def test_full_allocation_no_violations(self):
        w = memcached_workload(offered=60000.0)
        s = Scenario(machine=solo_machine(), workloads=(w,),
                     policy=Policy.NO_PARTITION)
        m = run_scenario(s)
        wm = m.per_workload["memcached-solo"]
        assert wm.slo_violations == 0
        assert wm.retainment == pytest.approx(1.0)
        assert m.migrations == 0 and m.overhead_fraction == 0.0

    def test_two_equal_sharers_overloaded_violate_every_quantum(self):
        machine = solo_machine()
        cs = single_lc_set(machine, width=6)
        state = cs.by_id(1).state()
        # slowdown 2 at the CLOS -> SL_S = 500; offered 0.6 * SL_S each
        ws = tuple(make_workload(n, 2.0, state, offered=300.0, sl_full=1000.0)
                   for n in ("a", "b"))
        s = Scenario(machine=machine, workloads=ws, policy=Policy.ROUND_ROBIN,
                     clos_set=cs, warmup=NO_WARMUP, duration=4)
        m = run_scenario(s)
        for wm in m.per_workload.values():
            assert wm.quanta_received > 0
            assert wm.slo_violations == wm.quanta_received

    def test_calibrated_coco_beats_no_partition(self, reference):
        base = reference.scenario()
        coco = run_scenario(base)
        nopart = run_scenario(dataclasses.replace(base, policy=Policy.NO_PARTITION))
        assert coco.total_retainment > nopart.total_retainment

    def test_work_conservation(self, reference):
        base = reference.scenario()
        m = run_scenario(base)
        # six unpaired workloads on three LC CLOSs, every epoch fully used
        total = sum(wm.quanta_received for wm in m.per_workload.values())
        assert total == 3 * base.epoch_quanta * base.duration

    def test_rejected_workload_reported(self):
        machine = solo_machine()
        cs = single_lc_set(machine, width=6)
        state = cs.by_id(1).state()
        ws = tuple(make_workload(n, 2.0, state, offered=300.0, sl_full=1000.0)
                   for n in ("a", "b"))
        s = Scenario(machine=machine, workloads=ws, policy=Policy.COCO,
                     clos_set=cs, warmup=NO_WARMUP)
        m = run_scenario(s)
        received = [n for n, wm in m.per_workload.items() if wm.quanta_received > 0]
        rejected = [n for n, wm in m.per_workload.items() if wm.quanta_received == 0]
        assert len(received) == 1 and len(rejected) == 1
        assert m.per_workload[rejected[0]].slo_violations > 0


class TestDeterminism:
    def test_byte_identical_serialization(self, reference):
        base = reference.scenario()
        jittered = dataclasses.replace(base, load_jitter=0.2, seed=99)
        assert run_scenario(jittered).serialize() == run_scenario(jittered).serialize()

    def test_seed_ignored_without_jitter(self, reference):
        base = reference.scenario()
        a = run_scenario(dataclasses.replace(base, seed=1))
        b = run_scenario(dataclasses.replace(base, seed=2))
        assert a.serialize() == b.serialize()


class TestWarmup:
    def test_disabled_warmup_zero_overhead(self, reference):
        s = dataclasses.replace(reference.scenario(), warmup=NO_WARMUP)
        assert run_scenario(s).overhead_fraction == 0.0

    def test_window_zero_zero_overhead(self, reference):
        s = dataclasses.replace(reference.scenario(),
                                warmup=WarmupParams(window=0, factor=1.5))
        assert run_scenario(s).overhead_fraction == 0.0

    def test_default_overhead_in_band(self, reference):
        m = run_scenario(reference.scenario())
        assert 0.024 <= m.overhead_fraction <= 0.061


class TestMaxAffordableLoad:
    def test_single_workload_full_allocation(self):
        w = memcached_workload(offered=60000.0)
        s = Scenario(machine=solo_machine(), workloads=(w,),
                     policy=Policy.NO_PARTITION)
        r = max_affordable_load(s)
        assert r.affordable["memcached-solo"] == pytest.approx(120000.0, rel=0.005)

    def test_memcached_pinned_to_three_bit_clos(self):
        machine = solo_machine()
        s = Scenario(machine=machine, workloads=(memcached_workload(),),
                     policy=Policy.CAT_ONLY, clos_set=three_bit_set(machine))
        r = max_affordable_load(s)
        ret = r.metrics.per_workload["memcached-solo"].retainment
        assert ret == pytest.approx(0.80, abs=0.01)

    def test_two_equal_sharers_get_half(self):
        machine = solo_machine()
        cs = single_lc_set(machine, width=6)
        state = cs.by_id(1).state()
        ws = tuple(make_workload(n, 2.0, state, offered=100.0, sl_full=1000.0)
                   for n in ("a", "b"))
        s = Scenario(machine=machine, workloads=ws, policy=Policy.COCO,
                     clos_set=cs, warmup=NO_WARMUP)
        r = max_affordable_load(s)
        # SL_S = 500 each at slowdown 2; equal shares -> 250 each
        for name in ("a", "b"):
            assert r.affordable[name] == pytest.approx(250.0, rel=0.01)

    def test_bracketing(self, reference):
        for policy in (Policy.COCO, Policy.ROUND_ROBIN, Policy.NO_PARTITION):
            s = dataclasses.replace(reference.scenario(), policy=policy)
            r = max_affordable_load(s)
            from coco.sim import _total_violations
            assert _total_violations(s, r.multiplier) == 0
            assert _total_violations(s, r.multiplier * 1.01) >= 1

    def test_zero_offered_everywhere_rejected(self):
        w = dataclasses.replace(memcached_workload(), offered_load=0.0)
        s = Scenario(machine=solo_machine(), workloads=(w,),
                     policy=Policy.NO_PARTITION)
        with pytest.raises(InfeasibleSloError):
            max_affordable_load(s)


class TestPolicies:
    def test_anti_monotone_reverses_lc_mba(self):
        cs = default_partition(reference_machine())
        anti = anti_monotone_set(cs)
        base = {c.id: c for c in cs.configs}
        flipped = {c.id: c for c in anti.configs}
        assert flipped[1].mba_percent == 50 and flipped[3].mba_percent == 10
        assert flipped[2].mba_percent == base[2].mba_percent == 30
        assert all(flipped[i].mask == base[i].mask for i in base)

    def test_mba_only_holds_cache_at_full(self):
        # one workload, one LC CLOS at 50% MBA: mba-only leaves the cache
        # unpartitioned (full 20 ways for the sole tenant), so the memcached
        # row's pure-MBA retainment comes through
        machine = solo_machine()
        cs = single_lc_set(machine, width=3, lc_mba=60)
        s = Scenario(machine=machine, workloads=(memcached_workload(),),
                     policy=Policy.MBA_ONLY, clos_set=cs)
        r = max_affordable_load(s)
        ret = r.metrics.per_workload["memcached-solo"].retainment
        assert ret == pytest.approx(0.872, abs=0.01)

    def test_cat_only_splits_bandwidth_between_actives(self):
        # two tenants on two LC CLOSs: each effectively gets 50% bandwidth
        machine = MachineSpec(llc_ways=20, clos_count=3, mba_step=10)
        cs = ClosSet(machine, (
            ClosConfig(0, 0b11 << 18, 20),
            ClosConfig(1, (1 << 9) - 1, 40),            # 9 ways
            ClosConfig(2, ((1 << 9) - 1) << 9, 40),     # 9 ways
        ), reserved_id=0)
        state = cs.by_id(1).state()
        ws = tuple(make_workload(n, 1.0, state, offered=100.0, sl_full=1000.0)
                   for n in ("a", "b"))
        s = Scenario(machine=machine, workloads=ws, policy=Policy.CAT_ONLY,
                     clos_set=cs, warmup=NO_WARMUP, interference_alpha=2.0)
        r = max_affordable_load(s)
        # flat profile: slowdown 1 everywhere; only the interference factor bites
        for name in ("a", "b"):
            assert r.affordable[name] == pytest.approx(500.0, rel=0.01)

    def test_conflicting_strictly_worse_for_wide_clos_tenant(self):
        # a single cache+bandwidth hungry workload lands on the widest CLOS;
        # the conflicting config starves that CLOS of bandwidth
        machine = reference_machine()
        w = WorkloadSpec("mongo-solo", SloSpec(0.99, 15.0),
                         calibrated_profile("mongodb", sl_full=30000.0),
                         offered_load=15000.0)
        base = Scenario(machine=machine, workloads=(w,), policy=Policy.COCO)
        good = max_affordable_load(base)
        bad = max_affordable_load(
            dataclasses.replace(base, policy=Policy.COCO_CONFLICTING))
        assert good.metrics.total_retainment > bad.metrics.total_retainment

    def test_policy_ordering_on_reference(self, reference):
        res = compare_policies(reference.scenario(), list(Policy))
        totals = {p: m.total_retainment for p, m in res.rows}
        assert totals[Policy.COCO] >= totals[Policy.ROUND_ROBIN]
        assert totals[Policy.ROUND_ROBIN] >= totals[Policy.NO_PARTITION]
        assert totals[Policy.COCO] >= totals[Policy.CAT_ONLY]
        assert totals[Policy.COCO] >= totals[Policy.MBA_ONLY]
        assert totals[Policy.COCO] >= totals[Policy.COCO_CONFLICTING]
        assert res.ratios[Policy.COCO] >= 2.0
        assert res.ratios[Policy.NO_PARTITION] == pytest.approx(1.0)

    def test_single_policy_compare(self, reference):
        res = compare_policies(reference.scenario(), [Policy.NO_PARTITION])
        assert len(res.rows) == 1
        assert res.ratios[Policy.NO_PARTITION] == pytest.approx(1.0)


class TestPairingInSim:
    def test_paired_workloads_share_combined_window(self):
        from test_scheduler import llc_dominant_workload, mb_dominant_workload
        machine = solo_machine()
        cs = single_lc_set(machine, width=6)
        a = dataclasses.replace(llc_dominant_workload("cache-hungry"),
                                offered_load=10.0)
        b = dataclasses.replace(mb_dominant_workload("bandwidth-hungry"),
                                offered_load=10.0)
        s = Scenario(machine=machine, workloads=(a, b), policy=Policy.COCO,
                     clos_set=cs, warmup=NO_WARMUP, duration=2)
        m = run_scenario(s)
        # both run concurrently through the whole epoch
        for wm in m.per_workload.values():
            assert wm.quanta_received == s.epoch_quanta * s.duration
        assert m.migrations == 0
