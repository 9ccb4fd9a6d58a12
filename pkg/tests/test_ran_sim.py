import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ricguard.bus import RicBus, SliceControlReq
from ricguard.clock import VirtualClock
from ricguard.kpm import QUARANTINE_SLICE, SliceConfig, validate_report, validate_report_batch
from ricguard.ran_sim import (
    CellConfig,
    ConfigError,
    E2Node,
    IntervalTotals,
    SliceTable,
    UeProfile,
    apply_slice_control,
    default_slice_table,
    emit_kpm_reports,
    largest_remainder,
    schedule_tick,
)

CELL = CellConfig()


def profiles(*demands, attacker=None, onset=0, mult=4.0):
    return {
        i + 1: UeProfile(i + 1, d, attacker=(attacker == i + 1), attack_onset=onset if attacker == i + 1 else None,
                         attack_multiplier=mult)
        for i, d in enumerate(demands)
    }


def test_equal_split_three_ues():
    table = default_slice_table([1, 2, 3])
    alloc = schedule_tick(table, profiles(10, 10, 10), 0, CELL)
    prbs = [alloc[u].prbs for u in (1, 2, 3)]
    assert prbs == [34, 33, 33]
    for u in (1, 2, 3):
        assert alloc[u].achieved_mbps == pytest.approx(10.0, abs=0.3)


def test_proportional_share_for_greedy_ue():
    # 30 / (30 + 10 + 10) of 100 PRBs = 60, the others 20 each
    table = default_slice_table([1, 2, 3])
    alloc = schedule_tick(table, profiles(30, 10, 10), 0, CELL)
    assert [alloc[u].prbs for u in (1, 2, 3)] == [60, 20, 20]
    assert alloc[1].achieved_mbps == pytest.approx(18.0)
    assert alloc[2].achieved_mbps == pytest.approx(6.0)
    assert alloc[3].achieved_mbps == pytest.approx(6.0)


def test_quarantine_slice_gets_nothing():
    table = default_slice_table([1, 2, 3]).rebind(1, QUARANTINE_SLICE)
    alloc = schedule_tick(table, profiles(40, 10, 10), 0, CELL)
    assert alloc[1].prbs == 0 and alloc[1].achieved_mbps == 0.0
    assert alloc[2].prbs == alloc[3].prbs == 50


def test_achieved_capped_at_demand():
    table = default_slice_table([1])
    alloc = schedule_tick(table, profiles(5), 0, CELL)
    assert alloc[1].prbs == 100
    assert alloc[1].achieved_mbps == 5.0


@given(st.integers(0, 500), st.lists(st.floats(0.01, 1000), min_size=1, max_size=12))
def test_largest_remainder_is_hamilton(budget, weights):
    pairs = list(enumerate(weights))
    shares = largest_remainder(budget, pairs)
    total = sum(weights)
    assert sum(shares.values()) == budget
    for ue, w in pairs:
        q = budget * w / total
        assert math.floor(q) <= shares[ue] <= math.floor(q) + 1


@given(st.integers(0, 500), st.integers(1, 20), st.floats(0.1, 100))
def test_equal_demands_differ_by_at_most_one(budget, n, demand):
    shares = largest_remainder(budget, [(i, demand) for i in range(n)])
    assert max(shares.values()) - min(shares.values()) <= 1
    # remainder goes to lowest ids
    assert sorted(shares.values(), reverse=True) == [shares[i] for i in range(n)]


@given(st.lists(st.tuples(st.floats(0.1, 200), st.sampled_from([0, 1, 2])), min_size=1, max_size=10))
def test_conservation(ues):
    slices = (SliceConfig(0, 0, "q"), SliceConfig(1, 60, "a"), SliceConfig(2, 40, "b"))
    binding = {i: s for i, (_, s) in enumerate(ues)}
    table = SliceTable(slices, binding)
    profs = {i: UeProfile(i, d) for i, (d, _) in enumerate(ues)}
    alloc = schedule_tick(table, profs, 0, CELL)
    for s in slices:
        assert sum(a.prbs for a in alloc.values() if a.slice == s.id) <= s.prb_budget
    assert sum(a.prbs for a in alloc.values()) <= CELL.total_prbs
    assert all(a.prbs == 0 for a in alloc.values() if a.slice == 0)


def _one_interval(table, profs, start=0, interval=1000, tick=100):
    totals = {u: IntervalTotals() for u in profs}
    for t in range(start, start + interval, tick):
        for u, a in schedule_tick(table, profs, t, CELL).items():
            totals[u].add(a, tick)
    return emit_kpm_reports(totals, table, start + interval, interval, CELL)


def test_legit_ue_report_hits_312():
    reports = _one_interval(default_slice_table([1]), profiles(10))
    assert reports[0].tx_pkts == 312
    assert reports[0].num_ues == 1


def test_attacker_packet_count():
    table = default_slice_table([1, 2, 3])
    r3 = {r.ue: r for r in _one_interval(table, profiles(10, 10, 10, attacker=1, mult=3.0))}
    r4 = {r.ue: r for r in _one_interval(table, profiles(10, 10, 10, attacker=1, mult=4.0))}
    assert r3[1].tx_pkts == 936  # 3 x 312: ties the 3-UE bound
    assert r4[1].tx_pkts == 1248 > 312 * 3
    assert r4[2].tx_pkts == 312


def test_quarantined_ue_still_floods_uplink():
    table = default_slice_table([1, 2, 3]).rebind(1, QUARANTINE_SLICE)
    reports = {r.ue: r for r in _one_interval(table, profiles(10, 10, 10, attacker=1))}
    assert reports[1].tx_pkts == 1248
    assert reports[1].dl_bytes == 0 and reports[1].dl_prbs == 0
    assert reports[1].slice == QUARANTINE_SLICE
    assert reports[2].num_ues == 2


def test_reports_valid_and_within_cell():
    table = default_slice_table([1, 2, 3])
    reports = _one_interval(table, profiles(10, 10, 10))
    assert all(validate_report(r) == [] for r in reports)
    assert validate_report_batch(reports) == []
    # 10 Mbps for 1 s is 1.25 MB
    assert reports[1].dl_bytes == pytest.approx(1_237_500, rel=0.02)


@pytest.mark.parametrize("interval", [0, 1001, -5])
def test_interval_range(interval):
    with pytest.raises(ConfigError):
        emit_kpm_reports({}, default_slice_table([1]), 0, interval)


def test_apply_control_rebinds():
    table = default_slice_table([1, 2, 3])
    new, ack = apply_slice_control(table, SliceControlReq(1, QUARANTINE_SLICE))
    assert ack.success and new.binding[1] == QUARANTINE_SLICE
    assert table.binding[1] == 1  # original untouched
    alloc = schedule_tick(new, profiles(40, 10, 10, attacker=1), 0, CELL)
    assert alloc[1].achieved_mbps == 0.0
    assert alloc[2].achieved_mbps == pytest.approx(10.0)


def test_apply_control_unknown():
    table = default_slice_table([1, 2, 3])
    same, ack = apply_slice_control(table, SliceControlReq(99, QUARANTINE_SLICE))
    assert not ack.success and same is table
    _, ack = apply_slice_control(table, SliceControlReq(1, 7))
    assert not ack.success


def test_apply_control_idempotent():
    table = default_slice_table([1]).rebind(1, QUARANTINE_SLICE)
    new, ack = apply_slice_control(table, SliceControlReq(1, QUARANTINE_SLICE))
    assert ack.success and new == table


def test_slice_table_validation():
    bad = SliceTable((SliceConfig(1, 100),), {1: 1})
    assert any("quarantine" in e for e in bad.validate(100))
    bad = SliceTable((SliceConfig(0, 5), SliceConfig(1, 100)), {1: 2})
    errs = bad.validate(100)
    assert any("prb_budget 0" in e for e in errs)
    assert any("unknown slice" in e for e in errs)
    assert any("exceeds" in e for e in errs)


def test_e2node_attack_effect_and_recovery():
    clock = VirtualClock()
    bus = RicBus(clock)
    profs = list(profiles(10, 10, 10, attacker=1, onset=1000).values())
    node = E2Node(bus, CELL, default_slice_table([1, 2, 3]), profs, duration_ms=3000)
    bus.register("ctl")
    for t in range(0, 2100, 100):
        clock.advance_to(t)
        node.step(t)
    bus.publish("ctl", SliceControlReq(1, QUARANTINE_SLICE))
    clock.advance_to(2101)
    node.handle_controls(2101)
    for t in range(2200, 3000, 100):
        clock.advance_to(t)
        node.step(t)
    rate = {(r.time, r.ue): r.achieved_mbps for r in node.ticks}
    for ue in (2, 3):
        pre = rate[(900, ue)]
        assert all(rate[(t, ue)] < pre for t in range(1000, 2100, 100))
        assert rate[(2200, ue)] >= pre
    assert all(rate[(t, 1)] == 0.0 for t in range(2200, 3000, 100))


def test_rate_noise_is_seeded():
    cell = CellConfig(rate_noise=0.1)
    table = default_slice_table([1, 2])
    a = schedule_tick(table, profiles(30, 30), 0, cell, np.random.default_rng(3))
    b = schedule_tick(table, profiles(30, 30), 0, cell, np.random.default_rng(3))
    assert a == b
    assert a[1].achieved_mbps != 15.0
