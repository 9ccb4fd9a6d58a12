"""Simulated E2 node: one cell, slice-budgeted PRB scheduler, KPM emission.

The scheduler is intentionally naive: inside a slice, PRBs are shared in
proportion to what each UE *asks for*, with no check that the request is
reasonable. A UE that inflates its demand therefore takes resources from
its slice neighbours, which is the vulnerability the attacker exploits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .bus import KpmIndication, MessageKind, RicBus, SliceControlAck, SliceControlReq
from .kpm import QUARANTINE_SLICE, KpmReport, SliceConfig, SliceId, UeId

log = logging.getLogger(__name__)

# 10 Mbps sustained for 1 s produces 312 uplink request packets.
PKTS_PER_MBIT = 31.2
UL_REQUEST_BYTES = 64
MIN_REPORT_INTERVAL_MS = 1
MAX_REPORT_INTERVAL_MS = 1000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CellConfig:
    bandwidth_mhz: float = 20.0
    total_prbs: int = 100
    rate_per_prb: float = 0.30
    error_rate: float = 0.0
    rate_noise: float = 0.0

    def validate(self) -> List[str]:
        errs = []
        if self.total_prbs <= 0:
            errs.append("cell.total_prbs must be > 0")
        if self.rate_per_prb <= 0:
            errs.append("cell.rate_per_prb must be > 0")
        if not 0.0 <= self.error_rate <= 1.0:
            errs.append("cell.error_rate must be in [0, 1]")
        if self.rate_noise < 0:
            errs.append("cell.rate_noise must be >= 0")
        return errs


@dataclass(frozen=True)
class UeProfile:
    id: UeId
    demand_mbps: float = 10.0
    attacker: bool = False
    attack_onset: Optional[int] = None
    attack_multiplier: float = 4.0
    slice: SliceId = 1

    def requested_mbps(self, now: int) -> float:
        if self.attacker and self.attack_onset is not None and now >= self.attack_onset:
            return self.demand_mbps * self.attack_multiplier
        return self.demand_mbps

    def validate(self) -> List[str]:
        errs = []
        if self.id < 0:
            errs.append(f"ue {self.id}: id must be >= 0")
        if self.demand_mbps <= 0:
            errs.append(f"ue {self.id}: demand_mbps must be > 0")
        if self.attacker and self.attack_onset is None:
            errs.append(f"ue {self.id}: attacker requires attack_onset")
        if self.attack_multiplier <= 0:
            errs.append(f"ue {self.id}: attack_multiplier must be > 0")
        return errs


@dataclass(frozen=True)
class SliceTable:
    slices: Tuple[SliceConfig, ...]
    binding: Mapping[UeId, SliceId] = field(default_factory=dict)

    def slice(self, sid: SliceId) -> Optional[SliceConfig]:
        for s in self.slices:
            if s.id == sid:
                return s
        return None

    def members(self, sid: SliceId) -> List[UeId]:
        return sorted(ue for ue, s in self.binding.items() if s == sid)

    def active_ues(self) -> int:
        return sum(1 for s in self.binding.values() if s != QUARANTINE_SLICE)

    def validate(self, total_prbs: int) -> List[str]:
        errs = []
        ids = [s.id for s in self.slices]
        if len(ids) != len(set(ids)):
            errs.append("slice ids must be unique")
        q = self.slice(QUARANTINE_SLICE)
        if q is None:
            errs.append("quarantine slice 0 must exist")
        elif q.prb_budget != 0:
            errs.append("quarantine slice 0 must have prb_budget 0")
        for s in self.slices:
            if not 0 <= s.prb_budget <= total_prbs:
                errs.append(f"slice {s.id}: prb_budget must be in [0, {total_prbs}]")
        if sum(s.prb_budget for s in self.slices) > total_prbs:
            errs.append("sum of slice prb_budget exceeds cell total_prbs")
        for ue, sid in sorted(self.binding.items()):
            if sid not in ids:
                errs.append(f"ue {ue} bound to unknown slice {sid}")
        return errs

    def rebind(self, ue: UeId, sid: SliceId) -> "SliceTable":
        binding = dict(self.binding)
        binding[ue] = sid
        return replace(self, binding=binding)


def default_slice_table(ues: Iterable[UeId], total_prbs: int = 100) -> SliceTable:
    return SliceTable(
        slices=(SliceConfig(QUARANTINE_SLICE, 0, "quarantine"), SliceConfig(1, total_prbs, "eMBB")),
        binding={ue: 1 for ue in ues},
    )


@dataclass(frozen=True)
class Allocation:
    ue: UeId
    slice: SliceId
    prbs: int
    requested_mbps: float
    achieved_mbps: float


def largest_remainder(budget: int, weights: Sequence[Tuple[UeId, float]]) -> Dict[UeId, int]:
    """Split ``budget`` integer units proportionally to ``weights``.

    Leftover units after flooring go to the largest fractional parts, ties
    to the lowest UE id.
    """
    total = sum(w for _, w in weights)
    if budget <= 0 or total <= 0:
        return {ue: 0 for ue, _ in weights}
    quotas = [(ue, budget * w / total) for ue, w in weights]
    shares = {ue: int(math.floor(q)) for ue, q in quotas}
    left = budget - sum(shares.values())
    order = sorted(quotas, key=lambda uq: (-(uq[1] - math.floor(uq[1])), uq[0]))
    for ue, _ in order[:left]:
        shares[ue] += 1
    return shares


def schedule_tick(
    table: SliceTable,
    profiles: Mapping[UeId, UeProfile],
    now: int,
    cell: CellConfig = CellConfig(),
    rng: Optional[np.random.Generator] = None,
) -> Dict[UeId, Allocation]:
    """Allocate PRBs for the slot starting at ``now``."""
    out: Dict[UeId, Allocation] = {}
    for s in table.slices:
        members = table.members(s.id)
        if not members:
            continue
        requests = [(ue, profiles[ue].requested_mbps(now)) for ue in members]
        budget = 0 if s.id == QUARANTINE_SLICE else s.prb_budget
        shares = largest_remainder(budget, requests)
        for ue, req in requests:
            prbs = shares[ue]
            rate = prbs * cell.rate_per_prb
            if cell.rate_noise > 0 and rng is not None and prbs > 0:
                rate *= max(0.0, 1.0 + rng.normal(0.0, cell.rate_noise))
            out[ue] = Allocation(ue, s.id, prbs, req, min(rate, req))
    return out


@dataclass
class IntervalTotals:
    """Per-UE running sums over the current report interval, weighted by slot ms."""

    requested: float = 0.0
    achieved: float = 0.0
    prb_ms: int = 0

    def add(self, alloc: Allocation, slot_ms: int) -> None:
        self.requested += alloc.requested_mbps * slot_ms
        self.achieved += alloc.achieved_mbps * slot_ms
        self.prb_ms += alloc.prbs * slot_ms


def check_interval(interval: int) -> None:
    if not MIN_REPORT_INTERVAL_MS <= interval <= MAX_REPORT_INTERVAL_MS:
        raise ConfigError(
            f"report interval {interval} ms outside [{MIN_REPORT_INTERVAL_MS}, {MAX_REPORT_INTERVAL_MS}]"
        )


def emit_kpm_reports(
    totals: Mapping[UeId, IntervalTotals],
    table: SliceTable,
    now: int,
    interval: int,
    cell: CellConfig = CellConfig(),
    rng: Optional[np.random.Generator] = None,
) -> List[KpmReport]:
    """Turn one interval's accumulated traffic into one report per UE.

    ``tx_pkts`` counts uplink resource requests, so it follows the
    requested (not granted) rate; a quarantined attacker keeps flooding
    the uplink while its downlink counters drop to zero.
    """
    check_interval(interval)
    num_ues = max(1, table.active_ues())
    reports = []
    for ue in sorted(totals):
        t = totals[ue]
        tx_pkts = int(round(t.requested * PKTS_PER_MBIT / 1000.0))
        achieved_mbit = t.achieved / 1000.0
        rx_pkts = int(round(achieved_mbit * PKTS_PER_MBIT))
        if rng is not None and cell.error_rate > 0:
            tx_err = int(rng.binomial(tx_pkts, cell.error_rate))
            ul_err = int(rng.binomial(rx_pkts, cell.error_rate))
        else:
            tx_err = ul_err = 0
        reports.append(
            KpmReport(
                timestamp=now,
                ue=ue,
                slice=table.binding.get(ue, QUARANTINE_SLICE),
                dl_bytes=int(round(achieved_mbit * 125_000)),
                ul_bytes=tx_pkts * UL_REQUEST_BYTES,
                dl_prbs=t.prb_ms // interval,
                ul_prbs=0,
                tx_pkts=tx_pkts,
                rx_pkts=rx_pkts,
                tx_errors=tx_err,
                ul_errors=ul_err,
                num_ues=num_ues,
            )
        )
    return reports


def apply_slice_control(table: SliceTable, req: SliceControlReq) -> Tuple[SliceTable, SliceControlAck]:
    if req.ue not in table.binding or table.slice(req.target_slice) is None:
        return table, SliceControlAck(req.ue, False)
    if table.binding[req.ue] == req.target_slice:
        return table, SliceControlAck(req.ue, True)
    return table.rebind(req.ue, req.target_slice), SliceControlAck(req.ue, True)


@dataclass(frozen=True)
class TickRecord:
    time: int
    ue: UeId
    slice: SliceId
    prbs: int
    requested_mbps: float
    achieved_mbps: float


class E2Node:
    """Base station stand-in that owns the slice table and drives the cell.

    Per instant ``step(now)`` runs, in order: apply delivered control
    requests (taking effect from the next slot), close the report interval
    if ``now`` is a boundary, then schedule the slot that starts at ``now``.
    """

    name = "e2node"

    def __init__(
        self,
        bus: RicBus,
        cell: CellConfig,
        table: SliceTable,
        profiles: Iterable[UeProfile],
        tick_ms: int = 100,
        report_interval_ms: int = 1000,
        seed: int = 0,
        duration_ms: Optional[int] = None,
    ):
        check_interval(report_interval_ms)
        if tick_ms <= 0 or report_interval_ms % tick_ms:
            raise ConfigError("report interval must be a positive multiple of tick_ms")
        self.bus = bus
        self.cell = cell
        self.table = table
        self.profiles = {p.id: p for p in profiles}
        self.tick_ms = tick_ms
        self.interval = report_interval_ms
        self.duration = duration_ms
        self.rng = np.random.default_rng(seed)
        self.totals: Dict[UeId, IntervalTotals] = {ue: IntervalTotals() for ue in sorted(self.profiles)}
        self.ticks: List[TickRecord] = []
        self.control_log: List[Tuple[int, SliceControlReq, SliceControlAck]] = []
        self.reports_sent = 0
        bus.register(self.name)
        bus.subscribe(self.name, [MessageKind.SLICE_CONTROL_REQ])

    def handle_controls(self, now: int) -> int:
        msgs = self.bus.drain(self.name, now)
        for m in msgs:
            self.table, ack = apply_slice_control(self.table, m.payload)
            self.control_log.append((now, m.payload, ack))
            log.debug("t=%d control %s -> %s", now, m.payload, ack.success)
            self.bus.publish(self.name, ack)
        return len(msgs)

    def step(self, now: int) -> None:
        if now > 0 and now % self.interval == 0:
            for r in emit_kpm_reports(self.totals, self.table, now, self.interval, self.cell, self.rng):
                self.bus.publish(self.name, KpmIndication(r))
                self.reports_sent += 1
            self.totals = {ue: IntervalTotals() for ue in sorted(self.profiles)}
        if now % self.tick_ms == 0 and (self.duration is None or now < self.duration):
            allocs = schedule_tick(self.table, self.profiles, now, self.cell, self.rng)
            for ue in sorted(allocs):
                a = allocs[ue]
                self.totals[ue].add(a, self.tick_ms)
                self.ticks.append(TickRecord(now, ue, a.slice, a.prbs, a.requested_mbps, a.achieved_mbps))
