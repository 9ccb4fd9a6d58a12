"""Secure-slicing xApp: turn Alerts into quarantine rebinds and track outcomes."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Set

from .bus import Alert, BusMessage, MessageKind, RicBus, SliceControlAck, SliceControlReq
from .kpm import QUARANTINE_SLICE, UeId

log = logging.getLogger(__name__)


@dataclass
class MitigationRecord:
    """One quarantine attempt, with every timestamp on the bus clock.

    ``report_received`` is when the triggering report reached the detector;
    the detection-and-response latency runs from there to ``ack_time``.
    """

    ue: UeId
    report_timestamp: int
    report_received: int
    verdict_time: int
    alert_time: int
    control_sent: int
    ack_time: Optional[int] = None
    outcome: Optional[bool] = None
    duplicates: int = 0

    @property
    def latency(self) -> Optional[int]:
        if self.ack_time is None:
            return None
        return self.ack_time - self.report_received

    def latency_breakdown(self) -> Dict[str, Optional[int]]:
        return {
            "receipt_to_verdict": self.verdict_time - self.report_received,
            "verdict_to_control": self.control_sent - self.verdict_time,
            "control_to_ack": None if self.ack_time is None else self.ack_time - self.control_sent,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["latency"] = self.latency
        d["latency_breakdown"] = self.latency_breakdown()
        return d


class SsXapp:
    name = "ss_xapp"

    def __init__(self, bus: RicBus, quarantine_slice: int = QUARANTINE_SLICE):
        self.bus = bus
        self.quarantine_slice = quarantine_slice
        self.open: Dict[UeId, MitigationRecord] = {}
        self.records: List[MitigationRecord] = []
        self.quarantined: Set[UeId] = set()
        self.duplicate_alerts = 0
        self.anomalies = 0
        bus.register(self.name)
        bus.subscribe(self.name, [MessageKind.ALERT, MessageKind.SLICE_CONTROL_ACK])

    def handle_alert(self, msg: BusMessage, now: int) -> Optional[SliceControlReq]:
        alert: Alert = msg.payload
        ue = alert.ue
        if ue in self.open or ue in self.quarantined:
            self.duplicate_alerts += 1
            target = self.open.get(ue)
            if target is None:
                target = next((r for r in reversed(self.records) if r.ue == ue and r.outcome), None)
            if target is not None:
                target.duplicates += 1
            return None
        req = SliceControlReq(ue, self.quarantine_slice)
        self.bus.publish(self.name, req)
        verdict = alert.verdict
        rec = MitigationRecord(
            ue=ue,
            report_timestamp=verdict.report_timestamp,
            report_received=msg.sent_at - verdict.decision_latency,
            verdict_time=msg.sent_at,
            alert_time=now,
            control_sent=self.bus.clock.now(),
        )
        self.open[ue] = rec
        self.records.append(rec)
        return req

    def handle_ack(self, ack: SliceControlAck, now: int) -> Optional[MitigationRecord]:
        rec = self.open.pop(ack.ue, None)
        if rec is None:
            self.anomalies += 1
            log.warning("t=%d unmatched slice-control ack for ue=%d", now, ack.ue)
            return None
        rec.ack_time = now
        rec.outcome = ack.success
        if ack.success:
            self.quarantined.add(ack.ue)
        log.info("t=%d mitigation ue=%d success=%s latency=%s ms", now, ack.ue, ack.success, rec.latency)
        return rec

    def step(self, now: int) -> int:
        msgs = self.bus.drain(self.name, now)
        for m in msgs:
            if m.kind is MessageKind.ALERT:
                self.handle_alert(m, now)
            else:
                self.handle_ack(m.payload, now)
        return len(msgs)

    @property
    def successful(self) -> List[MitigationRecord]:
        return [r for r in self.records if r.outcome]
