"""LLM-ID xApp: classify each KPM report and alert on malicious UEs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Set

from .bus import Alert, MessageKind, RicBus
from .detectors import DetectorError
from .kpm import QUARANTINE_SLICE, KpmReport, Label, UeId, Verdict
from .kpimon import ReportStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlertEvent:
    time: int
    alert: Alert


class LlmIdXapp:
    """Per-report intrusion classifier.

    Reports come either from the KPIMON store (``source="store"``, the
    default) or straight off the bus (``source="bus"``). An Alert is raised
    at most once per UE until a SliceControlAck for that UE is seen.
    Reports from UEs already in the quarantine slice are not classified.
    """

    name = "llm_id"

    def __init__(
        self,
        bus: RicBus,
        detector,
        store: Optional[ReportStore] = None,
        source: str = "store",
        undecided_label: Label = Label.LEGITIMATE,
    ):
        if source not in ("store", "bus"):
            raise ValueError("source must be 'store' or 'bus'")
        if source == "store" and store is None:
            raise ValueError("store source requires a ReportStore")
        self.bus = bus
        self.detector = detector
        self.store = store
        self.source = source
        self.undecided_label = undecided_label
        self.position = 0
        self.pending: Set[UeId] = set()
        self.verdicts: List[Verdict] = []
        self.alerts: List[AlertEvent] = []
        self.suppressed = 0
        self.detector_errors = 0
        self.parse_failures = 0
        self.skipped_quarantined = 0
        bus.register(self.name)
        kinds = [MessageKind.SLICE_CONTROL_ACK]
        if source == "bus":
            kinds.append(MessageKind.KPM_INDICATION)
        bus.subscribe(self.name, kinds)

    @property
    def undecided(self) -> int:
        return self.detector_errors + self.parse_failures

    def process_report(self, report: KpmReport, now: Optional[int] = None) -> Optional[Alert]:
        if now is None:
            now = self.bus.clock.now()
        if report.slice == QUARANTINE_SLICE:
            self.skipped_quarantined += 1
            return None
        try:
            decision = self.detector.classify(report.num_ues, report.tx_pkts, report.ue)
        except DetectorError as exc:
            self.detector_errors += 1
            log.error("detector error on ue=%d t=%d: %s", report.ue, report.timestamp, exc)
            return None
        label = decision.label
        if label is None:
            self.parse_failures += 1
            label = self.undecided_label
        latency = max(0, self.bus.clock.now() - now)
        verdict = Verdict(report.ue, report.timestamp, label, self.detector.kind, decision.raw_text, latency)
        self.verdicts.append(verdict)
        if label is not Label.MALICIOUS:
            return None
        if report.ue in self.pending:
            self.suppressed += 1
            return None
        alert = Alert(report.ue, verdict)
        self.pending.add(report.ue)
        self.bus.publish(self.name, alert)
        self.alerts.append(AlertEvent(self.bus.clock.now(), alert))
        log.info("t=%d alert ue=%d (report t=%d, tx_pkts=%d, num_ues=%d)",
                 now, report.ue, report.timestamp, report.tx_pkts, report.num_ues)
        return alert

    def step(self, now: int) -> int:
        handled = 0
        reports: List[KpmReport] = []
        for m in self.bus.drain(self.name, now):
            handled += 1
            if m.kind is MessageKind.SLICE_CONTROL_ACK:
                self.pending.discard(m.payload.ue)
            else:
                reports.append(m.payload.report)
        if self.source == "store":
            fetched, self.position = self.store.fetch_since(self.name, self.position)
            reports.extend(fetched)
        for r in reports:
            self.process_report(r, now)
        return handled + (len(reports) if self.source == "store" else 0)
