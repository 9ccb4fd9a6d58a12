"""KPIMON xApp: validates KPM indications and appends them to the report store."""

from __future__ import annotations

import logging
import threading
from typing import Dict, List, Tuple

from .bus import MessageKind, RicBus
from .kpm import DEFAULT_CELL_PRBS, KpmReport, UeId, validate_report, write_reports_csv

log = logging.getLogger(__name__)


class StoreError(RuntimeError):
    pass


class ReportStore:
    """Append-only, in-memory report log.

    Positions are 1-based: after ``n`` appends the high-water mark is ``n``
    and ``fetch_since(name, k)`` returns reports ``k+1 .. n``.
    """

    def __init__(self):
        self._reports: List[KpmReport] = []
        self._index: Dict[Tuple[UeId, int], int] = {}
        self._last_ts: Dict[UeId, int] = {}
        self._consumers: Dict[str, int] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._reports)

    @property
    def high_water(self) -> int:
        return len(self._reports)

    def append(self, report: KpmReport) -> int:
        with self._lock:
            last = self._last_ts.get(report.ue)
            if last is not None and report.timestamp < last:
                raise StoreError(f"ue {report.ue}: timestamp {report.timestamp} < {last}")
            self._reports.append(report)
            pos = len(self._reports)
            self._index[(report.ue, report.timestamp)] = pos
            self._last_ts[report.ue] = report.timestamp
            return pos

    def get(self, ue: UeId, timestamp: int) -> KpmReport:
        return self._reports[self._index[(ue, timestamp)] - 1]

    def fetch_since(self, consumer: str, position: int) -> Tuple[List[KpmReport], int]:
        with self._lock:
            hw = len(self._reports)
            if position < 0 or position > hw:
                raise StoreError(f"position {position} outside [0, {hw}]")
            self._consumers[consumer] = hw
            return list(self._reports[position:hw]), hw

    def consumer_position(self, consumer: str) -> int:
        return self._consumers.get(consumer, 0)

    def reports(self) -> List[KpmReport]:
        return list(self._reports)

    def flush_csv(self, path) -> None:
        write_reports_csv(self._reports, path)


class KpimonXapp:
    name = "kpimon"

    def __init__(self, bus: RicBus, store: ReportStore, cell_prbs: int = DEFAULT_CELL_PRBS):
        self.bus = bus
        self.store = store
        self.cell_prbs = cell_prbs
        self.dropped = 0
        self.rejections: List[Tuple[KpmReport, List[str]]] = []
        bus.register(self.name)
        bus.subscribe(self.name, [MessageKind.KPM_INDICATION])

    def ingest(self, report: KpmReport):
        """Append a valid report and return its position, or None if rejected."""
        violations = validate_report(report, self.cell_prbs)
        if violations:
            self.dropped += 1
            self.rejections.append((report, violations))
            log.warning("dropped report ue=%d t=%d: %s", report.ue, report.timestamp, "; ".join(violations))
            return None
        try:
            return self.store.append(report)
        except StoreError as exc:
            self.dropped += 1
            self.rejections.append((report, [str(exc)]))
            return None

    def step(self, now: int) -> int:
        msgs = self.bus.drain(self.name, now)
        for m in msgs:
            self.ingest(m.payload.report)
        return len(msgs)
