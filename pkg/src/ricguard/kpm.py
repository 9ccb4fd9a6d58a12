"""Shared KPM telemetry types and the on-disk CSV format for reports."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

UeId = int
SliceId = int

QUARANTINE_SLICE: SliceId = 0
DEFAULT_CELL_PRBS = 100

CSV_COLUMNS = (
    "timestamp",
    "ue",
    "slice",
    "dl_bytes",
    "ul_bytes",
    "dl_prbs",
    "ul_prbs",
    "tx_pkts",
    "rx_pkts",
    "tx_errors",
    "ul_errors",
    "num_ues",
)


class ReportParseError(ValueError):
    """A CSV row could not be turned into a KpmReport."""

    def __init__(self, column: str, message: str):
        super().__init__(f"{column}: {message}")
        self.column = column


class Label(str, enum.Enum):
    LEGITIMATE = "Legitimate"
    MALICIOUS = "Malicious"


class DetectorKind(str, enum.Enum):
    RULE_ORACLE = "RuleOracle"
    STATIC_THRESHOLD = "StaticThreshold"
    EXTERNAL_LLM = "ExternalLlm"
    MOCK_LLM = "MockLlm"


@dataclass(frozen=True)
class KpmReport:
    """One per-UE KPI snapshot covering a single report interval.

    All counters are per-interval deltas. ``timestamp`` is the virtual
    millisecond at which the interval closed.
    """

    timestamp: int
    ue: UeId
    slice: SliceId
    dl_bytes: int
    ul_bytes: int
    dl_prbs: int
    ul_prbs: int
    tx_pkts: int
    rx_pkts: int
    tx_errors: int
    ul_errors: int
    num_ues: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "KpmReport":
        return cls(**{f.name: int(data[f.name]) for f in fields(cls)})


@dataclass(frozen=True)
class Verdict:
    ue: UeId
    report_timestamp: int
    label: Label
    detector: DetectorKind
    raw_text: Optional[str] = None
    decision_latency: int = 0

    def to_dict(self) -> dict:
        return {
            "ue": self.ue,
            "report_timestamp": self.report_timestamp,
            "label": self.label.value,
            "detector": self.detector.value,
            "raw_text": self.raw_text,
            "decision_latency": self.decision_latency,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Verdict":
        return cls(
            ue=int(data["ue"]),
            report_timestamp=int(data["report_timestamp"]),
            label=Label(data["label"]),
            detector=DetectorKind(data["detector"]),
            raw_text=data.get("raw_text"),
            decision_latency=int(data.get("decision_latency", 0)),
        )


@dataclass(frozen=True)
class SliceConfig:
    id: SliceId
    prb_budget: int
    name: str = ""


def validate_report(report: KpmReport, cell_prbs: int = DEFAULT_CELL_PRBS) -> List[str]:
    """Return every invariant ``report`` violates; an empty list means valid."""
    violations = []
    for name in CSV_COLUMNS:
        if getattr(report, name) < 0:
            violations.append(f"{name} >= 0")
    if report.tx_errors > report.tx_pkts:
        violations.append("tx_errors <= tx_pkts")
    if report.ul_errors > report.rx_pkts:
        violations.append("ul_errors <= rx_pkts")
    if report.num_ues < 1:
        violations.append("num_ues >= 1")
    if report.dl_prbs + report.ul_prbs > cell_prbs:
        violations.append("PRB budget exceeded")
    return violations


def validate_report_batch(reports: Sequence[KpmReport], cell_prbs: int = DEFAULT_CELL_PRBS) -> List[str]:
    """Check the cross-report PRB invariant for reports sharing a timestamp."""
    violations = []
    by_time: dict = {}
    for r in reports:
        by_time[r.timestamp] = by_time.get(r.timestamp, 0) + r.dl_prbs + r.ul_prbs
    for ts, used in sorted(by_time.items()):
        if used > cell_prbs:
            violations.append(f"PRB budget exceeded at t={ts}: {used} > {cell_prbs}")
    return violations


def serialize_report(report: KpmReport) -> str:
    return ",".join(str(getattr(report, name)) for name in CSV_COLUMNS)


def parse_report(row) -> KpmReport:
    """Parse a CSV row (string or list of cells) in ``CSV_COLUMNS`` order."""
    if isinstance(row, str):
        row = row.strip()
        if not row:
            raise ReportParseError("row", "empty row")
        cells = next(csv.reader([row]))
    else:
        cells = list(row)
    if not cells or all(c.strip() == "" for c in cells):
        raise ReportParseError("row", "empty row")
    if len(cells) != len(CSV_COLUMNS):
        missing = CSV_COLUMNS[len(cells)] if len(cells) < len(CSV_COLUMNS) else "row"
        raise ReportParseError(missing, f"expected {len(CSV_COLUMNS)} columns, got {len(cells)}")
    values = {}
    for name, cell in zip(CSV_COLUMNS, cells):
        try:
            values[name] = int(cell.strip())
        except ValueError:
            raise ReportParseError(name, f"not an integer: {cell!r}") from None
    return KpmReport(**values)


def write_reports_csv(reports: Iterable[KpmReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in reports:
            fh.write(serialize_report(r) + "\n")


def read_reports_csv(path) -> List[KpmReport]:
    text = Path(path).read_text(encoding="utf-8")
    return reports_from_csv_text(text)


def reports_from_csv_text(text: str) -> List[KpmReport]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise ReportParseError("header", f"expected header {','.join(CSV_COLUMNS)}")
    return [parse_report(cells) for cells in reader if cells]
