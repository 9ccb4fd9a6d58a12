"""Experiment drivers: labelled datasets, detector accuracy, attack timelines."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .detectors import DetectorConfig, DetectorError, make_detector, rule_oracle_classify
from .kpm import Label, UeId
from .pipeline import Pipeline, run_scenario
from .prompt import BASE_LIMIT_PER_UE, PromptTemplate, build_prompt
from .scenario import Scenario

log = logging.getLogger(__name__)

TRACE_FORMAT_VERSION = 1


class HarnessError(ValueError):
    pass


# ---------------------------------------------------------------- datasets


@dataclass(frozen=True)
class LabeledSample:
    num_ues: int
    tx_pkts: int
    label: Label


def generate_dataset(
    n: int,
    seed: int = 0,
    ue_range: Tuple[int, int] = (1, 3),
    pkt_range: Tuple[int, int] = (0, 2000),
    template: PromptTemplate = PromptTemplate(),
) -> Tuple[List[LabeledSample], List[str]]:
    """Draw ``n`` (num_ues, tx_pkts) pairs uniformly over the inclusive ranges.

    Returns the samples and the matching instruction-tuning JSONL lines.
    """
    if n <= 0:
        raise HarnessError("n must be > 0")
    if ue_range[1] < ue_range[0] or pkt_range[1] < pkt_range[0]:
        raise HarnessError("degenerate range: max < min")
    if ue_range[0] < 1:
        raise HarnessError("ue_range must start at >= 1")
    if pkt_range[0] < 0:
        raise HarnessError("pkt_range must start at >= 0")
    rng = np.random.default_rng(seed)
    ues = rng.integers(ue_range[0], ue_range[1] + 1, size=n)
    pkts = rng.integers(pkt_range[0], pkt_range[1] + 1, size=n)
    base = template.base_limit_per_ue
    samples = [
        LabeledSample(int(u), int(p), rule_oracle_classify(int(u), int(p), base)) for u, p in zip(ues, pkts)
    ]
    lines = [
        json.dumps({"instruction": build_prompt(s.num_ues, s.tx_pkts, template), "output": s.label.value},
                   ensure_ascii=False)
        for s in samples
    ]
    return samples, lines


def write_jsonl(lines: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def write_samples_csv(samples: Sequence[LabeledSample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["num_ues", "tx_pkts", "label"])
        for s in samples:
            w.writerow([s.num_ues, s.tx_pkts, s.label.value])


def read_samples_csv(path) -> List[LabeledSample]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        try:
            return [LabeledSample(int(r["num_ues"]), int(r["tx_pkts"]), Label(r["label"])) for r in reader]
        except (KeyError, ValueError) as exc:
            raise HarnessError(f"{path}: malformed samples file ({exc})") from None


# ---------------------------------------------------------------- accuracy


@dataclass
class AccuracyResult:
    detector: str
    n_samples: int
    n_correct: int
    n_incorrect: int
    n_undecided: int
    n_detector_errors: int = 0
    aborted: bool = False
    label: str = ""

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_samples if self.n_samples else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["accuracy"] = self.accuracy
        return d


def _classify_one(detector, sample: LabeledSample):
    try:
        return detector.classify(sample.num_ues, sample.tx_pkts)
    except DetectorError:
        return None


def evaluate_detector(
    samples: Sequence[LabeledSample],
    detector,
    max_error_rate: Optional[float] = None,
    workers: int = 1,
    label: str = "",
) -> AccuracyResult:
    """Score ``detector`` against the oracle labels of ``samples``.

    ``detector`` may be a detector object or a ``DetectorConfig``. Parse
    failures and transport errors count as undecided (never correct). If
    the transport error rate exceeds ``max_error_rate`` the run stops and
    the partial tally is returned with ``aborted=True``. ``workers > 1``
    fans requests out over threads; only use it with stateless backends.
    """
    if not samples:
        raise HarnessError("dataset is empty")
    if isinstance(detector, DetectorConfig):
        detector = make_detector(detector)
    name = detector.kind.value
    correct = incorrect = undecided = errors = done = 0
    aborted = False

    def tally(decision, sample):
        nonlocal correct, incorrect, undecided, errors
        if decision is None:
            errors += 1
            undecided += 1
        elif decision.label is None:
            undecided += 1
        elif decision.label is sample.label:
            correct += 1
        else:
            incorrect += 1

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            decisions = list(pool.map(lambda s: _classify_one(detector, s), samples))
        for d, s in zip(decisions, samples):
            tally(d, s)
        done = len(samples)
        if max_error_rate is not None and errors / done > max_error_rate:
            aborted = True
    else:
        for s in samples:
            tally(_classify_one(detector, s), s)
            done += 1
            # wait for a handful of samples before judging the error rate
            if max_error_rate is not None and done >= 10 and errors / done > max_error_rate:
                aborted = True
                log.error("aborting evaluation: error rate %.3f > %.3f", errors / done, max_error_rate)
                break
    return AccuracyResult(name, done, correct, incorrect, undecided, errors, aborted, label or name)


def accuracy_table(samples: Sequence[LabeledSample], configs: Sequence[Tuple[str, DetectorConfig]]) -> List[AccuracyResult]:
    return [evaluate_detector(samples, cfg, label=name) for name, cfg in configs]


# ---------------------------------------------------------------- timelines


@dataclass
class TimelineResult:
    series: Dict[UeId, List[Tuple[int, float]]]
    attack_onset: Optional[int]
    attacker: Optional[UeId]
    detection_time: Optional[int]
    alert_time: Optional[int]
    mitigation_time: Optional[int]
    recovery_time: Optional[int]
    pipeline: Pipeline = field(repr=False)

    def events(self) -> Dict[str, Optional[int]]:
        return {
            "attack_onset": self.attack_onset,
            "detection": self.detection_time,
            "alert": self.alert_time,
            "mitigation": self.mitigation_time,
            "recovery": self.recovery_time,
        }


def _pre_onset_rates(series, onset) -> Dict[UeId, float]:
    out = {}
    for ue, pts in series.items():
        before = [v for t, v in pts if t < onset]
        if before:
            out[ue] = before[-1]
    return out


def timeline_from_pipeline(p: Pipeline) -> TimelineResult:
    series: Dict[UeId, List[Tuple[int, float]]] = {}
    for rec in p.e2.ticks:
        series.setdefault(rec.ue, []).append((rec.time, rec.achieved_mbps))
    attackers = p.scenario.attackers
    attacker = attackers[0].id if attackers else None
    onset = attackers[0].attack_onset if attackers else None
    detection = alert_time = mitigation = recovery = None
    if attacker is not None:
        first = next((a for a in p.llm_id.alerts if a.alert.ue == attacker), None)
        if first is not None:
            detection = first.alert.verdict.report_timestamp
            alert_time = first.time
        done = next((r for r in p.ss.records if r.ue == attacker and r.outcome), None)
        if done is not None:
            mitigation = done.ack_time
            baseline = _pre_onset_rates(series, onset)
            legit = [ue for ue in series if ue != attacker and ue in baseline]
            times = sorted({t for t, _ in series[attacker] if t >= mitigation})
            rates = {ue: dict(series[ue]) for ue in legit}
            for t in times:
                if all(rates[ue].get(t, -1.0) >= baseline[ue] - 1e-9 for ue in legit):
                    recovery = t
                    break
    return TimelineResult(series, onset, attacker, detection, alert_time, mitigation, recovery, p)


def run_timeline_experiment(scenario: Scenario, detector=None, wall_clock: bool = False) -> TimelineResult:
    return timeline_from_pipeline(run_scenario(scenario, detector=detector, wall_clock=wall_clock))


def timeline_csv(result: TimelineResult) -> str:
    """Plot-ready per-tick rows; ``event`` marks the first tick at or after each event."""
    p = result.pipeline
    tick_times = sorted({r.time for r in p.e2.ticks})
    marks: Dict[Tuple[int, UeId], List[str]] = {}

    def mark(ev_time, ue, name):
        if ev_time is None or ue is None:
            return
        t = next((x for x in tick_times if x >= ev_time), None)
        if t is not None:
            marks.setdefault((t, ue), []).append(name)

    for name, value in result.events().items():
        mark(value, result.attacker, name)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_ms", "ue", "slice", "prbs", "requested_mbps", "achieved_mbps", "event"])
    for r in p.e2.ticks:
        w.writerow([r.time, r.ue, r.slice, r.prbs, f"{r.requested_mbps:.4f}", f"{r.achieved_mbps:.4f}",
                    ";".join(marks.get((r.time, r.ue), []))])
    return buf.getvalue()


def run_summary(result: TimelineResult) -> dict:
    p = result.pipeline
    records = [r.to_dict() for r in p.ss.records]
    latencies = [r.latency for r in p.ss.records if r.outcome and r.latency is not None]
    labels = {lab.value: 0 for lab in Label}
    for v in p.llm_id.verdicts:
        labels[v.label.value] += 1
    return {
        "scenario": p.scenario.name,
        "seed": p.scenario.seed,
        "detector": p.detector.kind.value,
        "events": result.events(),
        "detection_delay_ms": None if result.detection_time is None else result.detection_time - result.attack_onset,
        "mitigations": records,
        "mean_detection_response_ms": (sum(latencies) / len(latencies)) if latencies else None,
        "metrics": {
            "reports_sent": p.e2.reports_sent,
            "reports_stored": len(p.store),
            "dropped_reports": p.kpimon.dropped,
            "verdicts": labels,
            "alerts": len(p.llm_id.alerts),
            "alerts_suppressed": p.llm_id.suppressed,
            "detector_errors": p.llm_id.detector_errors,
            "parse_failures": p.llm_id.parse_failures,
            "skipped_quarantined": p.llm_id.skipped_quarantined,
            "duplicate_alerts": p.ss.duplicate_alerts,
            "ack_anomalies": p.ss.anomalies,
            "bus_published": p.bus.published,
            "bus_delivered": p.bus.delivered,
        },
    }


def trace_text(p: Pipeline) -> str:
    scenario = p.scenario.to_dict()
    scenario.pop("output_dir")  # where results land is not part of the run
    header = json.dumps({"header": {"version": TRACE_FORMAT_VERSION, "scenario": scenario}},
                        sort_keys=True, separators=(",", ":"))
    return "\n".join([header, *p.bus.trace_lines()]) + "\n"


def write_run_outputs(result: TimelineResult, out_dir, figures: bool = True, flush_reports: bool = True) -> Dict[str, Path]:
    """Write timeline CSV, run summary, bus trace (and optional figure) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "timeline": out / "timeline.csv",
        "summary": out / "summary.json",
        "trace": out / "trace.jsonl",
    }
    paths["timeline"].write_text(timeline_csv(result), encoding="utf-8")
    paths["summary"].write_text(json.dumps(run_summary(result), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths["trace"].write_text(trace_text(result.pipeline), encoding="utf-8")
    if flush_reports:
        paths["reports"] = out / "kpm_reports.csv"
        result.pipeline.store.flush_csv(paths["reports"])
    if figures:
        from .plotting import plot_timeline

        paths["figure"] = out / "timeline.png"
        plot_timeline(result, paths["figure"])
    return paths
