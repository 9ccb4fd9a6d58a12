"""Experiment description files (TOML) and their validation."""

from __future__ import annotations

import copy
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .detectors import DetectorConfig
from .kpm import DetectorKind, SliceConfig
from .ran_sim import MAX_REPORT_INTERVAL_MS, MIN_REPORT_INTERVAL_MS, CellConfig, SliceTable, UeProfile


class ScenarioError(ValueError):
    def __init__(self, problems: List[str]):
        super().__init__("invalid scenario:\n  " + "\n  ".join(problems))
        self.problems = problems


DETECTOR_ALIASES = {
    "oracle": DetectorKind.RULE_ORACLE,
    "rule": DetectorKind.RULE_ORACLE,
    "ruleoracle": DetectorKind.RULE_ORACLE,
    "static": DetectorKind.STATIC_THRESHOLD,
    "staticthreshold": DetectorKind.STATIC_THRESHOLD,
    "llm": DetectorKind.EXTERNAL_LLM,
    "external": DetectorKind.EXTERNAL_LLM,
    "externalllm": DetectorKind.EXTERNAL_LLM,
    "mock": DetectorKind.MOCK_LLM,
    "mockllm": DetectorKind.MOCK_LLM,
}


def parse_detector_kind(value: str) -> DetectorKind:
    key = str(value).replace("_", "").replace("-", "").lower()
    try:
        return DETECTOR_ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown detector {value!r} (choose from oracle, static, llm, mock)") from None


@dataclass
class Scenario:
    name: str = "scenario"
    cell: CellConfig = field(default_factory=CellConfig)
    slices: List[SliceConfig] = field(default_factory=list)
    ues: List[UeProfile] = field(default_factory=list)
    report_interval_ms: int = 1000
    tick_ms: int = 100
    duration_ms: int = 400_000
    hop_latency_ms: int = 1
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    llm_source: str = "store"
    seed: int = 0
    output_dir: str = "out"

    def slice_table(self) -> SliceTable:
        return SliceTable(tuple(self.slices), {u.id: u.slice for u in self.ues})

    @property
    def attackers(self) -> List[UeProfile]:
        return [u for u in self.ues if u.attacker]

    def validate(self) -> List[str]:
        errs = list(self.cell.validate())
        if not MIN_REPORT_INTERVAL_MS <= self.report_interval_ms <= MAX_REPORT_INTERVAL_MS:
            errs.append(f"report_interval_ms must be in [{MIN_REPORT_INTERVAL_MS}, {MAX_REPORT_INTERVAL_MS}]")
        if self.tick_ms <= 0:
            errs.append("tick_ms must be > 0")
        elif self.report_interval_ms % self.tick_ms:
            errs.append("report_interval_ms must be a multiple of tick_ms")
        if self.duration_ms <= 0:
            errs.append("duration_ms must be > 0")
        if self.hop_latency_ms < 0:
            errs.append("hop_latency_ms must be >= 0")
        if self.llm_source not in ("store", "bus"):
            errs.append("llm_source must be 'store' or 'bus'")
        if not self.ues:
            errs.append("ues: at least one UE is required")
        ids = [u.id for u in self.ues]
        if len(ids) != len(set(ids)):
            errs.append("ues: ids must be unique")
        for u in self.ues:
            errs.extend(f"ues: {e}" for e in u.validate())
            if u.attacker and u.attack_onset is not None and u.attack_onset > self.duration_ms:
                errs.append(f"ues: ue {u.id} attack_onset exceeds duration_ms")
        errs.extend(f"slices: {e}" for e in self.slice_table().validate(self.cell.total_prbs))
        errs.extend(self.detector.validate())
        return errs

    def check(self) -> "Scenario":
        errs = self.validate()
        if errs:
            raise ScenarioError(errs)
        return self

    def to_dict(self) -> Dict[str, Any]:
        det = asdict(self.detector)
        det["backend"] = self.detector.backend.value
        return {
            "name": self.name,
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "report_interval_ms": self.report_interval_ms,
            "tick_ms": self.tick_ms,
            "hop_latency_ms": self.hop_latency_ms,
            "llm_source": self.llm_source,
            "output_dir": self.output_dir,
            "cell": asdict(self.cell),
            "slices": [asdict(s) for s in self.slices],
            "ues": [asdict(u) for u in self.ues],
            "detector": det,
        }


def _build(cls, data: Dict[str, Any], section: str, problems: List[str]):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    for key in unknown:
        problems.append(f"{section}.{key}: unknown field")
    for f in fields(cls):
        if f.name not in data or not isinstance(f.default, (bool, int, float, str)):
            continue
        value, want = data[f.name], type(f.default)
        ok = isinstance(value, want) and not (want is int and isinstance(value, bool))
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            ok = True
        if not ok:
            problems.append(f"{section}.{f.name}: expected {want.__name__}, got {value!r}")
    try:
        return cls(**{k: v for k, v in data.items() if k in known})
    except TypeError as exc:
        problems.append(f"{section}: {exc}")
        return None


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    data = copy.deepcopy(data)
    problems: List[str] = []
    cell = _build(CellConfig, data.pop("cell", {}), "cell", problems)
    slices = [_build(SliceConfig, s, f"slices[{i}]", problems) for i, s in enumerate(data.pop("slices", []))]
    ues = [_build(UeProfile, u, f"ues[{i}]", problems) for i, u in enumerate(data.pop("ues", []))]
    det_data = data.pop("detector", {})
    if "backend" in det_data:
        try:
            det_data["backend"] = parse_detector_kind(det_data["backend"])
        except ValueError as exc:
            problems.append(f"detector.backend: {exc}")
            det_data.pop("backend")
    detector = _build(DetectorConfig, det_data, "detector", problems)
    scenario = _build(Scenario, data, "scenario", problems)
    if problems:
        raise ScenarioError(problems)
    return replace(scenario, cell=cell, slices=slices, ues=ues, detector=detector)


def builtin_scenarios() -> List[str]:
    root = resources.files("ricguard") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_scenario(ref) -> Scenario:
    """Load a scenario by file path or by built-in name (e.g. ``paper_default``)."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        res = resources.files("ricguard") / "scenarios" / f"{ref}.toml"
        if not res.is_file():
            raise ScenarioError([f"scenario {ref!r} is neither a file nor a built-in ({', '.join(builtin_scenarios())})"])
        text = res.read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"{ref}: {exc}"]) from None
    return scenario_from_dict(data)


def apply_overrides(
    scenario: Scenario,
    detector: Optional[str] = None,
    confirmations: Optional[int] = None,
    accuracy: Optional[float] = None,
    seed: Optional[int] = None,
    duration: Optional[int] = None,
    out: Optional[str] = None,
    endpoint: Optional[str] = None,
    model: Optional[str] = None,
    debug_prompts: bool = False,
) -> Scenario:
    """Return a copy with CLI flag values written into the matching fields."""
    det = replace(scenario.detector)
    if detector is not None:
        det.backend = parse_detector_kind(detector)
    if confirmations is not None:
        det.confirmations = confirmations
    if accuracy is not None:
        det.accuracy = accuracy
    if endpoint is not None:
        det.endpoint = endpoint
    if model is not None:
        det.model = model
    if debug_prompts:
        det.debug_prompts = True
    out_sc = replace(scenario, detector=det)
    if seed is not None:
        out_sc.seed = seed
    if duration is not None:
        out_sc.duration_ms = duration
    if out is not None:
        out_sc.output_dir = out
    return out_sc
