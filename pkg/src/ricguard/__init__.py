"""Simulated near-RT RIC pipeline: KPM collection, prompt-based intrusion
detection and secure-slicing mitigation, plus the experiment harness."""

from .bus import Alert, BusMessage, KpmIndication, MessageKind, RicBus, SliceControlAck, SliceControlReq
from .detectors import (
    DetectorConfig,
    DetectorError,
    ExternalLlmDetector,
    MockLlmDetector,
    RuleOracleDetector,
    StaticThresholdDetector,
    rule_oracle_classify,
    static_threshold_classify,
)
from .harness import (
    AccuracyResult,
    LabeledSample,
    TimelineResult,
    evaluate_detector,
    generate_dataset,
    run_timeline_experiment,
)
from .kpm import (
    QUARANTINE_SLICE,
    DetectorKind,
    KpmReport,
    Label,
    SliceConfig,
    Verdict,
    parse_report,
    serialize_report,
    validate_report,
)
from .pipeline import Pipeline, run_scenario
from .prompt import PromptTemplate, build_prompt, parse_label
from .ran_sim import CellConfig, SliceTable, UeProfile, apply_slice_control, emit_kpm_reports, schedule_tick
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"
