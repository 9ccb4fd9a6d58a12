"""Classification backends behind the LLM-ID xApp.

Every backend answers the same question for one report: given the number
of active UEs and the uplink packet count, is this UE legitimate? The rule
oracle is ground truth; the others are compared against it.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import httpx
import numpy as np

from .kpm import DetectorKind, Label
from .prompt import BASE_LIMIT_PER_UE, PromptTemplate, build_prompt, parse_label

log = logging.getLogger(__name__)

API_KEY_ENV = "RICGUARD_API_KEY"


class DetectorError(RuntimeError):
    """The backend could not produce an answer (transport failure, timeout)."""


@dataclass
class DetectorConfig:
    backend: DetectorKind = DetectorKind.RULE_ORACLE
    base_limit_per_ue: int = BASE_LIMIT_PER_UE
    # StaticThreshold
    confirmations: int = 5
    threshold_pkts: Optional[int] = None
    # MockLlm
    accuracy: float = 1.0
    # ExternalLlm
    endpoint: Optional[str] = None
    model: Optional[str] = None
    timeout_ms: int = 30_000
    max_retries: int = 2
    debug_prompts: bool = False
    seed: int = 0

    def validate(self) -> List[str]:
        errs = []
        if self.base_limit_per_ue < 0:
            errs.append("detector.base_limit_per_ue must be >= 0")
        if self.confirmations < 1:
            errs.append("detector.confirmations must be >= 1")
        if not 0.0 <= self.accuracy <= 1.0:
            errs.append("detector.accuracy must be in [0, 1]")
        if self.timeout_ms <= 0:
            errs.append("detector.timeout_ms must be > 0")
        if self.max_retries < 0:
            errs.append("detector.max_retries must be >= 0")
        if self.backend is DetectorKind.EXTERNAL_LLM:
            if not self.endpoint:
                errs.append("detector.endpoint is required for ExternalLlm")
            if not self.model:
                errs.append("detector.model is required for ExternalLlm")
            if not os.environ.get(API_KEY_ENV):
                errs.append(f"environment variable {API_KEY_ENV} is required for ExternalLlm")
        return errs


@dataclass(frozen=True)
class LlmExchange:
    prompt: str
    raw_response: str
    parsed: Optional[Label]
    round_trip_ms: float


@dataclass(frozen=True)
class Decision:
    """One classification attempt. ``label`` is None when undecided."""

    label: Optional[Label]
    raw_text: Optional[str] = None
    status: str = "ok"  # ok | parse_failure | error


def rule_oracle_classify(num_ues: int, tx_pkts: int, base: int = BASE_LIMIT_PER_UE) -> Label:
    if num_ues < 1:
        raise ValueError("num_ues must be >= 1")
    return Label.MALICIOUS if tx_pkts > base * num_ues else Label.LEGITIMATE


def static_threshold_classify(exceedances: Iterable[bool], confirmations: int) -> Label:
    """Label after the last flag: Malicious iff it closes a run of ``confirmations`` exceedances."""
    if confirmations < 1:
        raise ValueError("confirmations must be >= 1")
    run = 0
    for flag in exceedances:
        run = run + 1 if flag else 0
    return Label.MALICIOUS if run >= confirmations else Label.LEGITIMATE


class RuleOracleDetector:
    kind = DetectorKind.RULE_ORACLE

    def __init__(self, base: int = BASE_LIMIT_PER_UE):
        self.base = base

    def classify(self, num_ues: int, tx_pkts: int, ue: Optional[int] = None) -> Decision:
        label = rule_oracle_classify(num_ues, tx_pkts, self.base)
        return Decision(label, label.value)


class StaticThresholdDetector:
    """Flags a UE once it has exceeded the threshold on K consecutive reports.

    With ``threshold_pkts`` unset the threshold tracks the oracle bound
    (``base * num_ues``), so K=1 reproduces the oracle exactly.
    """

    kind = DetectorKind.STATIC_THRESHOLD

    def __init__(self, confirmations: int = 5, threshold_pkts: Optional[int] = None, base: int = BASE_LIMIT_PER_UE):
        if confirmations < 1:
            raise ValueError("confirmations must be >= 1")
        self.confirmations = confirmations
        self.threshold_pkts = threshold_pkts
        self.base = base
        self._runs: Dict[Optional[int], int] = {}

    def classify(self, num_ues: int, tx_pkts: int, ue: Optional[int] = None) -> Decision:
        limit = self.threshold_pkts if self.threshold_pkts is not None else self.base * num_ues
        run = self._runs.get(ue, 0) + 1 if tx_pkts > limit else 0
        self._runs[ue] = run
        label = Label.MALICIOUS if run >= self.confirmations else Label.LEGITIMATE
        return Decision(label, label.value)

    def reset(self, ue: Optional[int] = None) -> None:
        self._runs.pop(ue, None)


class MockLlmDetector:
    """Stand-in model that agrees with the oracle on a fraction ``accuracy`` of calls.

    Wrong answers are spread evenly from a seeded random phase rather than drawn
    as independent coins, so after N calls the error count is within one of
    (1 - accuracy) * N. Independent draws would leave a ~0.005 binomial spread
    at N = 10 000, too wide for a calibration check.
    """

    kind = DetectorKind.MOCK_LLM

    def __init__(self, accuracy: float = 1.0, seed: int = 0, base: int = BASE_LIMIT_PER_UE):
        if not 0.0 <= accuracy <= 1.0:
            raise ValueError("accuracy must be in [0, 1]")
        self.accuracy = accuracy
        self.base = base
        self.phase = float(np.random.default_rng(seed).random())
        self.calls = 0

    def _wrong(self) -> bool:
        e = 1.0 - self.accuracy
        k = self.calls
        self.calls += 1
        return math.floor(self.phase + (k + 1) * e) > math.floor(self.phase + k * e)

    def classify(self, num_ues: int, tx_pkts: int, ue: Optional[int] = None) -> Decision:
        truth = rule_oracle_classify(num_ues, tx_pkts, self.base)
        if self._wrong():
            label = Label.LEGITIMATE if truth is Label.MALICIOUS else Label.MALICIOUS
        else:
            label = truth
        return Decision(label, label.value)


class ExternalLlmDetector:
    """Chat-completions client: one user message in, first choice's text out."""

    kind = DetectorKind.EXTERNAL_LLM

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        timeout_ms: int = 30_000,
        max_retries: int = 2,
        template: PromptTemplate = PromptTemplate(),
        debug: bool = False,
        client: Optional[httpx.Client] = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout_ms = timeout_ms
        self.max_retries = max_retries
        self.template = template
        self.debug = debug
        self.client = client or httpx.Client(timeout=timeout_ms / 1000.0)
        self.exchanges: List[LlmExchange] = []

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def exchange(self, num_ues: int, tx_pkts: int) -> LlmExchange:
        prompt = build_prompt(num_ues, tx_pkts, self.template)
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        last_exc: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            t0 = time.perf_counter()
            try:
                resp = self.client.post(self.endpoint, json=body, headers=self._headers())
                resp.raise_for_status()
                data = resp.json()
                text = data["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
                last_exc = exc
                log.warning("LLM request failed (attempt %d/%d): %s", attempt + 1, self.max_retries + 1, exc)
                continue
            rtt = (time.perf_counter() - t0) * 1000.0
            if self.debug:
                log.info("LLM request %s", json.dumps(body))
                log.info("LLM response %s", json.dumps(data))
            ex = LlmExchange(prompt, text, parse_label(text), rtt)
            self.exchanges.append(ex)
            return ex
        raise DetectorError(f"LLM endpoint failed after {self.max_retries + 1} attempts: {last_exc}")

    def classify(self, num_ues: int, tx_pkts: int, ue: Optional[int] = None) -> Decision:
        ex = self.exchange(num_ues, tx_pkts)
        if ex.parsed is None:
            return Decision(None, ex.raw_response, "parse_failure")
        return Decision(ex.parsed, ex.raw_response)


def make_detector(cfg: DetectorConfig):
    if cfg.backend is DetectorKind.RULE_ORACLE:
        return RuleOracleDetector(cfg.base_limit_per_ue)
    if cfg.backend is DetectorKind.STATIC_THRESHOLD:
        return StaticThresholdDetector(cfg.confirmations, cfg.threshold_pkts, cfg.base_limit_per_ue)
    if cfg.backend is DetectorKind.MOCK_LLM:
        return MockLlmDetector(cfg.accuracy, cfg.seed, cfg.base_limit_per_ue)
    return ExternalLlmDetector(
        cfg.endpoint,
        cfg.model,
        timeout_ms=cfg.timeout_ms,
        max_retries=cfg.max_retries,
        template=PromptTemplate(cfg.base_limit_per_ue),
        debug=cfg.debug_prompts,
    )
