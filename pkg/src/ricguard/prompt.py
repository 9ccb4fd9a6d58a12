"""Few-shot classification prompt and single-word response parsing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .kpm import Label

BASE_LIMIT_PER_UE = 312

DEFAULT_TEMPLATE = (
    "PLEASE ONLY OUTPUT IN A WORD with TX Pack limits of {Limit1} for 1 UE and {Limit2} for 2 UEs, "
    "check if the following {NumUE} and {TXPackets} meet these bounds. "
    "If within bounds output Legitimate (input ≤ bounds) or Malicious (input ≥ bounds if exceeded)."
)


@dataclass(frozen=True)
class PromptTemplate:
    base_limit_per_ue: int = BASE_LIMIT_PER_UE
    text: str = DEFAULT_TEMPLATE


def build_prompt(num_ues: int, tx_pkts: int, template: PromptTemplate = PromptTemplate()) -> str:
    if num_ues < 1:
        raise ValueError("num_ues must be >= 1")
    base = template.base_limit_per_ue
    return template.text.format(Limit1=base, Limit2=base * 2, NumUE=num_ues, TXPackets=tx_pkts)


def parse_label(text: Optional[str]) -> Optional[Label]:
    """Case-insensitive keyword search; None when both or neither keyword appear."""
    if not text:
        return None
    low = text.lower()
    legit = "legitimate" in low
    mal = "malicious" in low
    if legit == mal:
        return None
    return Label.LEGITIMATE if legit else Label.MALICIOUS
