"""Wires the E2 node, bus and the three xApps and runs them on one clock."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

from .bus import RicBus
from .clock import VirtualClock, WallClock
from .detectors import make_detector
from .kpimon import KpimonXapp, ReportStore
from .llm_id import LlmIdXapp
from .ran_sim import CellConfig, E2Node
from .scenario import Scenario
from .ss_xapp import SsXapp

log = logging.getLogger(__name__)


class Pipeline:
    """One near-RT RIC deployment driven by a scenario.

    Event loop: the clock jumps to the next scheduler tick or the next
    pending bus delivery, whichever is earlier. At each instant the E2 node
    goes first, then KPIMON, LLM-ID and the secure-slicing xApp, repeating
    until no component has work left (only relevant for zero hop latency).
    """

    def __init__(self, scenario: Scenario, detector=None, clock=None):
        scenario.check()
        self.scenario = scenario
        self.clock = clock if clock is not None else VirtualClock()
        self.bus = RicBus(self.clock, hop_latency=scenario.hop_latency_ms)
        self.store = ReportStore()
        self.e2 = E2Node(
            self.bus,
            scenario.cell,
            scenario.slice_table(),
            scenario.ues,
            tick_ms=scenario.tick_ms,
            report_interval_ms=scenario.report_interval_ms,
            seed=scenario.seed,
            duration_ms=scenario.duration_ms,
        )
        self.kpimon = KpimonXapp(self.bus, self.store, scenario.cell.total_prbs)
        self.detector = detector if detector is not None else make_detector(scenario.detector)
        self.llm_id = LlmIdXapp(self.bus, self.detector, self.store, source=scenario.llm_source)
        self.ss = SsXapp(self.bus)
        self.finished = False

    def _instant(self, t: int) -> None:
        now = self.clock.now()
        first = True
        while True:
            work = self.e2.handle_controls(now)
            if first:
                self.e2.step(t)
                first = False
            work += self.kpimon.step(now)
            work += self.llm_id.step(now)
            work += self.ss.step(now)
            if work == 0:
                break

    def run(self) -> "Pipeline":
        duration = self.scenario.duration_ms
        tick = self.scenario.tick_ms
        t = 0
        while True:
            self.clock.advance_to(t)
            self._instant(t)
            nxt = self.bus.next_delivery()
            next_tick = (t // tick + 1) * tick
            if next_tick > duration:
                if nxt is None:
                    break
                t = max(nxt, t + 1)
            else:
                t = next_tick if nxt is None else min(next_tick, max(nxt, t + 1))
        self.finished = True
        return self


def run_scenario(scenario: Scenario, detector=None, wall_clock: bool = False, speedup: float = 1.0) -> Pipeline:
    clock = WallClock(speedup) if wall_clock else VirtualClock()
    return Pipeline(scenario, detector=detector, clock=clock).run()
