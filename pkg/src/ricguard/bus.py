"""In-process message router connecting the E2 node and the xApps.

Delivery is pull-based: ``publish`` stamps a message and queues it for each
subscriber with ``deliver_at = sent_at + hop_latency``; ``drain`` hands a
component everything whose delivery time has been reached on the bus clock.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Set, Union

from .clock import VirtualClock
from .kpm import KpmReport, SliceId, UeId, Verdict


class BusError(RuntimeError):
    pass


class MessageKind(str, enum.Enum):
    KPM_INDICATION = "KpmIndication"
    ALERT = "Alert"
    SLICE_CONTROL_REQ = "SliceControlReq"
    SLICE_CONTROL_ACK = "SliceControlAck"


@dataclass(frozen=True)
class KpmIndication:
    report: KpmReport
    kind = MessageKind.KPM_INDICATION


@dataclass(frozen=True)
class Alert:
    ue: UeId
    verdict: Verdict
    kind = MessageKind.ALERT


@dataclass(frozen=True)
class SliceControlReq:
    ue: UeId
    target_slice: SliceId
    kind = MessageKind.SLICE_CONTROL_REQ


@dataclass(frozen=True)
class SliceControlAck:
    ue: UeId
    success: bool
    kind = MessageKind.SLICE_CONTROL_ACK


Payload = Union[KpmIndication, Alert, SliceControlReq, SliceControlAck]


@dataclass(frozen=True)
class BusMessage:
    payload: Payload
    sender: str
    sent_at: int
    seq: int
    deliver_at: int

    @property
    def kind(self) -> MessageKind:
        return self.payload.kind

    def to_dict(self) -> dict:
        p = self.payload
        if isinstance(p, KpmIndication):
            body = p.report.to_dict()
        elif isinstance(p, Alert):
            body = {"ue": p.ue, "verdict": p.verdict.to_dict()}
        elif isinstance(p, SliceControlReq):
            body = {"ue": p.ue, "target_slice": p.target_slice}
        else:
            body = {"ue": p.ue, "success": p.success}
        return {
            "seq": self.seq,
            "sender": self.sender,
            "sent_at": self.sent_at,
            "deliver_at": self.deliver_at,
            "kind": self.kind.value,
            "payload": body,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BusMessage":
        kind = MessageKind(data["kind"])
        body = data["payload"]
        if kind is MessageKind.KPM_INDICATION:
            payload: Payload = KpmIndication(KpmReport.from_dict(body))
        elif kind is MessageKind.ALERT:
            payload = Alert(int(body["ue"]), Verdict.from_dict(body["verdict"]))
        elif kind is MessageKind.SLICE_CONTROL_REQ:
            payload = SliceControlReq(int(body["ue"]), int(body["target_slice"]))
        else:
            payload = SliceControlAck(int(body["ue"]), bool(body["success"]))
        return cls(payload, data["sender"], int(data["sent_at"]), int(data["seq"]), int(data["deliver_at"]))


@dataclass(frozen=True)
class Subscription:
    subscriber: str
    kinds: frozenset


class RicBus:
    """Typed publish/route bus with per-hop latency and a total delivery order.

    Messages become visible to ``drain`` once the clock reaches their
    ``deliver_at``. Pending messages are returned ordered by
    (deliver_at, sender registration order, seq), which also preserves
    per-sender FIFO order since seq is global and monotonic.
    """

    def __init__(self, clock=None, hop_latency: int = 1, record_trace: bool = True):
        if hop_latency < 0:
            raise ValueError("hop_latency must be >= 0")
        self.clock = clock if clock is not None else VirtualClock()
        self.hop_latency = int(hop_latency)
        self._lock = threading.RLock()
        self._order: Dict[str, int] = {}
        self._subs: Dict[str, Set[MessageKind]] = {}
        self._queues: Dict[str, List[BusMessage]] = {}
        self._seq = 0
        self.trace: Optional[List[BusMessage]] = [] if record_trace else None
        self.published = 0
        self.delivered = 0

    def register(self, component: str) -> None:
        with self._lock:
            if component not in self._order:
                self._order[component] = len(self._order)
                self._subs[component] = set()
                self._queues[component] = []

    def subscribe(self, component: str, kinds: Iterable[MessageKind]) -> Subscription:
        kinds = frozenset(MessageKind(k) for k in kinds)
        with self._lock:
            if component not in self._order:
                raise BusError(f"component {component!r} is not registered")
            dup = kinds & self._subs[component]
            if dup:
                names = ", ".join(sorted(k.value for k in dup))
                raise BusError(f"{component!r} already subscribed to {names}")
            self._subs[component] |= kinds
        return Subscription(component, kinds)

    def publish(self, sender: str, payload: Payload) -> int:
        """Queue ``payload`` for every subscriber of its kind; return that count."""
        with self._lock:
            if sender not in self._order:
                raise BusError(f"sender {sender!r} is not registered")
            self._seq += 1
            now = self.clock.now()
            msg = BusMessage(payload, sender, now, self._seq, now + self.hop_latency)
            if self.trace is not None:
                self.trace.append(msg)
            self.published += 1
            count = 0
            for name, kinds in self._subs.items():
                if msg.kind in kinds:
                    self._queues[name].append(msg)
                    count += 1
            return count

    def drain(self, component: str, now: Optional[int] = None) -> List[BusMessage]:
        """Remove and return every message deliverable to ``component`` by ``now``."""
        with self._lock:
            if component not in self._queues:
                raise BusError(f"unknown component {component!r}")
            if now is None:
                now = self.clock.now()
            queue = self._queues[component]
            ready = [m for m in queue if m.deliver_at <= now]
            if not ready:
                return []
            self._queues[component] = [m for m in queue if m.deliver_at > now]
            ready.sort(key=lambda m: (m.deliver_at, self._order[m.sender], m.seq))
            self.delivered += len(ready)
            return ready

    def pending(self) -> int:
        with self._lock:
            return sum(len(q) for q in self._queues.values())

    def next_delivery(self) -> Optional[int]:
        with self._lock:
            times = [m.deliver_at for q in self._queues.values() for m in q]
            return min(times) if times else None

    def trace_lines(self) -> List[str]:
        if self.trace is None:
            return []
        return [json.dumps(m.to_dict(), sort_keys=True, separators=(",", ":")) for m in self.trace]


def load_trace(path) -> List[BusMessage]:
    messages = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            if "header" in data:
                continue
            messages.append(BusMessage.from_dict(data))
    return messages
