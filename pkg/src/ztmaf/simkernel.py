"""Deterministic discrete-event engine, network channel, and cycle-cost model.

Events fire in (time, sequence) order, so equal-time events run in insertion
order and the whole trace is a pure function of (config, master seed). All
randomness is drawn from named per-purpose streams derived from
(master seed, purpose tag, entity index): adding one consumer of randomness
never perturbs another's stream.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

TRACE_HEADER = "t_s,seq,kind,from,to,detail"


class SchedulingError(ValueError):
    """Attempt to schedule an event before the current simulation time."""


class LinkDown(RuntimeError):
    """No usable link between the endpoints at transmit/delivery time."""


class CostModelError(KeyError):
    """Unknown operation kind charged against the cost table."""


def derive_rng(master_seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent seeded stream for (master seed, purpose, entity index)."""
    material = f"{master_seed}|{purpose}|{index}".encode("utf-8")
    digest = hashlib.sha256(material).digest()
    words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 32, 4)]
    return np.random.Generator(np.random.PCG64(words))


@dataclass(order=True)
class Event:
    fire_at_s: float
    seq: int
    kind: str = field(compare=False)
    fn: Callable[[], None] = field(compare=False)
    src: str = field(compare=False, default="")
    dst: str = field(compare=False, default="")
    detail: str = field(compare=False, default="")


class EventKernel:
    def __init__(self, trace: bool = False):
        self.now = 0.0
        self._heap: List[Event] = []
        self._seq = 0
        self.trace_rows: List[str] = [] if trace else None
        self.fired = 0

    def schedule(
        self,
        fire_at_s: float,
        kind: str,
        fn: Callable[[], None],
        src: str = "",
        dst: str = "",
        detail: str = "",
    ) -> Event:
        if fire_at_s < self.now:
            raise SchedulingError(f"cannot schedule {kind} at {fire_at_s} < now {self.now}")
        ev = Event(fire_at_s, self._seq, kind, fn, src, dst, detail)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def run_until(self, t_end_s: float) -> None:
        """Fire all events with fire_at <= t_end in (time, seq) order."""
        while self._heap and self._heap[0].fire_at_s <= t_end_s:
            ev = heapq.heappop(self._heap)
            self.now = ev.fire_at_s
            if self.trace_rows is not None:
                self.trace_rows.append(
                    f"{ev.fire_at_s:.6f},{ev.seq},{ev.kind},{ev.src},{ev.dst},{ev.detail}"
                )
            self.fired += 1
            ev.fn()

    def pending(self) -> int:
        return len(self._heap)


@dataclass
class ChannelModel:
    bandwidth_bps: float = 10e6
    packet_bytes: int = 512
    propagation_s: float = 1e-3
    loss_prob: float = 0.0

    def __post_init__(self):
        if self.bandwidth_bps <= 0 or self.packet_bytes <= 0:
            raise ValueError("bandwidth and packet size must be positive")
        if self.propagation_s < 0 or not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("propagation must be >= 0 and loss_prob in [0, 1]")

    @property
    def tx_time_s(self) -> float:
        return self.packet_bytes * 8.0 / self.bandwidth_bps


@dataclass
class PortState:
    """Per-node FIFO serialization points, one per direction."""

    tx_free_at: float = 0.0
    rx_free_at: float = 0.0


@dataclass
class ChannelStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    undeliverable: int = 0
    min_leg_s: float = 0.0
    legs: List[Tuple[float, float]] = field(default_factory=list)  # (sent_at, delivered_at)

    @property
    def in_flight(self) -> int:
        return self.sent - self.delivered - self.dropped - self.undeliverable


class Network:
    """Point-to-point transmissions with FIFO queueing at both ports.

    Delivery time = departure + queueing + packet_bytes*8/bandwidth +
    propagation. Losses are decided before queueing; link existence is the
    caller's predicate, checked at send and again at delivery.
    """

    def __init__(self, kernel: EventKernel, channel: ChannelModel, rng: np.random.Generator):
        self.kernel = kernel
        self.channel = channel
        self.rng = rng
        self.ports: Dict[str, PortState] = {}
        self.stats = ChannelStats()
        self.stats.min_leg_s = channel.tx_time_s + channel.propagation_s

    def _port(self, label: str) -> PortState:
        port = self.ports.get(label)
        if port is None:
            port = self.ports[label] = PortState()
        return port

    def transmit(
        self,
        src_label: str,
        dst_label: str,
        kind: str,
        on_deliver: Callable[[], None],
        link_up: Callable[[float], bool],
        detail: str = "",
    ) -> Optional[float]:
        """Schedule a delivery; returns the delivery time or None if lost."""
        now = self.kernel.now
        self.stats.sent += 1
        if not link_up(now):
            self.stats.undeliverable += 1
            raise LinkDown(f"{src_label}->{dst_label} at {now:.3f}")
        if self.channel.loss_prob > 0 and self.rng.uniform(0.0, 1.0) < self.channel.loss_prob:
            self.stats.dropped += 1
            return None
        ch = self.channel
        tx_port = self._port(src_label)
        tx_start = max(now, tx_port.tx_free_at)
        tx_port.tx_free_at = tx_start + ch.tx_time_s
        first_bit_arrives = tx_start + ch.propagation_s
        rx_port = self._port(dst_label)
        rx_start = max(first_bit_arrives, rx_port.rx_free_at)
        deliver_at = rx_start + ch.tx_time_s
        rx_port.rx_free_at = deliver_at

        def _deliver():
            if not link_up(self.kernel.now):
                self.stats.undeliverable += 1
                return
            self.stats.delivered += 1
            self.stats.legs.append((now, self.kernel.now))
            on_deliver()

        self.kernel.schedule(deliver_at, kind, _deliver, src=src_label, dst=dst_label, detail=detail)
        return deliver_at


@dataclass(frozen=True)
class CostTable:
    hash: int = 2000
    hmac: int = 3000
    sign: int = 6000
    sig_verify: int = 8000
    trust_update: int = 500
    cert_verify: int = 12000
    consensus_overhead: int = 15000

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if v < 0:
                raise ValueError(f"cost {name} must be non-negative")

    def cycles(self, kind: str) -> int:
        try:
            return getattr(self, kind)
        except AttributeError:
            raise CostModelError(kind) from None


class CycleLedger:
    """Accumulates cycles per in-flight attempt plus a background bucket."""

    def __init__(self, table: CostTable):
        self.table = table
        self.attempt_cycles: Dict[int, int] = {}
        self.background = 0

    def charge(self, kind: str, attempt_id: Optional[int] = None) -> int:
        cycles = self.table.cycles(kind)
        if attempt_id is None:
            self.background += cycles
        else:
            self.attempt_cycles[attempt_id] = self.attempt_cycles.get(attempt_id, 0) + cycles
        return cycles

    def total(self, attempt_id: int) -> int:
        return self.attempt_cycles.get(attempt_id, 0)


class Cpu:
    """Per-node FIFO processor; cycles become busy time at effective_hz."""

    def __init__(self, kernel: EventKernel, label: str, effective_hz: float):
        if effective_hz <= 0:
            raise ValueError("effective_hz must be positive")
        self.kernel = kernel
        self.label = label
        self.effective_hz = effective_hz
        self.free_at = 0.0

    def run(self, cycles: int, kind: str, on_done: Callable[[], None], detail: str = "") -> float:
        start = max(self.kernel.now, self.free_at)
        done = start + cycles / self.effective_hz
        self.free_at = done
        self.kernel.schedule(done, kind, on_done, src=self.label, dst=self.label, detail=detail)
        return done
