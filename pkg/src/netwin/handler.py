"""Signal handler: validates, cleans, deduplicates, smooths raw readings.

Consumes ``netwin/raw/#`` and republishes curated documents (raw values
plus ``<metric>_smoothed`` siblings and ``curated: true``). One processor
per signal kind, created on first use; per-(device, source) state lives
inside the kind processor, so a poisoned stream on one kind can never
corrupt another kind's processing.

Cleaning order is fixed so drop reasons are deterministic:
bounds check, then staleness, then duplicate, then normalization.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field, replace
from typing import Callable

from netwin.bus.base import BusClient, Subscription
from netwin.bus.topics import TOPIC_ROOT, topic_for
from netwin.signals import (
    SMOOTHABLE_METRICS,
    Reject,
    SchemaError,
    SignalKind,
    SignalReading,
    ValidationBounds,
    decode_reading,
    encode_reading,
    normalize_reading,
    validate_reading,
)

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.3
DEFAULT_STALENESS_WINDOW_MS = 5000


@dataclass(frozen=True)
class HandlerConfig:
    bounds: ValidationBounds = field(default_factory=ValidationBounds)
    alpha: float = DEFAULT_ALPHA
    staleness_window_ms: int = DEFAULT_STALENESS_WINDOW_MS

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.staleness_window_ms < 0:
            raise ValueError("staleness window must be >= 0")


@dataclass(frozen=True)
class Accepted:
    reading: SignalReading  # normalized


@dataclass(frozen=True)
class Dropped:
    reason: str


CleanResult = Accepted | Dropped


@dataclass
class _KeyState:
    """Per-(device, source) processor state."""

    last_seen_ms: int = 0
    last_accepted: tuple | None = None  # (timestamp_ms, metrics record)
    ewma: dict[str, float] = field(default_factory=dict)


class KindProcessor:
    """Cleans and smooths one signal kind's stream in arrival order."""

    def __init__(self, kind: SignalKind, config: HandlerConfig) -> None:
        self.kind = kind
        self.config = config
        self._states: dict[tuple[str, str], _KeyState] = {}

    def _state(self, reading: SignalReading) -> _KeyState:
        key = (reading.device.device_id, reading.source_id)
        state = self._states.get(key)
        if state is None:
            state = _KeyState()
            self._states[key] = state
        return state

    def clean(self, reading: SignalReading) -> CleanResult:
        verdict = validate_reading(reading, self.config.bounds)
        if isinstance(verdict, Reject):
            return Dropped(f"out_of_bounds:{verdict.metric}")
        state = self._state(reading)
        if reading.timestamp_ms < state.last_seen_ms - self.config.staleness_window_ms:
            return Dropped("stale")
        fingerprint = (reading.timestamp_ms, reading.metrics)
        if fingerprint == state.last_accepted:
            return Dropped("duplicate")
        normalized = normalize_reading(reading)
        state.last_accepted = fingerprint
        state.last_seen_ms = max(state.last_seen_ms, reading.timestamp_ms)
        return Accepted(normalized)

    def smooth(self, key: tuple[str, str], metric: str, value: float) -> float:
        """EWMA: s0 = x0, then s = alpha*x + (1-alpha)*s."""
        state = self._states.setdefault(key, _KeyState())
        previous = state.ewma.get(metric)
        smoothed = value if previous is None else self.config.alpha * value + (1 - self.config.alpha) * previous
        state.ewma[metric] = smoothed
        return smoothed

    def curate(self, accepted: SignalReading) -> SignalReading:
        key = (accepted.device.device_id, accepted.source_id)
        smoothed: dict[str, float] = {}
        for metric in SMOOTHABLE_METRICS[self.kind]:
            value = getattr(accepted.metrics, metric, None)
            if value is not None:
                smoothed[metric] = self.smooth(key, metric, float(value))
        return replace(accepted, curated=True, smoothed=smoothed)


class HandlerStats:
    """Per-kind counters; accepted + rejected + duplicates + stale == consumed."""

    KINDS = tuple(k.value for k in SignalKind) + ("unknown",)

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.consumed: dict[str, int] = {k: 0 for k in self.KINDS}
        self.accepted: dict[str, int] = {k: 0 for k in self.KINDS}
        self.rejected: dict[str, dict[str, int]] = {k: {} for k in self.KINDS}
        self.duplicates_dropped: dict[str, int] = {k: 0 for k in self.KINDS}
        self.stale_dropped: dict[str, int] = {k: 0 for k in self.KINDS}

    def count_consumed(self, kind: str) -> None:
        with self._lock:
            self.consumed[kind] += 1

    def count_accepted(self, kind: str) -> None:
        with self._lock:
            self.accepted[kind] += 1

    def count_dropped(self, kind: str, reason: str) -> None:
        with self._lock:
            if reason == "duplicate":
                self.duplicates_dropped[kind] += 1
            elif reason == "stale":
                self.stale_dropped[kind] += 1
            else:
                self.rejected[kind][reason] = self.rejected[kind].get(reason, 0) + 1

    def snapshot(self) -> dict:
        with self._lock:
            return {
                kind: {
                    "consumed": self.consumed[kind],
                    "accepted": self.accepted[kind],
                    "rejected": dict(self.rejected[kind]),
                    "duplicates_dropped": self.duplicates_dropped[kind],
                    "stale_dropped": self.stale_dropped[kind],
                }
                for kind in self.KINDS
            }

    def identity_holds(self) -> bool:
        snap = self.snapshot()
        return all(
            row["accepted"] + sum(row["rejected"].values()) + row["duplicates_dropped"] + row["stale_dropped"]
            == row["consumed"]
            for row in snap.values()
        )


class SignalHandler:
    """Routes raw messages to kind processors and publishes curated output."""

    def __init__(
        self,
        config: HandlerConfig | None = None,
        publish: Callable[[str, str], None] | None = None,
    ) -> None:
        self.config = config or HandlerConfig()
        self._publish = publish or (lambda topic, payload: None)
        self._processors: dict[SignalKind, KindProcessor] = {}
        self.stats = HandlerStats()

    def processor_for(self, kind: SignalKind) -> KindProcessor:
        processor = self._processors.get(kind)
        if processor is None:
            processor = KindProcessor(kind, self.config)
            self._processors[kind] = processor
        return processor

    @staticmethod
    def _kind_from_topic(topic: str) -> str:
        parts = topic.split("/")
        if len(parts) == 4 and parts[0] == TOPIC_ROOT and parts[3] in SignalKind._value2member_map_:
            return parts[3]
        return "unknown"

    def dispatch(self, topic: str, payload: bytes | str) -> str | None:
        """Decode and route one raw message; returns the processor id
        (the kind) or None when the message was dropped at decode."""
        try:
            reading = decode_reading(payload)
        except SchemaError as exc:
            kind = self._kind_from_topic(topic)
            self.stats.count_consumed(kind)
            self.stats.count_dropped(kind, "decode_error")
            logger.debug("poison message on %s: %s", topic, exc)
            return None
        self.stats.count_consumed(reading.kind.value)
        self._route(reading)
        return reading.kind.value

    def _route(self, reading: SignalReading) -> SignalReading | None:
        processor = self.processor_for(reading.kind)
        result = processor.clean(reading)
        if isinstance(result, Dropped):
            self.stats.count_dropped(reading.kind.value, result.reason)
            return None
        curated = processor.curate(result.reading)
        self.stats.count_accepted(reading.kind.value)
        topic = topic_for("curated", curated.device.device_id, curated.kind)
        self._publish(topic, encode_reading(curated))
        return curated

    def ingest_reading(self, reading: SignalReading) -> SignalReading | None:
        """Device-placement entry point: process an in-process reading
        without a raw bus hop."""
        self.stats.count_consumed(reading.kind.value)
        return self._route(reading)


class HandlerService:
    """Cloud-placement pump: subscribes to raw topics on the bus."""

    def __init__(self, bus_client: BusClient, handler: SignalHandler) -> None:
        self.bus_client = bus_client
        self.handler = handler
        self.handler._publish = lambda topic, payload: bus_client.publish(topic, payload.encode("utf-8"))
        self._subscription: Subscription = bus_client.subscribe(f"{TOPIC_ROOT}/raw/#")
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()

    def pump_once(self) -> int:
        """Drain pending raw messages; returns how many were processed."""
        processed = 0
        while True:
            message = self._subscription.pop_nowait()
            if message is None:
                return processed
            self.handler.dispatch(message.topic, message.payload)
            processed += 1

    def run_forever(self, poll_s: float = 0.05) -> None:
        while not self._stop.is_set():
            message = self._subscription.get(timeout=poll_s)
            if message is not None:
                self.handler.dispatch(message.topic, message.payload)

    def start(self) -> "HandlerService":
        self._thread = threading.Thread(target=self.run_forever, daemon=True, name="signal-handler")
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._subscription.close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
