"""Shared bus interfaces: messages, subscriptions, client contract."""

from __future__ import annotations

import queue
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator


class TransportError(RuntimeError):
    """The underlying transport (broker connection) failed."""


@dataclass(frozen=True)
class BusMessage:
    topic: str
    payload: bytes
    publish_seq: int


_CLOSED = object()


class Subscription:
    """One subscriber's unbounded message stream.

    Messages matching the filter and published after the subscription was
    created are delivered in publish order. Closing the stream unsubscribes;
    a closed stream raises no errors, it simply stops yielding.
    """

    def __init__(self, topic_filter: str, on_close) -> None:
        self.topic_filter = topic_filter
        self._queue: queue.Queue = queue.Queue()
        self._on_close = on_close
        self._closed = False

    def _deliver(self, message: BusMessage) -> None:
        if not self._closed:
            self._queue.put(message)

    def get(self, timeout: float | None = None) -> BusMessage | None:
        """Next message, or None when the timeout expires or the stream closed."""
        if self._closed and self._queue.empty():
            return None
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        if item is _CLOSED:
            return None
        return item

    def pop_nowait(self) -> BusMessage | None:
        """Next pending message without blocking, or None."""
        try:
            item = self._queue.get_nowait()
        except queue.Empty:
            return None
        if item is _CLOSED:
            return None
        return item

    def __iter__(self) -> Iterator[BusMessage]:
        while True:
            message = self.get()
            if message is None:
                return
            yield message

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._on_close(self)
        finally:
            self._queue.put(_CLOSED)

    @property
    def closed(self) -> bool:
        return self._closed


class BusClient(ABC):
    """One component's connection to the bus.

    publish is safe to call from any thread; each subscription stream is
    consumed by one task at a time.
    """

    @abstractmethod
    def publish(self, topic: str, payload: bytes) -> None:
        """Deliver at-least-once to every matching subscriber; per-topic order kept."""

    @abstractmethod
    def subscribe(self, topic_filter: str) -> Subscription:
        """Open a stream of messages matching the filter."""

    @abstractmethod
    def close(self) -> None:
        """Close all subscriptions and release the connection."""
