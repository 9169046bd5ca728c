"""In-memory bus for single-process mode and tests.

Delivery is synchronous at publish time under one lock, which makes the
ordering contract (per publisher, per topic) trivially total. No
persistence; durability lives in twin snapshots.
"""

from __future__ import annotations

import itertools
import threading

from netwin.bus.base import BusClient, BusMessage, Subscription
from netwin.bus.topics import topic_matches, validate_filter, validate_topic


class InMemoryBus:
    """Process-local broker. Create one, hand clients to each component."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._subscriptions: list[Subscription] = []
        self._client_ids = itertools.count(1)

    def connect(self, client_id: str | None = None) -> "InMemoryClient":
        if client_id is None:
            client_id = f"mem-{next(self._client_ids)}"
        return InMemoryClient(self, client_id)

    def _subscribe(self, topic_filter: str) -> Subscription:
        validate_filter(topic_filter)
        subscription = Subscription(topic_filter, self._unsubscribe)
        with self._lock:
            self._subscriptions.append(subscription)
        return subscription

    def _unsubscribe(self, subscription: Subscription) -> None:
        with self._lock:
            try:
                self._subscriptions.remove(subscription)
            except ValueError:
                pass

    def _publish(self, message: BusMessage) -> None:
        validate_topic(message.topic)
        with self._lock:
            targets = [s for s in self._subscriptions if topic_matches(s.topic_filter, message.topic)]
            for subscription in targets:
                subscription._deliver(message)


class InMemoryClient(BusClient):
    def __init__(self, bus: InMemoryBus, client_id: str) -> None:
        self._bus = bus
        self.client_id = client_id
        self._seq = itertools.count(1)
        self._subscriptions: list[Subscription] = []
        self._closed = False

    def publish(self, topic: str, payload: bytes) -> None:
        if self._closed:
            raise RuntimeError("client is closed")
        self._bus._publish(BusMessage(topic=topic, payload=payload, publish_seq=next(self._seq)))

    def subscribe(self, topic_filter: str) -> Subscription:
        if self._closed:
            raise RuntimeError("client is closed")
        subscription = self._bus._subscribe(topic_filter)
        self._subscriptions.append(subscription)
        return subscription

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        for subscription in list(self._subscriptions):
            subscription.close()
        self._subscriptions.clear()
