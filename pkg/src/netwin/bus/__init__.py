"""Topic-based publish/subscribe transport connecting all components.

Two interchangeable implementations: an in-memory bus for single-process
mode and tests, and an MQTT 3.1.1 adapter for distributed mode. Both honor
the same delivery contract: at-least-once to every subscriber whose filter
matches at publish time, with per-publisher per-topic ordering.
"""

from netwin.bus.base import BusClient, BusMessage, Subscription, TransportError
from netwin.bus.memory import InMemoryBus
from netwin.bus.mqtt import MqttBus
from netwin.bus.topics import (
    TOPIC_ROOT,
    TopicError,
    topic_for,
    topic_matches,
    validate_filter,
    validate_topic,
)

__all__ = [
    "BusClient",
    "BusMessage",
    "InMemoryBus",
    "MqttBus",
    "Subscription",
    "TOPIC_ROOT",
    "TopicError",
    "TransportError",
    "topic_for",
    "topic_matches",
    "validate_filter",
    "validate_topic",
]
