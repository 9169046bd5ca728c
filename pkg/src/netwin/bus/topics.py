"""Topic naming scheme and MQTT-style filter matching.

Concrete topics are slash-separated UTF-8 segments with no empty segments
and no wildcard characters. Filters additionally allow ``+`` as a full
segment (matches exactly one level) and a trailing ``#`` (matches the
remaining levels, including none).
"""

from __future__ import annotations

from netwin.signals import SignalKind

TOPIC_ROOT = "netwin"

STAGES = ("raw", "curated", "actions", "events")


class TopicError(ValueError):
    """Malformed topic or topic filter."""


def _segments(topic: str, what: str) -> list[str]:
    if not topic:
        raise TopicError(f"{what} must be non-empty")
    parts = topic.split("/")
    if any(p == "" for p in parts):
        raise TopicError(f"{what} {topic!r} has an empty segment")
    return parts


def validate_topic(topic: str) -> str:
    parts = _segments(topic, "topic")
    for part in parts:
        if "+" in part or "#" in part:
            raise TopicError(f"topic {topic!r} contains a wildcard character")
    return topic


def validate_filter(topic_filter: str) -> str:
    parts = _segments(topic_filter, "filter")
    for i, part in enumerate(parts):
        if part == "#" and i != len(parts) - 1:
            raise TopicError(f"filter {topic_filter!r}: '#' only allowed as last segment")
        if part not in ("+", "#") and ("+" in part or "#" in part):
            raise TopicError(f"filter {topic_filter!r}: wildcard inside segment {part!r}")
    return topic_filter


def topic_matches(topic_filter: str, topic: str) -> bool:
    """MQTT single/multi-level wildcard matching. Pure function."""
    fparts = topic_filter.split("/")
    tparts = topic.split("/")
    i = 0
    for i, fpart in enumerate(fparts):
        if fpart == "#":
            return True
        if i >= len(tparts):
            return False
        if fpart != "+" and fpart != tparts[i]:
            return False
    return len(fparts) == len(tparts)


def topic_for(stage: str, device_id: str, kind: SignalKind | None = None) -> str:
    """Deterministic topic for one device's stream at one pipeline stage.

    ``netwin/<stage>/<device_id>[/<kind>]``; the actions and events stages
    omit the kind segment.
    """
    if stage not in STAGES:
        raise TopicError(f"unknown stage {stage!r}")
    if not device_id:
        raise TopicError("device_id must be non-empty")
    if stage in ("actions", "events") or kind is None:
        return f"{TOPIC_ROOT}/{stage}/{device_id}"
    return f"{TOPIC_ROOT}/{stage}/{device_id}/{kind.value}"
