"""Action commands: the feedback path from insights back to devices.

Commands are published as canonical JSON on ``netwin/actions/<device_id>``
and consumed by the device (simulator) side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from netwin.signals import SignalKind, canonical_json

VERBS = ("set_primary_interface", "set_report_period", "pause", "resume")


class InvalidAction(ValueError):
    """Command fails verb/argument validation before dispatch."""


@dataclass(frozen=True)
class ActionCommand:
    device_id: str
    verb: str
    arguments: Mapping[str, Any] = field(default_factory=dict)
    issued_by: str = "console"
    issued_at_ms: int = 0

    def __post_init__(self) -> None:
        if not self.device_id:
            raise InvalidAction("device_id must be non-empty")
        if self.verb not in VERBS:
            raise InvalidAction(f"unknown verb {self.verb!r}")
        args = dict(self.arguments)
        if self.verb == "set_primary_interface":
            kind = args.get("kind")
            if not isinstance(kind, str) or kind not in SignalKind._value2member_map_:
                raise InvalidAction("set_primary_interface requires a valid 'kind'")
        elif self.verb == "set_report_period":
            kind = args.get("kind")
            period = args.get("period_ms")
            if not isinstance(kind, str) or kind not in SignalKind._value2member_map_:
                raise InvalidAction("set_report_period requires a valid 'kind'")
            if isinstance(period, bool) or not isinstance(period, int) or period <= 0:
                raise InvalidAction("set_report_period requires integer 'period_ms' > 0")
        elif args:
            raise InvalidAction(f"{self.verb} takes no arguments")
        object.__setattr__(self, "arguments", args)

    def encode(self) -> str:
        return canonical_json(
            {
                "device_id": self.device_id,
                "verb": self.verb,
                "arguments": self.arguments,
                "issued_by": self.issued_by,
                "issued_at_ms": self.issued_at_ms,
            }
        )


def decode_action(payload: str | bytes) -> ActionCommand:
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise InvalidAction(f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InvalidAction("action must be an object")
    for key in ("device_id", "verb"):
        if not isinstance(doc.get(key), str):
            raise InvalidAction(f"missing or non-string {key!r}")
    arguments = doc.get("arguments", {})
    if not isinstance(arguments, dict):
        raise InvalidAction("arguments must be an object")
    issued_at = doc.get("issued_at_ms", 0)
    if isinstance(issued_at, bool) or not isinstance(issued_at, int):
        raise InvalidAction("issued_at_ms must be an integer")
    return ActionCommand(
        device_id=doc["device_id"],
        verb=doc["verb"],
        arguments=arguments,
        issued_by=doc.get("issued_by", "unknown"),
        issued_at_ms=issued_at,
    )
