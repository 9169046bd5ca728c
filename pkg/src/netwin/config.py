"""Configuration file schema and loading. Flags override file values."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


@dataclass(frozen=True)
class BusSettings:
    url: str = "memory"  # "memory" or mqtt://host:port


@dataclass(frozen=True)
class GatewaySettings:
    host: str = "127.0.0.1"
    port: int = 8080


@dataclass(frozen=True)
class HandlerSettings:
    placement: str = "cloud"  # "cloud" | "device"
    alpha: float = 0.3
    staleness_window_ms: int = 5000
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.placement not in ("cloud", "device"):
            raise ConfigError("handler.placement", f"must be cloud or device, got {self.placement!r}")


@dataclass(frozen=True)
class ControllerSettings:
    ttl_ms: int = 60_000
    sweep_interval_ms: int = 10_000
    tokens: tuple[str, ...] = ("netwin-dev",)
    session_ttl_s: float = 3600.0
    kpi_capacity: int = 10_000
    snapshot_dir: str | None = None


@dataclass(frozen=True)
class SimulatorSettings:
    scenario: str = "ubikampus-demo"
    seed: int | None = None
    mode: str = "realtime"  # "realtime" | "fast"


@dataclass(frozen=True)
class AnalyticsSettings:
    templates_dir: str | None = None
    remote_url: str | None = None
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class NetwinConfig:
    bus: BusSettings = BusSettings()
    gateway: GatewaySettings = GatewaySettings()
    handler: HandlerSettings = HandlerSettings()
    controller: ControllerSettings = ControllerSettings()
    simulator: SimulatorSettings = SimulatorSettings()
    analytics: AnalyticsSettings = AnalyticsSettings()


def _section(doc: Mapping[str, Any], name: str, cls, path: str):
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}{name}", "must be an object")
    defaults = cls()
    known = set(defaults.__dataclass_fields__)
    overrides: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{path}{name}.{key}", "unknown setting")
        if key == "tokens":
            overrides[key] = tuple(str(t) for t in value)
        elif key == "bounds":
            overrides[key] = {k: (float(v[0]), float(v[1])) for k, v in value.items()}
        elif key == "params":
            overrides[key] = dict(value)
        else:
            overrides[key] = value
    try:
        return replace(defaults, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}{name}", str(exc)) from None


def config_from_doc(doc: Mapping[str, Any]) -> NetwinConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("", "configuration must be an object")
    for key in doc:
        if key not in ("bus", "gateway", "handler", "controller", "simulator", "analytics"):
            raise ConfigError(key, "unknown section")
    return NetwinConfig(
        bus=_section(doc, "bus", BusSettings, ""),
        gateway=_section(doc, "gateway", GatewaySettings, ""),
        handler=_section(doc, "handler", HandlerSettings, ""),
        controller=_section(doc, "controller", ControllerSettings, ""),
        simulator=_section(doc, "simulator", SimulatorSettings, ""),
        analytics=_section(doc, "analytics", AnalyticsSettings, ""),
    )


def load_config(path: str | Path | None) -> NetwinConfig:
    if path is None:
        return NetwinConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(str(p), "configuration file not found")
    try:
        doc = json.loads(p.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(str(p), f"invalid JSON: {exc.msg}") from None
    return config_from_doc(doc)


def load_tokens_file(path: str | Path) -> tuple[str, ...]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(str(p), "token file not found")
    tokens = tuple(line.strip() for line in p.read_text("utf-8").splitlines() if line.strip())
    if not tokens:
        raise ConfigError(str(p), "token file is empty")
    return tokens


def parse_duration_ms(text: str) -> int:
    """Accepts '60s', '5m', '1500ms', or a bare integer of milliseconds."""
    text = text.strip().lower()
    try:
        if text.endswith("ms"):
            return int(text[:-2])
        if text.endswith("s"):
            return int(float(text[:-1]) * 1000)
        if text.endswith("m"):
            return int(float(text[:-1]) * 60_000)
        return int(text)
    except ValueError:
        raise ConfigError("duration", f"cannot parse duration {text!r}") from None
