"""Scenario files: the declarative description of a simulated campus floor.

A scenario is a JSON document listing signal sources, environmental
sensors, a device population with per-kind report periods, timed
join/leave events, and propagation parameters. Everything the simulator
does is a deterministic function of (scenario, seed, applied actions).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from netwin.signals import SignalKind


class ScenarioError(ValueError):
    """Scenario document is malformed or inconsistent."""


@dataclass(frozen=True)
class SourceSpec:
    source_id: str
    kind: SignalKind
    position: tuple[float, float]
    tx_power_dbm: float
    attributes: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind is SignalKind.ENVIRONMENT:
            raise ScenarioError(f"source {self.source_id}: kind must be a radio kind")


@dataclass(frozen=True)
class DeviceSpec:
    device_id: str
    model_name: str
    position: tuple[float, float]
    capabilities: frozenset[SignalKind]
    report_period_ms: Mapping[SignalKind, int]
    active_interface: SignalKind
    app_version: str = "1.0.0"

    def __post_init__(self) -> None:
        if self.active_interface not in self.capabilities:
            raise ScenarioError(
                f"device {self.device_id}: active_interface {self.active_interface} not in capabilities"
            )
        for kind, period in self.report_period_ms.items():
            if period <= 0:
                raise ScenarioError(f"device {self.device_id}: period for {kind} must be > 0")


@dataclass(frozen=True)
class EnvSensorSpec:
    sensor_id: str
    position: tuple[float, float]
    report_period_ms: int
    pm25_mean: float
    co2_mean: float
    pm25_sigma: float = 0.5
    co2_sigma: float = 10.0
    # Piecewise-constant expected motion events per sampling window:
    # ordered [from_ms, rate] steps, first step at 0.
    occupancy: tuple[tuple[int, float], ...] = ((0, 1.0),)

    def rate_at(self, t_ms: int) -> float:
        rate = 0.0
        for from_ms, step_rate in self.occupancy:
            if t_ms >= from_ms:
                rate = step_rate
        return rate


@dataclass(frozen=True)
class ScenarioEvent:
    at_ms: int
    device_id: str
    event: str  # "join" | "leave"

    def __post_init__(self) -> None:
        if self.event not in ("join", "leave"):
            raise ScenarioError(f"unknown event {self.event!r}")


@dataclass(frozen=True)
class FaultsSpec:
    """Dirty-data injection; exercises the cleaning pipeline downstream."""

    out_of_bounds_rate: float = 0.0
    duplicate_rate: float = 0.0
    stale_rate: float = 0.0


@dataclass(frozen=True)
class ScenarioSpec:
    rng_seed: int
    duration_s: float
    tick_interval_ms: int
    devices: tuple[DeviceSpec, ...]
    sources: tuple[SourceSpec, ...]
    env_sensors: tuple[EnvSensorSpec, ...] = ()
    events: tuple[ScenarioEvent, ...] = ()
    faults: FaultsSpec = FaultsSpec()
    path_loss_exponent: float = 2.0
    shadow_sigma_db: float = 2.0
    detection_threshold_dbm: float = -100.0
    rsrp_offset_db: float = 30.0

    def __post_init__(self) -> None:
        if self.tick_interval_ms <= 0:
            raise ScenarioError("tick_interval_ms must be > 0")
        device_ids = [d.device_id for d in self.devices]
        if len(device_ids) != len(set(device_ids)):
            raise ScenarioError("device ids must be unique")
        source_ids = [s.source_id for s in self.sources]
        if len(source_ids) != len(set(source_ids)):
            raise ScenarioError("source ids must be unique")
        sensor_ids = [s.sensor_id for s in self.env_sensors]
        if len(sensor_ids) != len(set(sensor_ids)):
            raise ScenarioError("sensor ids must be unique")
        known = set(device_ids)
        for event in self.events:
            if event.device_id not in known:
                raise ScenarioError(f"event references unknown device {event.device_id!r}")


# ---------------------------------------------------------------------------
# JSON round-trip


def _kind(value: str, where: str) -> SignalKind:
    try:
        return SignalKind(value)
    except ValueError:
        raise ScenarioError(f"{where}: unknown kind {value!r}") from None


def _position(value: Any, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"{where}: position must be [x, y]")
    return float(value[0]), float(value[1])


def scenario_from_doc(doc: Mapping[str, Any]) -> ScenarioSpec:
    try:
        devices = tuple(
            DeviceSpec(
                device_id=d["device_id"],
                model_name=d["model_name"],
                position=_position(d["position"], d["device_id"]),
                capabilities=frozenset(_kind(k, d["device_id"]) for k in d["capabilities"]),
                report_period_ms={
                    _kind(k, d["device_id"]): int(v) for k, v in d["report_period_ms"].items()
                },
                active_interface=_kind(d["active_interface"], d["device_id"]),
                app_version=d.get("app_version", "1.0.0"),
            )
            for d in doc["devices"]
        )
        sources = tuple(
            SourceSpec(
                source_id=s["source_id"],
                kind=_kind(s["kind"], s["source_id"]),
                position=_position(s["position"], s["source_id"]),
                tx_power_dbm=float(s["tx_power_dbm"]),
                attributes=dict(s.get("attributes", {})),
            )
            for s in doc["sources"]
        )
        env_sensors = tuple(
            EnvSensorSpec(
                sensor_id=e["sensor_id"],
                position=_position(e.get("position", [0, 0]), e["sensor_id"]),
                report_period_ms=int(e["report_period_ms"]),
                pm25_mean=float(e["pm25_mean"]),
                co2_mean=float(e["co2_mean"]),
                pm25_sigma=float(e.get("pm25_sigma", 0.5)),
                co2_sigma=float(e.get("co2_sigma", 10.0)),
                occupancy=tuple((int(t), float(r)) for t, r in e.get("occupancy", [[0, 1.0]])),
            )
            for e in doc.get("env_sensors", [])
        )
        events = tuple(
            ScenarioEvent(at_ms=int(e["at_ms"]), device_id=e["device_id"], event=e["event"])
            for e in doc.get("events", [])
        )
        faults_doc = doc.get("faults", {})
        faults = FaultsSpec(
            out_of_bounds_rate=float(faults_doc.get("out_of_bounds_rate", 0.0)),
            duplicate_rate=float(faults_doc.get("duplicate_rate", 0.0)),
            stale_rate=float(faults_doc.get("stale_rate", 0.0)),
        )
        return ScenarioSpec(
            rng_seed=int(doc["rng_seed"]),
            duration_s=float(doc["duration_s"]),
            tick_interval_ms=int(doc["tick_interval_ms"]),
            devices=devices,
            sources=sources,
            env_sensors=env_sensors,
            events=events,
            faults=faults,
            path_loss_exponent=float(doc.get("path_loss_exponent", 2.0)),
            shadow_sigma_db=float(doc.get("shadow_sigma_db", 2.0)),
            detection_threshold_dbm=float(doc.get("detection_threshold_dbm", -100.0)),
            rsrp_offset_db=float(doc.get("rsrp_offset_db", 30.0)),
        )
    except KeyError as exc:
        raise ScenarioError(f"missing scenario field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from None


def scenario_to_doc(spec: ScenarioSpec) -> dict[str, Any]:
    return {
        "rng_seed": spec.rng_seed,
        "duration_s": spec.duration_s,
        "tick_interval_ms": spec.tick_interval_ms,
        "path_loss_exponent": spec.path_loss_exponent,
        "shadow_sigma_db": spec.shadow_sigma_db,
        "detection_threshold_dbm": spec.detection_threshold_dbm,
        "rsrp_offset_db": spec.rsrp_offset_db,
        "devices": [
            {
                "device_id": d.device_id,
                "model_name": d.model_name,
                "position": list(d.position),
                "capabilities": sorted(k.value for k in d.capabilities),
                "report_period_ms": {k.value: v for k, v in sorted(d.report_period_ms.items())},
                "active_interface": d.active_interface.value,
                "app_version": d.app_version,
            }
            for d in spec.devices
        ],
        "sources": [
            {
                "source_id": s.source_id,
                "kind": s.kind.value,
                "position": list(s.position),
                "tx_power_dbm": s.tx_power_dbm,
                "attributes": dict(s.attributes),
            }
            for s in spec.sources
        ],
        "env_sensors": [
            {
                "sensor_id": e.sensor_id,
                "position": list(e.position),
                "report_period_ms": e.report_period_ms,
                "pm25_mean": e.pm25_mean,
                "pm25_sigma": e.pm25_sigma,
                "co2_mean": e.co2_mean,
                "co2_sigma": e.co2_sigma,
                "occupancy": [list(step) for step in e.occupancy],
            }
            for e in spec.env_sensors
        ],
        "events": [
            {"at_ms": e.at_ms, "device_id": e.device_id, "event": e.event} for e in spec.events
        ],
        "faults": {
            "out_of_bounds_rate": spec.faults.out_of_bounds_rate,
            "duplicate_rate": spec.faults.duplicate_rate,
            "stale_rate": spec.faults.stale_rate,
        },
    }


def load_scenario(path: str | Path) -> ScenarioSpec:
    """Load a scenario file; the name ``ubikampus-demo`` resolves to the
    bundled demo floor."""
    if str(path) == "ubikampus-demo":
        return ubikampus_demo()
    p = Path(path)
    if not p.exists():
        raise ScenarioError(f"scenario file not found: {p}")
    try:
        doc = json.loads(p.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}: invalid JSON: {exc.msg}") from None
    return scenario_from_doc(doc)


def save_scenario(spec: ScenarioSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_doc(spec), indent=2, sort_keys=True) + "\n", "utf-8")


# ---------------------------------------------------------------------------
# Bundled demo: an open-plan floor of roughly 40 x 25 meters.


def ubikampus_demo(seed: int = 7) -> ScenarioSpec:
    """20 devices, 3 cells, 6 APs, 8 BT beacons, 4 env sensors.

    Path-loss exponent 3.0 and a -85 dBm detection threshold give partial
    coverage: every device sees all cells, most APs, and only nearby
    beacons, so the expected twin graph is non-trivial.
    """
    cells = [
        SourceSpec(
            source_id=f"cell-{i + 1}",
            kind=SignalKind.CELLULAR,
            position=pos,
            tx_power_dbm=-30.0,
            attributes={
                "network_type": "LTE" if i < 2 else "NR",
                "frequency_mhz": [1800.0, 2600.0, 3500.0][i],
                "cell_id": f"cell-{i + 1}",
            },
        )
        for i, pos in enumerate([(0.0, 0.0), (40.0, 0.0), (20.0, 25.0)])
    ]
    aps = [
        SourceSpec(
            source_id=f"ap-{i + 1}",
            kind=SignalKind.WIFI,
            position=pos,
            tx_power_dbm=-40.0,
            attributes={
                "ssid": "ubikampus" if i % 2 == 0 else "ubikampus-5g",
                "bssid": f"aa:bb:cc:00:1{i}:0{i}",
                "channel": [1, 36, 6, 44, 11, 52][i],
                "frequency_mhz": [2412.0, 5180.0, 2437.0, 5220.0, 2462.0, 5260.0][i],
            },
        )
        for i, pos in enumerate([(5.0, 5.0), (20.0, 5.0), (35.0, 5.0), (5.0, 20.0), (20.0, 20.0), (35.0, 20.0)])
    ]
    beacons = [
        SourceSpec(
            source_id=f"bt-{i + 1}",
            kind=SignalKind.BLUETOOTH,
            position=((i % 4) * 11.0 + 3.0, (i // 4) * 15.0 + 4.0),
            tx_power_dbm=-65.0,
            attributes={
                "peer_address": f"de:ad:be:ef:0{i}:0{i}",
                "device_name": f"beacon-{i + 1}",
            },
        )
        for i in range(8)
    ]
    sensors = tuple(
        EnvSensorSpec(
            sensor_id=f"env-{i + 1}",
            position=((i % 2) * 30.0 + 5.0, (i // 2) * 15.0 + 5.0),
            report_period_ms=5000,
            pm25_mean=7.0 + i,
            co2_mean=430.0 + 25.0 * i,
            occupancy=((0, 1.0 + i), (30_000, 4.0 + i)),
        )
        for i in range(4)
    )

    models = ["simphone-a", "simphone-b", "simtab-c"]
    devices = []
    for i in range(20):
        capabilities = {SignalKind.CELLULAR, SignalKind.WIFI}
        periods = {SignalKind.CELLULAR: 2000, SignalKind.WIFI: 1000}
        if i % 2 == 0:
            capabilities.add(SignalKind.BLUETOOTH)
            periods[SignalKind.BLUETOOTH] = 3000
        devices.append(
            DeviceSpec(
                device_id=f"d{i + 1:02d}",
                model_name=models[i % 3],
                position=(2.0 + (i * 19) % 37, 2.0 + (i * 7) % 22),
                capabilities=frozenset(capabilities),
                report_period_ms=periods,
                active_interface=SignalKind.WIFI,
            )
        )

    events = (
        ScenarioEvent(at_ms=8000, device_id="d20", event="join"),
        ScenarioEvent(at_ms=20_000, device_id="d19", event="leave"),
    )

    return ScenarioSpec(
        rng_seed=seed,
        duration_s=60.0,
        tick_interval_ms=500,
        devices=tuple(devices),
        sources=tuple(cells + aps + beacons),
        env_sensors=sensors,
        events=events,
        path_loss_exponent=3.0,
        shadow_sigma_db=2.0,
        detection_threshold_dbm=-85.0,
        rsrp_offset_db=30.0,
    )
