"""Simulated device population: periodic multi-RAT readings over a floor plan.

Stands in for the physical end-devices. Signal strength follows a
log-distance path-loss model with Gaussian shadowing; every emission is a
deterministic function of (scenario, seed, applied actions, time). The
simulator also answers ground-truth queries so end-to-end tests can check
the twin graph against what should exist.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable

from netwin.actions import ActionCommand, decode_action
from netwin.bus.base import BusClient, Subscription
from netwin.bus.topics import topic_for
from netwin.scenarios import DeviceSpec, EnvSensorSpec, ScenarioSpec, SourceSpec
from netwin.signals import (
    BluetoothMetrics,
    CellularMetrics,
    DeviceDescriptor,
    EnvironmentMetrics,
    Metrics,
    SignalKind,
    SignalReading,
    WiFiMetrics,
    encode_reading,
)

logger = logging.getLogger(__name__)

MIN_DISTANCE_M = 0.1


class UnknownDevice(KeyError):
    pass


class UnsupportedCommand(ValueError):
    pass


class InvalidInterface(ValueError):
    pass


def rssi_at(
    source: SourceSpec,
    device_position: tuple[float, float],
    noise_db: float = 0.0,
    path_loss_exponent: float = 2.0,
) -> float:
    """Log-distance path loss: tx_power - 10*n*log10(d / 1 m) + noise."""
    dx = source.position[0] - device_position[0]
    dy = source.position[1] - device_position[1]
    distance = max(math.hypot(dx, dy), MIN_DISTANCE_M)
    return source.tx_power_dbm - 10.0 * path_loss_exponent * math.log10(distance) + noise_db


@dataclass(frozen=True)
class GroundTruth:
    """Expected twin-graph shape at one instant, noise-free."""

    device_ids: frozenset[str]
    detectable: frozenset[tuple[str, str]]  # (device_id, source_id)
    mean_rssi_dbm: dict[tuple[str, str], float]
    env_sensor_ids: frozenset[str]

    @property
    def expected_node_ids(self) -> frozenset[str]:
        sources = {source_id for _, source_id in self.detectable}
        return self.device_ids | frozenset(sources) | self.env_sensor_ids


@dataclass
class _DeviceState:
    spec: DeviceSpec
    active_interface: SignalKind
    report_period_ms: dict[SignalKind, int]
    paused: bool = False
    last_fault_payload: dict[SignalKind, str] = field(default_factory=dict)


class Simulator:
    """Owns all mutable simulation state; drive it from a single task.

    ``step`` advances simulated time and emits every reading due in the
    elapsed window. Emissions go through the ``emit`` callback (by default
    a bus publish on ``netwin/raw/<device>/<kind>``).
    """

    def __init__(
        self,
        spec: ScenarioSpec,
        bus_client: BusClient | None = None,
        emit: Callable[[str, str], None] | None = None,
        seed: int | None = None,
        timestamp_base_ms: int = 0,
    ) -> None:
        self.spec = spec
        self.seed = spec.rng_seed if seed is None else seed
        # Reading timestamps are base + simulated offset; realtime runs anchor
        # the base at the wall clock so eviction sweeps share the time axis.
        self.timestamp_base_ms = timestamp_base_ms
        self._bus = bus_client
        if emit is not None:
            self._emit = emit
        elif bus_client is not None:
            self._emit = lambda topic, payload: bus_client.publish(topic, payload.encode("utf-8"))
        else:
            self._emit = lambda topic, payload: None
        self._now_ms = 0
        self._devices: dict[str, _DeviceState] = {}
        for device in spec.devices:
            self._devices[device.device_id] = _DeviceState(
                spec=device,
                active_interface=device.active_interface,
                report_period_ms=dict(device.report_period_ms),
            )
        self._sources_by_kind: dict[SignalKind, list[SourceSpec]] = {}
        for source in spec.sources:
            self._sources_by_kind.setdefault(source.kind, []).append(source)
        self._noise_rng: dict[str, random.Random] = {}
        self._fault_rng: dict[str, random.Random] = {}
        self._action_sub: Subscription | None = None
        self.emitted_count = 0

    # -- deterministic per-entity randomness

    def _rng(self, table: dict[str, random.Random], entity_id: str) -> random.Random:
        rng = table.get(entity_id)
        if rng is None:
            rng = random.Random(f"{self.seed}/{entity_id}")
            table[entity_id] = rng
        return rng

    def _poisson(self, rng: random.Random, rate: float) -> int:
        if rate <= 0:
            return 0
        # Knuth's method; rates here are single digits per window.
        limit = math.exp(-rate)
        count, product = 0, rng.random()
        while product > limit:
            count += 1
            product *= rng.random()
        return count

    # -- event timeline

    def _joined_at(self, device_id: str, t_ms: int) -> bool:
        events = sorted(
            (e for e in self.spec.events if e.device_id == device_id), key=lambda e: e.at_ms
        )
        if not events:
            return True
        # A device with a scripted join starts absent; otherwise present.
        joined = not any(e.event == "join" for e in events)
        for event in events:
            if event.at_ms <= t_ms:
                joined = event.event == "join"
        return joined

    # -- propagation

    def mean_rssi(self, source: SourceSpec, position: tuple[float, float]) -> float:
        return rssi_at(source, position, 0.0, self.spec.path_loss_exponent)

    def _detectable_sources(self, device: DeviceSpec, kind: SignalKind) -> list[SourceSpec]:
        return [
            source
            for source in self._sources_by_kind.get(kind, [])
            if self.mean_rssi(source, device.position) >= self.spec.detection_threshold_dbm
        ]

    # -- stepping

    def step(self, simulation_time_ms: int) -> list[SignalReading]:
        """Emit all readings due in (previous time, simulation_time_ms].

        Report boundaries are the multiples of each report period. Emissions
        are globally ordered by (time, device order, kind, source order) so a
        run is reproducible and the raw stream is time-sorted.
        """
        if simulation_time_ms < self._now_ms:
            raise ValueError("simulation time must be non-decreasing")
        start = self._now_ms
        self._now_ms = simulation_time_ms

        due: list[tuple[int, int, int, str]] = []  # (t, group, entity index, kind)
        device_order = {device_id: i for i, device_id in enumerate(self._devices)}
        for device_id, state in self._devices.items():
            if state.paused:
                continue
            for kind in sorted(state.spec.capabilities, key=lambda k: k.value):
                period = state.report_period_ms.get(kind)
                if not period:
                    continue
                first = (start // period + 1) * period
                for boundary in range(first, simulation_time_ms + 1, period):
                    if self._joined_at(device_id, boundary):
                        due.append((boundary, 0, device_order[device_id], kind.value))
        for index, sensor in enumerate(self.spec.env_sensors):
            period = sensor.report_period_ms
            first = (start // period + 1) * period
            for boundary in range(first, simulation_time_ms + 1, period):
                due.append((boundary, 1, index, ""))
        due.sort()

        devices = list(self._devices.values())
        emitted: list[SignalReading] = []
        for boundary, group, index, kind_value in due:
            if group == 0:
                emitted.extend(
                    self._emit_device_kind(devices[index], SignalKind(kind_value), boundary)
                )
            else:
                emitted.append(self._emit_env(self.spec.env_sensors[index], boundary))
        self.emitted_count += len(emitted)
        return emitted

    @property
    def now_ms(self) -> int:
        return self._now_ms

    def _emit_device_kind(self, state: _DeviceState, kind: SignalKind, t_ms: int) -> list[SignalReading]:
        device = state.spec
        descriptor = DeviceDescriptor(
            device_id=device.device_id,
            model_name=device.model_name,
            capabilities=device.capabilities,
            app_version=device.app_version,
            active_interface=state.active_interface,
        )
        rng = self._rng(self._noise_rng, device.device_id)
        readings = []
        for source in self._detectable_sources(device, kind):
            noise = rng.gauss(0.0, self.spec.shadow_sigma_db)
            rssi = rssi_at(source, device.position, noise, self.spec.path_loss_exponent)
            metrics = self._metrics_for(source, rssi)
            reading = SignalReading(
                device=descriptor,
                kind=kind,
                timestamp_ms=self.timestamp_base_ms + t_ms,
                source_id=source.source_id,
                metrics=metrics,
            )
            readings.append(self._publish(state, reading))
        return readings

    def _metrics_for(self, source: SourceSpec, rssi_dbm: float) -> Metrics:
        attrs = source.attributes
        if source.kind is SignalKind.CELLULAR:
            network_type = str(attrs.get("network_type", "LTE"))
            rsrp = rssi_dbm - self.spec.rsrp_offset_db if network_type in ("LTE", "NR") else None
            return CellularMetrics(
                network_type=network_type,
                frequency_mhz=float(attrs.get("frequency_mhz", 1800.0)),
                rssi_dbm=rssi_dbm,
                rsrp_dbm=rsrp,
                cell_id=str(attrs.get("cell_id", source.source_id)),
            )
        if source.kind is SignalKind.WIFI:
            return WiFiMetrics(
                ssid=str(attrs.get("ssid", "")),
                bssid=str(attrs.get("bssid", "02:00:00:00:00:01")),
                frequency_mhz=float(attrs.get("frequency_mhz", 2412.0)),
                rssi_dbm=rssi_dbm,
                channel=int(attrs.get("channel", 1)),
            )
        return BluetoothMetrics(
            peer_address=str(attrs.get("peer_address", "02:00:00:00:00:02")),
            rssi_dbm=rssi_dbm,
            device_name=attrs.get("device_name"),
        )

    def _emit_env(self, sensor: EnvSensorSpec, t_ms: int) -> SignalReading:
        rng = self._rng(self._noise_rng, sensor.sensor_id)
        descriptor = DeviceDescriptor(
            device_id=sensor.sensor_id,
            model_name="env-sensor",
            capabilities=frozenset({SignalKind.ENVIRONMENT}),
            app_version="1.0.0",
        )
        metrics = EnvironmentMetrics(
            pm25_ugm3=max(0.0, sensor.pm25_mean + rng.gauss(0.0, sensor.pm25_sigma)),
            co2_ppm=max(0.0, sensor.co2_mean + rng.gauss(0.0, sensor.co2_sigma)),
            motion_count=self._poisson(rng, sensor.rate_at(t_ms)),
        )
        reading = SignalReading(
            device=descriptor,
            kind=SignalKind.ENVIRONMENT,
            timestamp_ms=self.timestamp_base_ms + t_ms,
            source_id=sensor.sensor_id,
            metrics=metrics,
        )
        self._emit(topic_for("raw", sensor.sensor_id, SignalKind.ENVIRONMENT), encode_reading(reading))
        return reading

    def _publish(self, state: _DeviceState, reading: SignalReading) -> SignalReading:
        faults = self.spec.faults
        payload = None
        if faults.out_of_bounds_rate or faults.duplicate_rate or faults.stale_rate:
            fault_rng = self._rng(self._fault_rng, state.spec.device_id)
            roll = fault_rng.random()
            if roll < faults.out_of_bounds_rate:
                reading = _corrupt_rssi(reading)
            elif roll < faults.out_of_bounds_rate + faults.stale_rate:
                stale_ms = 10_000 + int(fault_rng.random() * 50_000)
                if reading.timestamp_ms > stale_ms:
                    reading = SignalReading(
                        device=reading.device,
                        kind=reading.kind,
                        timestamp_ms=reading.timestamp_ms - stale_ms,
                        source_id=reading.source_id,
                        metrics=reading.metrics,
                    )
            elif roll < faults.out_of_bounds_rate + faults.stale_rate + faults.duplicate_rate:
                payload = state.last_fault_payload.get(reading.kind)
        if payload is None:
            payload = encode_reading(reading)
        state.last_fault_payload[reading.kind] = payload
        self._emit(topic_for("raw", state.spec.device_id, reading.kind), payload)
        return reading

    # -- actions (feedback loop)

    def apply_action(self, command: ActionCommand) -> None:
        state = self._devices.get(command.device_id)
        if state is None:
            raise UnknownDevice(command.device_id)
        if command.verb == "set_primary_interface":
            kind = SignalKind(command.arguments["kind"])
            if kind not in state.spec.capabilities:
                raise InvalidInterface(f"{command.device_id} has no {kind.value} interface")
            state.active_interface = kind
        elif command.verb == "set_report_period":
            kind = SignalKind(command.arguments["kind"])
            state.report_period_ms[kind] = int(command.arguments["period_ms"])
        elif command.verb == "pause":
            state.paused = True
        elif command.verb == "resume":
            state.paused = False
        else:
            raise UnsupportedCommand(command.verb)

    def attach_action_stream(self, bus_client: BusClient) -> Subscription:
        self._action_sub = bus_client.subscribe("netwin/actions/+")
        return self._action_sub

    def pump_actions(self) -> int:
        """Apply queued action commands; returns how many were applied."""
        if self._action_sub is None:
            return 0
        applied = 0
        while True:
            message = self._action_sub.pop_nowait()
            if message is None:
                return applied
            try:
                self.apply_action(decode_action(message.payload))
                applied += 1
            except (KeyError, ValueError) as exc:
                logger.warning("dropping bad action on %s: %s", message.topic, exc)

    # -- ground truth

    def ground_truth(self, simulation_time_ms: int | None = None) -> GroundTruth:
        t_ms = self._now_ms if simulation_time_ms is None else simulation_time_ms
        device_ids = set()
        detectable = set()
        strengths: dict[tuple[str, str], float] = {}
        for device_id, state in self._devices.items():
            if not self._joined_at(device_id, t_ms) or state.paused:
                continue
            device_ids.add(device_id)
            for kind in state.spec.capabilities:
                if not state.report_period_ms.get(kind):
                    continue
                for source in self._detectable_sources(state.spec, kind):
                    detectable.add((device_id, source.source_id))
                    strengths[(device_id, source.source_id)] = self.mean_rssi(
                        source, state.spec.position
                    )
        return GroundTruth(
            device_ids=frozenset(device_ids),
            detectable=frozenset(detectable),
            mean_rssi_dbm=strengths,
            env_sensor_ids=frozenset(s.sensor_id for s in self.spec.env_sensors),
        )


def _corrupt_rssi(reading: SignalReading) -> SignalReading:
    from dataclasses import replace

    metrics = reading.metrics
    if hasattr(metrics, "rssi_dbm"):
        metrics = replace(metrics, rssi_dbm=-200.0)
    elif isinstance(metrics, EnvironmentMetrics):
        metrics = replace(metrics, co2_ppm=99_999.0)
    return replace(reading, metrics=metrics)
