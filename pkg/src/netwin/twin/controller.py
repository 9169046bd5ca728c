"""Reconciles curated readings into the twin graph.

Workflow per reading: authenticate once per session, ensure the device
model exists (create on first sight), ensure device and source twins,
ensure the detects relationship carrying the latest smoothed signal
strength, append KPI samples, and return the exact ChangeSet. Readings
whose timestamp does not advance an entity never regress its state, so
at-least-once delivery and reordering are harmless.
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
from typing import Any, Callable

from netwin.bus.base import BusClient, Subscription
from netwin.bus.topics import TOPIC_ROOT
from netwin.signals import (
    BluetoothMetrics,
    CellularMetrics,
    EnvironmentMetrics,
    SchemaError,
    SignalKind,
    SignalReading,
    WiFiMetrics,
    canonical_json,
    decode_reading,
)
from netwin.twin.store import DEFAULT_KPI_CAPACITY, TwinStore
from netwin.twin.types import (
    AuthenticationFailed,
    ChangeSet,
    Credentials,
    GraphView,
    Session,
    TwinInstance,
    UnknownTwin,
)

logger = logging.getLogger(__name__)

DEFAULT_SESSION_TTL_S = 3600.0
DEFAULT_TTL_MS = 60_000
DEFAULT_SWEEP_INTERVAL_MS = 10_000

DEVICE_PROPERTY_SCHEMA: tuple[tuple[str, str], ...] = (
    ("model_name", "string"),
    ("app_version", "string"),
    ("capabilities", "string_list"),
    ("active_interface", "string"),
)

SOURCE_MODELS: dict[SignalKind, tuple[str, tuple[tuple[str, str], ...]]] = {
    SignalKind.CELLULAR: (
        "cell",
        (("network_type", "string"), ("frequency_mhz", "number"), ("cell_id", "string")),
    ),
    SignalKind.WIFI: (
        "wifi-ap",
        (("ssid", "string"), ("bssid", "string"), ("channel", "integer"), ("frequency_mhz", "number")),
    ),
    SignalKind.BLUETOOTH: (
        "bt-peer",
        (("peer_address", "string"), ("device_name", "string")),
    ),
}


def _device_properties(reading: SignalReading) -> dict[str, Any]:
    properties: dict[str, Any] = {
        "model_name": reading.device.model_name,
        "app_version": reading.device.app_version,
        "capabilities": sorted(k.value for k in reading.device.capabilities),
    }
    if reading.device.active_interface is not None:
        properties["active_interface"] = reading.device.active_interface.value
    return properties


def _source_properties(reading: SignalReading) -> dict[str, Any]:
    m = reading.metrics
    if isinstance(m, CellularMetrics):
        return {"network_type": m.network_type, "frequency_mhz": m.frequency_mhz, "cell_id": m.cell_id}
    if isinstance(m, WiFiMetrics):
        return {"ssid": m.ssid, "bssid": m.bssid, "channel": m.channel, "frequency_mhz": m.frequency_mhz}
    if isinstance(m, BluetoothMetrics):
        properties: dict[str, Any] = {"peer_address": m.peer_address}
        if m.device_name is not None:
            properties["device_name"] = m.device_name
        return properties
    raise ValueError("environment readings have no signal source twin")


class TwinController:
    """Single-writer view over a TwinStore plus authentication and queries.

    All mutations are serialized through one lock; reads copy consistent
    views under the same lock.
    """

    def __init__(
        self,
        store: TwinStore | None = None,
        tokens: tuple[str, ...] = ("netwin-dev",),
        session_ttl_s: float = DEFAULT_SESSION_TTL_S,
        time_fn: Callable[[], float] = time.time,
        publish_event: Callable[[str], None] | None = None,
        kpi_capacity: int = DEFAULT_KPI_CAPACITY,
    ) -> None:
        self.store = store if store is not None else TwinStore(kpi_capacity=kpi_capacity)
        self._tokens = tuple(tokens)
        self._session_ttl_s = session_ttl_s
        self._time_fn = time_fn
        self._publish_event = publish_event
        self._lock = threading.RLock()
        self._session_ids = itertools.count(1)
        self._sessions: dict[str, Session] = {}

    # -- authentication

    def authenticate(self, credentials: Credentials | str) -> Session:
        token = credentials.token if isinstance(credentials, Credentials) else credentials
        if token not in self._tokens:
            raise AuthenticationFailed("unknown token")
        session = Session(
            session_id=f"s{next(self._session_ids)}",
            principal=f"token-{self._tokens.index(token)}",
            expires_at_s=self._time_fn() + self._session_ttl_s,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def check_token(self, token: str) -> bool:
        return token in self._tokens

    def _require(self, session: Session) -> None:
        with self._lock:
            live = self._sessions.get(session.session_id)
        if live is None or self._time_fn() >= live.expires_at_s:
            raise AuthenticationFailed("session expired or unknown")

    # -- models

    def ensure_model(self, session: Session, name: str, schema) -> str:
        self._require(session)
        with self._lock:
            return self.store.ensure_model(name, schema)

    # -- reconciliation

    def reconcile(self, session: Session, reading: SignalReading) -> ChangeSet:
        self._require(session)
        with self._lock:
            if reading.kind is SignalKind.ENVIRONMENT:
                changeset = self._reconcile_environment(reading)
            else:
                changeset = self._reconcile_signal(reading)
            self.store.check_integrity()
        self._emit(changeset)
        return changeset

    def _ensure_instance(
        self,
        model_id: str,
        external_id: str,
        properties: dict[str, Any],
        timestamp_ms: int,
        added: list[str],
        updated: list[str],
    ) -> TwinInstance:
        instance = self.store.find_instance(model_id, external_id)
        if instance is None:
            instance = self.store.create_instance(model_id, external_id, properties, timestamp_ms)
            added.append(instance.twin_id)
            return instance
        if timestamp_ms > instance.last_updated_ms:
            instance = self.store.update_instance(instance.twin_id, properties, timestamp_ms)
            updated.append(instance.twin_id)
        return instance

    def _reconcile_signal(self, reading: SignalReading) -> ChangeSet:
        added_i: list[str] = []
        updated_i: list[str] = []
        added_r: list[str] = []
        updated_r: list[str] = []
        t = reading.timestamp_ms

        device_model = self.store.ensure_model(reading.device.model_name, DEVICE_PROPERTY_SCHEMA)
        device_twin = self._ensure_instance(
            device_model, reading.device.device_id, _device_properties(reading), t, added_i, updated_i
        )

        source_model_name, source_schema = SOURCE_MODELS[reading.kind]
        source_model = self.store.ensure_model(source_model_name, source_schema)
        source_twin = self._ensure_instance(
            source_model, reading.source_id, _source_properties(reading), t, added_i, updated_i
        )

        strength = reading.smoothed.get("rssi_dbm", getattr(reading.metrics, "rssi_dbm"))
        relationship = self.store.find_relationship(device_twin.twin_id, source_twin.twin_id)
        if relationship is None:
            relationship = self.store.create_relationship(
                device_twin.twin_id, source_twin.twin_id, strength, t
            )
            added_r.append(relationship.rel_id)
        elif t > relationship.last_updated_ms:
            relationship = self.store.update_relationship(relationship.rel_id, strength, t)
            updated_r.append(relationship.rel_id)

        self._append_signal_kpis(relationship.rel_id, reading)
        return ChangeSet(
            added_instances=tuple(added_i),
            updated_instances=tuple(updated_i),
            added_relationships=tuple(added_r),
            updated_relationships=tuple(updated_r),
        )

    def _reconcile_environment(self, reading: SignalReading) -> ChangeSet:
        added_i: list[str] = []
        updated_i: list[str] = []
        model_id = self.store.ensure_model(reading.device.model_name, DEVICE_PROPERTY_SCHEMA)
        twin = self._ensure_instance(
            model_id, reading.source_id, _device_properties(reading), reading.timestamp_ms, added_i, updated_i
        )
        metrics: EnvironmentMetrics = reading.metrics
        t = reading.timestamp_ms
        self.store.kpi_append(twin.twin_id, "pm25_ugm3", t, metrics.pm25_ugm3)
        self.store.kpi_append(twin.twin_id, "co2_ppm", t, metrics.co2_ppm)
        self.store.kpi_append(twin.twin_id, "motion_count", t, float(metrics.motion_count))
        for name, value in reading.smoothed.items():
            self.store.kpi_append(twin.twin_id, f"{name}_smoothed", t, value)
        return ChangeSet(added_instances=tuple(added_i), updated_instances=tuple(updated_i))

    def _append_signal_kpis(self, rel_id: str, reading: SignalReading) -> None:
        t = reading.timestamp_ms
        metrics = reading.metrics
        self.store.kpi_append(rel_id, "rssi_dbm", t, float(metrics.rssi_dbm))
        rsrp = getattr(metrics, "rsrp_dbm", None)
        if rsrp is not None:
            self.store.kpi_append(rel_id, "rsrp_dbm", t, float(rsrp))
        for name, value in reading.smoothed.items():
            if name in ("rssi_dbm", "rsrp_dbm"):
                self.store.kpi_append(rel_id, f"{name}_smoothed", t, value)

    # -- eviction

    def evict_stale(self, session: Session, now_ms: int, ttl_ms: int = DEFAULT_TTL_MS) -> ChangeSet:
        self._require(session)
        cutoff = now_ms - ttl_ms
        with self._lock:
            stale_rels = sorted(
                (r.rel_id for r in self.store.relationships.values() if r.last_updated_ms < cutoff),
                key=lambda rel_id: (len(rel_id), rel_id),
            )
            for rel_id in stale_rels:
                self.store.remove_relationship(rel_id)
            stale_twins = sorted(
                (
                    i.twin_id
                    for i in self.store.instances.values()
                    if i.last_updated_ms < cutoff and not self.store.relationships_of(i.twin_id)
                ),
                key=lambda twin_id: (len(twin_id), twin_id),
            )
            for twin_id in stale_twins:
                self.store.remove_instance(twin_id)
            self.store.check_integrity()
        changeset = ChangeSet(
            removed_instances=tuple(stale_twins),
            removed_relationships=tuple(stale_rels),
        )
        self._emit(changeset)
        return changeset

    def _emit(self, changeset: ChangeSet) -> None:
        if self._publish_event is None or changeset.empty:
            return
        self._publish_event(canonical_json(changeset.to_doc()))

    # -- queries (read-only, no session required)

    def query_graph(self, twin_id: str | None = None, model_name: str | None = None) -> GraphView:
        with self._lock:
            models = dict(self.store.models)
            if twin_id is not None:
                center = self.store.instances.get(twin_id)
                if center is None:
                    raise UnknownTwin(twin_id)
                relationships = self.store.relationships_of(twin_id)
                neighbor_ids = {center.twin_id}
                for relationship in relationships:
                    neighbor_ids.add(relationship.source_twin)
                    neighbor_ids.add(relationship.target_twin)
                instances = tuple(
                    self.store.instances[i]
                    for i in sorted(neighbor_ids, key=lambda x: (len(x), x))
                )
                return GraphView(instances=instances, relationships=tuple(relationships), models=models)
            instances = tuple(
                sorted(self.store.instances.values(), key=lambda i: (len(i.twin_id), i.twin_id))
            )
            relationships = tuple(
                sorted(self.store.relationships.values(), key=lambda r: (len(r.rel_id), r.rel_id))
            )
            if model_name is not None:
                model = self.store.model_named(model_name)
                model_id = None if model is None else model.model_id
                instances = tuple(i for i in instances if i.model_id == model_id)
                selected = {i.twin_id for i in instances}
                relationships = tuple(
                    r for r in relationships if r.source_twin in selected and r.target_twin in selected
                )
            return GraphView(instances=instances, relationships=relationships, models=models)

    def query_kpis(self, entity_id: str, metric: str, from_ms: int, to_ms: int) -> list[tuple[int, float]]:
        if from_ms > to_ms:
            raise ValueError("from must be <= to")
        with self._lock:
            return self.store.kpi_query(entity_id, metric, from_ms, to_ms)

    def find_device_twin(self, external_id: str) -> TwinInstance | None:
        with self._lock:
            return self.store.find_instance_by_external_id(external_id)

    def kpi_keys(self, entity_id: str | None = None) -> list[tuple[str, str]]:
        with self._lock:
            keys = sorted(self.store.kpis.keys())
        if entity_id is not None:
            keys = [k for k in keys if k[0] == entity_id]
        return keys

    # -- snapshots

    def snapshot(self) -> str:
        with self._lock:
            return self.store.snapshot()

    def restore(self, document: str | bytes) -> None:
        with self._lock:
            self.store = TwinStore.restore(document)


class ControllerService:
    """Bus-facing wrapper: consumes ``netwin/curated/#`` in arrival order,
    publishes graph-change events, runs periodic eviction sweeps."""

    def __init__(
        self,
        bus_client: BusClient,
        controller: TwinController | None = None,
        token: str = "netwin-dev",
        ttl_ms: int = DEFAULT_TTL_MS,
        sweep_interval_ms: int = DEFAULT_SWEEP_INTERVAL_MS,
    ) -> None:
        self.bus_client = bus_client
        self.controller = controller if controller is not None else TwinController(tokens=(token,))
        self.controller._publish_event = self._publish_event
        self.ttl_ms = ttl_ms
        self.sweep_interval_ms = sweep_interval_ms
        self._token = token
        self._session = self.controller.authenticate(token)
        self._subscription: Subscription = bus_client.subscribe(f"{TOPIC_ROOT}/curated/#")
        self._last_sweep_ms = 0
        self.decode_failures = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _publish_event(self, payload: str) -> None:
        self.bus_client.publish(f"{TOPIC_ROOT}/events/graph", payload.encode("utf-8"))

    def _session_ok(self) -> Session:
        try:
            self.controller._require(self._session)
        except AuthenticationFailed:
            self._session = self.controller.authenticate(self._token)
        return self._session

    def ingest(self, payload: bytes) -> ChangeSet | None:
        try:
            reading = decode_reading(payload)
        except SchemaError as exc:
            self.decode_failures += 1
            logger.warning("undecodable curated payload: %s", exc)
            return None
        return self.controller.reconcile(self._session_ok(), reading)

    def pump_once(self) -> int:
        processed = 0
        while True:
            message = self._subscription.pop_nowait()
            if message is None:
                return processed
            self.ingest(message.payload)
            processed += 1

    def sweep(self, now_ms: int) -> ChangeSet:
        """Run eviction if a sweep interval has elapsed since the last one."""
        if now_ms - self._last_sweep_ms < self.sweep_interval_ms:
            return ChangeSet()
        self._last_sweep_ms = now_ms
        return self.controller.evict_stale(self._session_ok(), now_ms, self.ttl_ms)

    def run_forever(self, poll_s: float = 0.05) -> None:
        while not self._stop.is_set():
            message = self._subscription.get(timeout=poll_s)
            if message is not None:
                self.ingest(message.payload)
            self.sweep(int(time.time() * 1000))

    def start(self) -> "ControllerService":
        self._thread = threading.Thread(target=self.run_forever, daemon=True, name="twin-controller")
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._subscription.close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
