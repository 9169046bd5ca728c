"""Domain types and wire codec for multi-RAT signal readings.

Every reading that flows on the bus is one timestamped observation of a
cellular / Wi-Fi / Bluetooth signal (or an environmental sensor sample)
made by one device. This module owns the JSON wire schema, the canonical
encoder, range validation, and representational normalization. Everything
here is an immutable value; all operations are pure functions.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping


class SignalKind(str, Enum):
    """Closed set of signal families understood by the platform."""

    CELLULAR = "cellular"
    WIFI = "wifi"
    BLUETOOTH = "bluetooth"
    ENVIRONMENT = "environment"

    def __str__(self) -> str:  # topic segments, wire values
        return self.value


CELLULAR_NETWORK_TYPES = frozenset({"LTE", "NR", "UMTS", "GSM"})

# 6 colon-separated hex octets; case-insensitive on input, lower-case is the
# canonical (normalized) form.
_HW_ADDRESS_RE = re.compile(r"^[0-9a-fA-F]{2}(:[0-9a-fA-F]{2}){5}$")


class SchemaError(ValueError):
    """A wire document violates the reading schema.

    Carries the path of the first offending field (checked in a fixed,
    documented order) and a human-readable reason.
    """

    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"{path or '<document>'}: {reason}")


@dataclass(frozen=True)
class DeviceDescriptor:
    """Identity block shared by every reading a device emits."""

    device_id: str
    model_name: str
    capabilities: frozenset[SignalKind]
    app_version: str
    active_interface: SignalKind | None = None

    def __post_init__(self) -> None:
        if not self.device_id:
            raise ValueError("device_id must be non-empty")
        if not self.model_name:
            raise ValueError("model_name must be non-empty")
        if not self.capabilities:
            raise ValueError("capabilities must be non-empty")
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))


@dataclass(frozen=True)
class CellularMetrics:
    network_type: str
    frequency_mhz: float
    rssi_dbm: float
    cell_id: str
    rsrp_dbm: float | None = None
    rsrq_db: float | None = None

    def __post_init__(self) -> None:
        if self.network_type.upper() not in CELLULAR_NETWORK_TYPES:
            raise ValueError(f"unknown network_type {self.network_type!r}")
        if not self.frequency_mhz > 0:
            raise ValueError("frequency_mhz must be > 0")
        if self.rsrp_dbm is not None and self.network_type.upper() not in ("LTE", "NR"):
            raise ValueError("rsrp_dbm only valid for LTE/NR")


@dataclass(frozen=True)
class WiFiMetrics:
    ssid: str
    bssid: str
    frequency_mhz: float
    rssi_dbm: float
    channel: int

    def __post_init__(self) -> None:
        if not _HW_ADDRESS_RE.match(self.bssid):
            raise ValueError(f"bssid {self.bssid!r} is not a 6-octet colon form")
        if not self.frequency_mhz > 0:
            raise ValueError("frequency_mhz must be > 0")
        if self.channel <= 0:
            raise ValueError("channel must be positive")


@dataclass(frozen=True)
class BluetoothMetrics:
    peer_address: str
    rssi_dbm: float
    device_name: str | None = None

    def __post_init__(self) -> None:
        if not _HW_ADDRESS_RE.match(self.peer_address):
            raise ValueError(f"peer_address {self.peer_address!r} is not a 6-octet colon form")


@dataclass(frozen=True)
class EnvironmentMetrics:
    pm25_ugm3: float
    co2_ppm: float
    motion_count: int

    def __post_init__(self) -> None:
        if self.pm25_ugm3 < 0:
            raise ValueError("pm25_ugm3 must be >= 0")
        if self.co2_ppm < 0:
            raise ValueError("co2_ppm must be >= 0")
        if self.motion_count < 0:
            raise ValueError("motion_count must be >= 0")


Metrics = CellularMetrics | WiFiMetrics | BluetoothMetrics | EnvironmentMetrics

METRICS_CLASS_BY_KIND: dict[SignalKind, type] = {
    SignalKind.CELLULAR: CellularMetrics,
    SignalKind.WIFI: WiFiMetrics,
    SignalKind.BLUETOOTH: BluetoothMetrics,
    SignalKind.ENVIRONMENT: EnvironmentMetrics,
}

# Float-valued metrics eligible for streaming smoothing, per kind. Integer
# counters (motion_count) and static attributes are excluded.
SMOOTHABLE_METRICS: dict[SignalKind, tuple[str, ...]] = {
    SignalKind.CELLULAR: ("rssi_dbm", "rsrp_dbm", "rsrq_db"),
    SignalKind.WIFI: ("rssi_dbm",),
    SignalKind.BLUETOOTH: ("rssi_dbm",),
    SignalKind.ENVIRONMENT: ("pm25_ugm3", "co2_ppm"),
}


@dataclass(frozen=True)
class SignalReading:
    """One observation of one signal source by one device.

    ``smoothed`` maps metric name to its smoothed value and is only populated
    on curated readings; raw readings carry an empty map.
    """

    device: DeviceDescriptor
    kind: SignalKind
    timestamp_ms: int
    source_id: str
    metrics: Metrics
    curated: bool = False
    smoothed: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.timestamp_ms <= 0:
            raise ValueError("timestamp_ms must be > 0")
        if not self.source_id:
            raise ValueError("source_id must be non-empty")
        expected = METRICS_CLASS_BY_KIND[self.kind]
        if not isinstance(self.metrics, expected):
            raise ValueError(f"metrics record does not match kind {self.kind}")
        object.__setattr__(self, "smoothed", dict(self.smoothed))


# ---------------------------------------------------------------------------
# Decoding


def _require(obj: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}{key}", "required field missing")
    return obj[key]


def _str_field(obj: Mapping[str, Any], key: str, path: str, allow_empty: bool = False) -> str:
    value = _require(obj, key, path)
    if not isinstance(value, str):
        raise SchemaError(f"{path}{key}", f"expected string, got {type(value).__name__}")
    if not value and not allow_empty:
        raise SchemaError(f"{path}{key}", "must be non-empty")
    return value


def _number_field(obj: Mapping[str, Any], key: str, path: str) -> float:
    value = _require(obj, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}{key}", f"expected number, got {type(value).__name__}")
    return float(value)


def _int_field(obj: Mapping[str, Any], key: str, path: str) -> int:
    value = _require(obj, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}{key}", f"expected integer, got {type(value).__name__}")
    return value


def _optional_number(obj: Mapping[str, Any], key: str, path: str) -> float | None:
    if key not in obj or obj[key] is None:
        return None
    return _number_field(obj, key, path)


def _decode_kind(value: Any, path: str) -> SignalKind:
    if not isinstance(value, str):
        raise SchemaError(path, f"expected string, got {type(value).__name__}")
    try:
        return SignalKind(value)
    except ValueError:
        raise SchemaError(path, f"unknown signal kind {value!r}") from None


def _decode_device(obj: Any) -> DeviceDescriptor:
    if not isinstance(obj, dict):
        raise SchemaError("device", "expected object")
    device_id = _str_field(obj, "id", "device.")
    model = _str_field(obj, "model", "device.")
    caps_raw = _require(obj, "capabilities", "device.")
    if not isinstance(caps_raw, list) or not caps_raw:
        raise SchemaError("device.capabilities", "expected non-empty array")
    capabilities = frozenset(_decode_kind(c, "device.capabilities") for c in caps_raw)
    app_version = _str_field(obj, "app_version", "device.")
    active = obj.get("active_interface")
    active_interface = None if active is None else _decode_kind(active, "device.active_interface")
    return DeviceDescriptor(
        device_id=device_id,
        model_name=model,
        capabilities=capabilities,
        app_version=app_version,
        active_interface=active_interface,
    )


def _decode_cellular(obj: Mapping[str, Any]) -> CellularMetrics:
    p = "metrics."
    network_type = _str_field(obj, "network_type", p)
    if network_type.upper() not in CELLULAR_NETWORK_TYPES:
        raise SchemaError(p + "network_type", f"unknown network type {network_type!r}")
    frequency = _number_field(obj, "frequency_mhz", p)
    if not frequency > 0:
        raise SchemaError(p + "frequency_mhz", "must be > 0")
    rssi = _number_field(obj, "rssi_dbm", p)
    rsrp = _optional_number(obj, "rsrp_dbm", p)
    if rsrp is not None and network_type.upper() not in ("LTE", "NR"):
        raise SchemaError(p + "rsrp_dbm", f"not valid for network type {network_type!r}")
    rsrq = _optional_number(obj, "rsrq_db", p)
    cell_id = _str_field(obj, "cell_id", p)
    return CellularMetrics(
        network_type=network_type,
        frequency_mhz=frequency,
        rssi_dbm=rssi,
        rsrp_dbm=rsrp,
        rsrq_db=rsrq,
        cell_id=cell_id,
    )


def _decode_wifi(obj: Mapping[str, Any]) -> WiFiMetrics:
    p = "metrics."
    ssid = _str_field(obj, "ssid", p, allow_empty=True)
    bssid = _str_field(obj, "bssid", p)
    if not _HW_ADDRESS_RE.match(bssid):
        raise SchemaError(p + "bssid", f"{bssid!r} is not a 6-octet colon form")
    frequency = _number_field(obj, "frequency_mhz", p)
    if not frequency > 0:
        raise SchemaError(p + "frequency_mhz", "must be > 0")
    rssi = _number_field(obj, "rssi_dbm", p)
    channel = _int_field(obj, "channel", p)
    if channel <= 0:
        raise SchemaError(p + "channel", "must be positive")
    return WiFiMetrics(ssid=ssid, bssid=bssid, frequency_mhz=frequency, rssi_dbm=rssi, channel=channel)


def _decode_bluetooth(obj: Mapping[str, Any]) -> BluetoothMetrics:
    p = "metrics."
    peer = _str_field(obj, "peer_address", p)
    if not _HW_ADDRESS_RE.match(peer):
        raise SchemaError(p + "peer_address", f"{peer!r} is not a 6-octet colon form")
    rssi = _number_field(obj, "rssi_dbm", p)
    name = obj.get("device_name")
    if name is not None and not isinstance(name, str):
        raise SchemaError(p + "device_name", f"expected string, got {type(name).__name__}")
    return BluetoothMetrics(peer_address=peer, rssi_dbm=rssi, device_name=name)


def _decode_environment(obj: Mapping[str, Any]) -> EnvironmentMetrics:
    p = "metrics."
    pm25 = _number_field(obj, "pm25_ugm3", p)
    if pm25 < 0:
        raise SchemaError(p + "pm25_ugm3", "must be >= 0")
    co2 = _number_field(obj, "co2_ppm", p)
    if co2 < 0:
        raise SchemaError(p + "co2_ppm", "must be >= 0")
    motion = _int_field(obj, "motion_count", p)
    if motion < 0:
        raise SchemaError(p + "motion_count", "must be >= 0")
    return EnvironmentMetrics(pm25_ugm3=pm25, co2_ppm=co2, motion_count=motion)


_METRIC_DECODERS = {
    SignalKind.CELLULAR: _decode_cellular,
    SignalKind.WIFI: _decode_wifi,
    SignalKind.BLUETOOTH: _decode_bluetooth,
    SignalKind.ENVIRONMENT: _decode_environment,
}


def decode_reading(document: str | bytes) -> SignalReading:
    """Decode one wire document into a typed reading.

    Fields are checked in a fixed order (device block, kind, timestamp_ms,
    source_id, metrics) so the reported SchemaError always names the first
    offending field. Unknown keys are ignored; missing required keys, wrong
    types, and unknown enum values are errors.
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError("", f"invalid UTF-8: {exc}") from None
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError("", "top-level value must be an object")

    device = _decode_device(_require(doc, "device", ""))
    kind = _decode_kind(_require(doc, "kind", "kind"), "kind")
    timestamp_ms = _int_field(doc, "timestamp_ms", "")
    if timestamp_ms <= 0:
        raise SchemaError("timestamp_ms", "must be > 0")
    source_id = _str_field(doc, "source_id", "")

    metrics_raw = _require(doc, "metrics", "")
    if not isinstance(metrics_raw, dict):
        raise SchemaError("metrics", "expected object")
    metrics = _METRIC_DECODERS[kind](metrics_raw)

    curated = doc.get("curated", False)
    if not isinstance(curated, bool):
        raise SchemaError("curated", f"expected boolean, got {type(curated).__name__}")

    smoothed: dict[str, float] = {}
    for name in SMOOTHABLE_METRICS[kind]:
        key = f"{name}_smoothed"
        if key in metrics_raw and metrics_raw[key] is not None:
            value = metrics_raw[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError(f"metrics.{key}", f"expected number, got {type(value).__name__}")
            smoothed[name] = float(value)

    return SignalReading(
        device=device,
        kind=kind,
        timestamp_ms=timestamp_ms,
        source_id=source_id,
        metrics=metrics,
        curated=curated,
        smoothed=smoothed,
    )


# ---------------------------------------------------------------------------
# Encoding


def _wire_number(value: float) -> int | float:
    # Integral floats are rendered as integers so equal readings always
    # produce byte-identical documents regardless of how they were built.
    if isinstance(value, float) and value.is_integer() and abs(value) < 2**53:
        return int(value)
    return value


def _metrics_doc(reading: SignalReading) -> dict[str, Any]:
    m = reading.metrics
    if isinstance(m, CellularMetrics):
        doc: dict[str, Any] = {
            "network_type": m.network_type,
            "frequency_mhz": _wire_number(m.frequency_mhz),
            "rssi_dbm": _wire_number(m.rssi_dbm),
            "cell_id": m.cell_id,
        }
        if m.rsrp_dbm is not None:
            doc["rsrp_dbm"] = _wire_number(m.rsrp_dbm)
        if m.rsrq_db is not None:
            doc["rsrq_db"] = _wire_number(m.rsrq_db)
    elif isinstance(m, WiFiMetrics):
        doc = {
            "ssid": m.ssid,
            "bssid": m.bssid,
            "frequency_mhz": _wire_number(m.frequency_mhz),
            "rssi_dbm": _wire_number(m.rssi_dbm),
            "channel": m.channel,
        }
    elif isinstance(m, BluetoothMetrics):
        doc = {"peer_address": m.peer_address, "rssi_dbm": _wire_number(m.rssi_dbm)}
        if m.device_name is not None:
            doc["device_name"] = m.device_name
    else:
        doc = {
            "pm25_ugm3": _wire_number(m.pm25_ugm3),
            "co2_ppm": _wire_number(m.co2_ppm),
            "motion_count": m.motion_count,
        }
    for name, value in reading.smoothed.items():
        doc[f"{name}_smoothed"] = _wire_number(value)
    return doc


def canonical_json(doc: Any) -> str:
    """Serialize with sorted keys, no insignificant whitespace, minimal numbers."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def encode_reading(reading: SignalReading) -> str:
    """Encode a reading into its canonical wire document.

    Keys are sorted, optional fields that are absent are omitted entirely
    (never null), and ``decode_reading(encode_reading(r))`` reproduces ``r``
    field for field.
    """
    device_doc: dict[str, Any] = {
        "id": reading.device.device_id,
        "model": reading.device.model_name,
        "capabilities": sorted(k.value for k in reading.device.capabilities),
        "app_version": reading.device.app_version,
    }
    if reading.device.active_interface is not None:
        device_doc["active_interface"] = reading.device.active_interface.value
    doc: dict[str, Any] = {
        "device": device_doc,
        "kind": reading.kind.value,
        "timestamp_ms": reading.timestamp_ms,
        "source_id": reading.source_id,
        "metrics": _metrics_doc(reading),
    }
    if reading.curated:
        doc["curated"] = True
    return canonical_json(doc)


# ---------------------------------------------------------------------------
# Validation

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "rssi_dbm": (-120.0, -20.0),
    "rsrp_dbm": (-140.0, -44.0),
    "rsrq_db": (-24.0, 0.0),
    "co2_ppm": (0.0, 10000.0),
    "pm25_ugm3": (0.0, 1000.0),
}

# Metrics are checked in this order per kind so Reject always names the
# first out-of-bounds metric deterministically.
VALIDATION_FIELD_ORDER: dict[SignalKind, tuple[str, ...]] = {
    SignalKind.CELLULAR: ("rssi_dbm", "rsrp_dbm", "rsrq_db", "frequency_mhz"),
    SignalKind.WIFI: ("rssi_dbm", "frequency_mhz"),
    SignalKind.BLUETOOTH: ("rssi_dbm",),
    SignalKind.ENVIRONMENT: ("pm25_ugm3", "co2_ppm", "motion_count"),
}


@dataclass(frozen=True)
class ValidationBounds:
    """Closed admissible interval per metric name, loaded from configuration."""

    intervals: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BOUNDS)
    )

    def __post_init__(self) -> None:
        clean: dict[str, tuple[float, float]] = {}
        for name, (low, high) in self.intervals.items():
            low, high = float(low), float(high)
            if low > high:
                raise ValueError(f"bounds for {name}: empty interval [{low}, {high}]")
            clean[name] = (low, high)
        object.__setattr__(self, "intervals", clean)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "ValidationBounds":
        merged = dict(DEFAULT_BOUNDS)
        for name, interval in mapping.items():
            merged[name] = (float(interval[0]), float(interval[1]))
        return cls(merged)


@dataclass(frozen=True)
class Accept:
    pass


@dataclass(frozen=True)
class Reject:
    metric: str
    value: float
    interval: tuple[float, float]


ValidationVerdict = Accept | Reject

ACCEPT = Accept()


def validate_reading(reading: SignalReading, bounds: ValidationBounds) -> ValidationVerdict:
    """Check every bounded metric of a reading against its configured interval.

    Total: never raises; rejection is a value naming the first out-of-bounds
    metric in the kind's documented field order.
    """
    for name in VALIDATION_FIELD_ORDER[reading.kind]:
        interval = bounds.intervals.get(name)
        if interval is None:
            continue
        value = getattr(reading.metrics, name, None)
        if value is None:
            continue
        low, high = interval
        value = float(value)
        if math.isnan(value) or not (low <= value <= high):
            return Reject(metric=name, value=value, interval=interval)
    return ACCEPT


# ---------------------------------------------------------------------------
# Normalization


def normalize_reading(reading: SignalReading) -> SignalReading:
    """Canonicalize representational variants; numeric metrics never change.

    Lower-cases hardware addresses, upper-cases the cellular network type,
    trims SSID whitespace. Idempotent.
    """
    m = reading.metrics
    if isinstance(m, CellularMetrics):
        normalized: Metrics = replace(m, network_type=m.network_type.upper())
    elif isinstance(m, WiFiMetrics):
        normalized = replace(m, bssid=m.bssid.lower(), ssid=m.ssid.strip())
    elif isinstance(m, BluetoothMetrics):
        normalized = replace(m, peer_address=m.peer_address.lower())
    else:
        normalized = m
    if normalized is reading.metrics:
        return reading
    return replace(reading, metrics=normalized)
