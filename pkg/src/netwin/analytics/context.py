"""Analytics context: the immutable snapshot a pipeline run works on."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from netwin.signals import SignalKind

SeriesKey = tuple[str, str]  # (entity id, metric name)

Sample = tuple[int, float]


class EmptyScope(ValueError):
    """Nothing to analyze: the scope selected no series."""


@dataclass(frozen=True)
class MessageProfile:
    """Characteristics of the payload a device wants to send."""

    payload_bytes: int
    deadline_ms: float
    periodicity: str = "sporadic"  # "sporadic" | "periodic"

    def __post_init__(self) -> None:
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be > 0")
        if self.periodicity not in ("sporadic", "periodic"):
            raise ValueError(f"unknown periodicity {self.periodicity!r}")

    def to_doc(self) -> dict[str, Any]:
        return {
            "payload_bytes": self.payload_bytes,
            "deadline_ms": self.deadline_ms,
            "periodicity": self.periodicity,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "MessageProfile":
        return cls(
            payload_bytes=int(doc["payload_bytes"]),
            deadline_ms=float(doc["deadline_ms"]),
            periodicity=str(doc.get("periodicity", "sporadic")),
        )


@dataclass(frozen=True)
class CandidateLink:
    """One live detects-relationship usable as a communication candidate."""

    kind: SignalKind
    rel_id: str
    source_twin: str


@dataclass(frozen=True)
class DeviceScope:
    twin_id: str
    external_id: str
    active_interface: str | None
    links: tuple[CandidateLink, ...]


@dataclass(frozen=True)
class AnalyticsParams:
    """Stage configuration; defaults are the documented artifact defaults."""

    z_threshold: float = 2.5
    correlation_threshold: float = 0.7
    seasonality_threshold: float = 0.7
    horizon: int = 5
    holt_alpha: float = 0.5
    holt_beta: float = 0.3
    score_weights: tuple[float, float, float] = (0.6, 0.3, 0.1)  # quality, congestion, latency
    quality_ranges_dbm: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: {
            "cellular": (-110.0, -50.0),
            "wifi": (-90.0, -30.0),
            "bluetooth": (-100.0, -40.0),
        }
    )
    congestion: Mapping[str, float] = field(
        default_factory=lambda: {"cellular": 0.2, "wifi": 0.4, "bluetooth": 0.1}
    )
    nominal_latency_ms: Mapping[str, float] = field(
        default_factory=lambda: {"cellular": 60.0, "wifi": 15.0, "bluetooth": 100.0}
    )
    occupancy_weight: float = 0.3
    occupancy_ref_count: float = 10.0

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "AnalyticsParams":
        params = cls()
        known = {f for f in params.__dataclass_fields__}
        overrides: dict[str, Any] = {}
        for key, value in doc.items():
            if key not in known:
                raise ValueError(f"unknown analytics parameter {key!r}")
            if key == "score_weights":
                overrides[key] = tuple(float(v) for v in value)
            elif key == "quality_ranges_dbm":
                overrides[key] = {k: (float(lo), float(hi)) for k, (lo, hi) in value.items()}
            elif key in ("congestion", "nominal_latency_ms"):
                overrides[key] = {k: float(v) for k, v in value.items()}
            else:
                overrides[key] = type(getattr(params, key))(value)
        return replace(params, **overrides)


@dataclass(frozen=True)
class AnalyticsContext:
    window: tuple[int, int]
    series: Mapping[SeriesKey, tuple[Sample, ...]]
    devices: tuple[DeviceScope, ...] = ()
    params: AnalyticsParams = AnalyticsParams()
    scope: tuple[str, ...] | None = None  # twin ids; None means whole graph
    profile: MessageProfile | None = None

    def __post_init__(self) -> None:
        if self.window[0] > self.window[1]:
            raise ValueError("window must satisfy from <= to")
        clean: dict[SeriesKey, tuple[Sample, ...]] = {}
        for key, samples in self.series.items():
            ordered = sorted(samples, key=lambda s: s[0])
            # Collapse duplicate timestamps, keeping the latest value, so
            # cadence checks are well-defined.
            collapsed: list[Sample] = []
            for t, v in ordered:
                if collapsed and collapsed[-1][0] == t:
                    collapsed[-1] = (t, v)
                else:
                    collapsed.append((t, v))
            clean[key] = tuple(collapsed)
        object.__setattr__(self, "series", clean)


def series_summary(context: AnalyticsContext) -> list[dict[str, Any]]:
    """Compact per-series digest derived purely from the context; available
    to every stage's prompt."""
    out = []
    for (entity_id, metric), samples in sorted(context.series.items()):
        values = [v for _, v in samples]
        out.append(
            {
                "series": f"{entity_id}/{metric}",
                "count": len(samples),
                "first_ms": samples[0][0] if samples else None,
                "last_ms": samples[-1][0] if samples else None,
                "min": min(values) if values else None,
                "max": max(values) if values else None,
            }
        )
    return out


def context_from_controller(
    controller,
    window: tuple[int, int],
    scope: tuple[str, ...] | None = None,
    params: AnalyticsParams | None = None,
) -> AnalyticsContext:
    """Pull a consistent snapshot of KPI series and candidate topology.

    ``scope`` filters to the given twin ids (devices and sensors); None
    takes the whole graph.
    """
    view = controller.query_graph()
    by_id = {i.twin_id: i for i in view.instances}
    in_scope = set(scope) if scope is not None else set(by_id)

    series: dict[SeriesKey, tuple[Sample, ...]] = {}
    devices: list[DeviceScope] = []

    models = view.models
    source_model_names = {"cell", "wifi-ap", "bt-peer"}
    kind_by_model = {"cell": SignalKind.CELLULAR, "wifi-ap": SignalKind.WIFI, "bt-peer": SignalKind.BLUETOOTH}

    def pull(entity_id: str, metric: str) -> None:
        try:
            samples = controller.query_kpis(entity_id, metric, window[0], window[1])
        except KeyError:
            return
        if samples:
            series[(entity_id, metric)] = tuple(samples)

    for relationship in view.relationships:
        if relationship.source_twin not in in_scope and relationship.target_twin not in in_scope:
            continue
        for metric in ("rssi_dbm", "rssi_dbm_smoothed", "rsrp_dbm", "rsrp_dbm_smoothed"):
            pull(relationship.rel_id, metric)

    for instance in view.instances:
        if instance.twin_id not in in_scope:
            continue
        model = models.get(instance.model_id)
        model_name = model.name if model else ""
        if model_name in source_model_names:
            continue
        if "capabilities" in instance.properties and "environment" in instance.properties.get("capabilities", []):
            for metric in ("pm25_ugm3", "co2_ppm", "motion_count", "pm25_ugm3_smoothed", "co2_ppm_smoothed"):
                pull(instance.twin_id, metric)
            continue
        links = []
        for relationship in view.relationships:
            if relationship.source_twin != instance.twin_id:
                continue
            target = by_id.get(relationship.target_twin)
            target_model = models.get(target.model_id) if target else None
            kind = kind_by_model.get(target_model.name) if target_model else None
            if kind is not None:
                links.append(CandidateLink(kind=kind, rel_id=relationship.rel_id, source_twin=relationship.target_twin))
        if links:
            devices.append(
                DeviceScope(
                    twin_id=instance.twin_id,
                    external_id=instance.external_id,
                    active_interface=instance.properties.get("active_interface"),
                    links=tuple(links),
                )
            )

    return AnalyticsContext(
        window=window,
        series=series,
        devices=tuple(devices),
        params=params or AnalyticsParams(),
        scope=scope,
    )
