"""Prescriptive stage: rank a device's radio interfaces and recommend one.

Per candidate kind k the score is w_q*q(k) - w_c*c(k) - w_l*l(k):
q is the forecast signal quality mapped through the kind's reference dBm
range and then min-max normalized over the candidate set (so any shared
positive-affine distortion of the raw qualities cancels out); c is a
static congestion proxy optionally raised by forecast occupancy
(motion counts); l flags a kind whose nominal latency misses the message
deadline. Ties break lexicographically on kind name.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from netwin.actions import ActionCommand
from netwin.analytics.context import AnalyticsContext, DeviceScope, MessageProfile
from netwin.analytics.forecast import PredictiveReport


class NoCandidates(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    """One interface option with its raw inputs to scoring."""

    kind: str
    raw_quality: float  # reference-scaled signal quality, pre-normalization
    congestion: float  # in [0, 1]
    latency_penalty: int  # 0 or 1


@dataclass(frozen=True)
class ScoredCandidate:
    kind: str
    score: float
    quality: float
    congestion: float
    latency_penalty: int
    raw_quality: float
    predicted_dbm: float | None = None

    def to_doc(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "score": self.score,
            "q": self.quality,
            "c": self.congestion,
            "l": self.latency_penalty,
            "raw_quality": self.raw_quality,
            "predicted_dbm": self.predicted_dbm,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "ScoredCandidate":
        predicted = doc.get("predicted_dbm")
        return cls(
            kind=str(doc["kind"]),
            score=float(doc["score"]),
            quality=float(doc["q"]),
            congestion=float(doc["c"]),
            latency_penalty=int(doc["l"]),
            raw_quality=float(doc["raw_quality"]),
            predicted_dbm=None if predicted is None else float(predicted),
        )


def rank_candidates(
    candidates: list[Candidate],
    weights: tuple[float, float, float],
    predicted_dbm: Mapping[str, float] | None = None,
) -> list[ScoredCandidate]:
    """Normalize qualities over the candidate set, score, sort descending.

    Ties break lexicographically on kind name; with a zero quality span all
    candidates share q = 1.0.
    """
    if not candidates:
        raise NoCandidates("no candidate interfaces")
    w_q, w_c, w_l = weights
    raw = [c.raw_quality for c in candidates]
    low, high = min(raw), max(raw)
    span = high - low
    scored = []
    for candidate in candidates:
        quality = 1.0 if span == 0.0 else (candidate.raw_quality - low) / span
        score = w_q * quality - w_c * candidate.congestion - w_l * candidate.latency_penalty
        scored.append(
            ScoredCandidate(
                kind=candidate.kind,
                score=score,
                quality=quality,
                congestion=candidate.congestion,
                latency_penalty=candidate.latency_penalty,
                raw_quality=candidate.raw_quality,
                predicted_dbm=None if predicted_dbm is None else predicted_dbm.get(candidate.kind),
            )
        )
    scored.sort(key=lambda s: (-s.score, s.kind))
    return scored


@dataclass(frozen=True)
class DeviceRecommendation:
    device_id: str
    recommended: str
    ranked: tuple[ScoredCandidate, ...]
    proposed_action: ActionCommand | None

    def to_doc(self) -> dict[str, Any]:
        return {
            "device_id": self.device_id,
            "recommended_interface": self.recommended,
            "ranked": [s.to_doc() for s in self.ranked],
            "proposed_action": None
            if self.proposed_action is None
            else {
                "device_id": self.proposed_action.device_id,
                "verb": self.proposed_action.verb,
                "arguments": dict(self.proposed_action.arguments),
            },
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "DeviceRecommendation":
        action_doc = doc.get("proposed_action")
        action = (
            None
            if action_doc is None
            else ActionCommand(
                device_id=action_doc["device_id"],
                verb=action_doc["verb"],
                arguments=action_doc.get("arguments", {}),
            )
        )
        return cls(
            device_id=str(doc["device_id"]),
            recommended=str(doc["recommended_interface"]),
            ranked=tuple(ScoredCandidate.from_doc(s) for s in doc["ranked"]),
            proposed_action=action,
        )


@dataclass(frozen=True)
class PrescriptiveReport:
    per_device: tuple[DeviceRecommendation, ...]

    def to_doc(self) -> dict[str, Any]:
        return {"per_device": [d.to_doc() for d in self.per_device]}

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "PrescriptiveReport":
        return cls(per_device=tuple(DeviceRecommendation.from_doc(d) for d in doc["per_device"]))


def _predicted_signal_dbm(
    device: DeviceScope, kind: str, context: AnalyticsContext, predictive: PredictiveReport
) -> float | None:
    """Best forecast signal at the next step among the device's kind-k
    links; falls back to the latest observation when unforecast."""
    best = None
    for link in device.links:
        if link.kind.value != kind:
            continue
        for metric in ("rssi_dbm_smoothed", "rssi_dbm"):
            forecast = predictive.per_series.get((link.rel_id, metric))
            if forecast is not None and forecast.forecasts:
                value = forecast.forecasts[0][1]
                best = value if best is None else max(best, value)
                break
            samples = context.series.get((link.rel_id, metric))
            if samples:
                value = samples[-1][1]
                best = value if best is None else max(best, value)
                break
    return best


def _occupancy(context: AnalyticsContext, predictive: PredictiveReport) -> float:
    """Forecast motion activity normalized to [0, 1]."""
    forecast_means = []
    for (entity, metric), forecast in predictive.per_series.items():
        if metric == "motion_count" and forecast.forecasts:
            forecast_means.append(sum(v for _, v in forecast.forecasts) / len(forecast.forecasts))
    if not forecast_means:
        return 0.0
    mean_count = sum(forecast_means) / len(forecast_means)
    reference = context.params.occupancy_ref_count
    return max(0.0, min(1.0, mean_count / reference if reference > 0 else 0.0))


def prescribe(
    context: AnalyticsContext,
    predictive: PredictiveReport,
    profile: MessageProfile | None = None,
) -> PrescriptiveReport:
    """Recommend an interface per scoped device; argmax of the weighted
    score, candidates ranked descending."""
    if not context.devices:
        raise NoCandidates("no scoped device has a live candidate relationship")
    params = context.params
    occupancy = _occupancy(context, predictive)
    recommendations = []
    for device in context.devices:
        kinds = sorted({link.kind.value for link in device.links})
        candidates = []
        predicted: dict[str, float] = {}
        for kind in kinds:
            dbm = _predicted_signal_dbm(device, kind, context, predictive)
            if dbm is None:
                continue
            predicted[kind] = dbm
            low, high = params.quality_ranges_dbm.get(kind, (-110.0, -40.0))
            raw_quality = (dbm - low) / (high - low)
            congestion = params.congestion.get(kind, 0.5)
            congestion = max(0.0, min(1.0, congestion + params.occupancy_weight * occupancy))
            latency_penalty = 0
            if profile is not None and params.nominal_latency_ms.get(kind, 0.0) > profile.deadline_ms:
                latency_penalty = 1
            candidates.append(
                Candidate(
                    kind=kind,
                    raw_quality=raw_quality,
                    congestion=congestion,
                    latency_penalty=latency_penalty,
                )
            )
        if not candidates:
            continue
        ranked = rank_candidates(candidates, params.score_weights, predicted)
        recommended = ranked[0].kind
        action = None
        if recommended != device.active_interface:
            action = ActionCommand(
                device_id=device.external_id,
                verb="set_primary_interface",
                arguments={"kind": recommended},
                issued_by="analytics",
            )
        recommendations.append(
            DeviceRecommendation(
                device_id=device.external_id,
                recommended=recommended,
                ranked=tuple(ranked),
                proposed_action=action,
            )
        )
    if not recommendations:
        raise NoCandidates("no scoped device had usable signal forecasts")
    return PrescriptiveReport(per_device=tuple(recommendations))
