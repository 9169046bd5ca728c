"""Descriptive and diagnostic stages: exact statistics over KPI series.

Standard deviation is the population deviation throughout, stated
explicitly so independent oracles agree bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

from netwin.analytics.context import AnalyticsContext, EmptyScope, Sample, SeriesKey


def mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    variance = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(variance)


def ols_slope_per_second(samples: tuple[Sample, ...]) -> float:
    """Least-squares slope of value over time, in units per second."""
    n = len(samples)
    if n < 2:
        return 0.0
    ts = [t / 1000.0 for t, _ in samples]
    xs = [v for _, v in samples]
    t_mean = sum(ts) / n
    x_mean = sum(xs) / n
    denominator = sum((t - t_mean) ** 2 for t in ts)
    if denominator == 0.0:
        return 0.0
    numerator = sum((t - t_mean) * (x - x_mean) for t, x in zip(ts, xs))
    return numerator / denominator


def autocorrelation(values: list[float], lag: int) -> float:
    n = len(values)
    mean = sum(values) / n
    denominator = sum((v - mean) ** 2 for v in values)
    if denominator == 0.0:
        return 0.0
    numerator = sum((values[i] - mean) * (values[i - lag] - mean) for i in range(lag, n))
    return numerator / denominator


def detect_seasonality(values: list[float], threshold: float) -> int | None:
    """Best autocorrelation peak at lag in [2, n/2]; period when it clears
    the threshold."""
    n = len(values)
    best_lag, best_score = None, -math.inf
    for lag in range(2, n // 2 + 1):
        score = autocorrelation(values, lag)
        if score > best_score:
            best_lag, best_score = lag, score
    if best_lag is not None and best_score >= threshold:
        return best_lag
    return None


@dataclass(frozen=True)
class SeriesStats:
    count: int
    mean: float
    minimum: float
    maximum: float
    std: float
    slope_per_s: float
    seasonality_period: int | None

    def to_doc(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "mean": self.mean,
            "min": self.minimum,
            "max": self.maximum,
            "std": self.std,
            "slope_per_s": self.slope_per_s,
            "seasonality_period": self.seasonality_period,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "SeriesStats":
        period = doc["seasonality_period"]
        return cls(
            count=int(doc["count"]),
            mean=float(doc["mean"]),
            minimum=float(doc["min"]),
            maximum=float(doc["max"]),
            std=float(doc["std"]),
            slope_per_s=float(doc["slope_per_s"]),
            seasonality_period=None if period is None else int(period),
        )


@dataclass(frozen=True)
class DescriptiveReport:
    per_series: Mapping[SeriesKey, SeriesStats]

    def to_doc(self) -> dict[str, Any]:
        return {
            "per_series": {
                f"{entity}/{metric}": stats.to_doc()
                for (entity, metric), stats in sorted(self.per_series.items())
            }
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "DescriptiveReport":
        per_series = {}
        for key, stats_doc in doc["per_series"].items():
            entity, _, metric = key.partition("/")
            per_series[(entity, metric)] = SeriesStats.from_doc(stats_doc)
        return cls(per_series=per_series)


def describe(context: AnalyticsContext) -> DescriptiveReport:
    """Exact per-series statistics: count, mean, min, max, population std,
    OLS trend slope, autocorrelation seasonality."""
    if not context.series:
        raise EmptyScope("no series in scope")
    per_series: dict[SeriesKey, SeriesStats] = {}
    for key, samples in context.series.items():
        if not samples:
            raise EmptyScope(f"series {key} has no samples")
        values = [v for _, v in samples]
        mean, std = mean_std(values)
        per_series[key] = SeriesStats(
            count=len(values),
            mean=mean,
            minimum=min(values),
            maximum=max(values),
            std=std,
            slope_per_s=ols_slope_per_second(samples),
            seasonality_period=detect_seasonality(values, context.params.seasonality_threshold),
        )
    return DescriptiveReport(per_series=per_series)


@dataclass(frozen=True)
class Anomaly:
    timestamp_ms: int
    value: float
    z_score: float

    def to_doc(self) -> list:
        return [self.timestamp_ms, self.value, self.z_score]


@dataclass(frozen=True)
class Correlation:
    series_a: SeriesKey
    series_b: SeriesKey
    pearson_r: float
    aligned_samples: int


@dataclass(frozen=True)
class DiagnosticReport:
    anomalies: Mapping[SeriesKey, tuple[Anomaly, ...]]
    correlations: tuple[Correlation, ...]
    narrative: str

    def to_doc(self) -> dict[str, Any]:
        return {
            "anomalies": {
                f"{entity}/{metric}": [a.to_doc() for a in found]
                for (entity, metric), found in sorted(self.anomalies.items())
                if found
            },
            "correlations": [
                {
                    "series_a": f"{c.series_a[0]}/{c.series_a[1]}",
                    "series_b": f"{c.series_b[0]}/{c.series_b[1]}",
                    "pearson_r": c.pearson_r,
                    "aligned_samples": c.aligned_samples,
                }
                for c in self.correlations
            ],
            "narrative": self.narrative,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "DiagnosticReport":
        anomalies: dict[SeriesKey, tuple[Anomaly, ...]] = {}
        for key, entries in doc["anomalies"].items():
            entity, _, metric = key.partition("/")
            anomalies[(entity, metric)] = tuple(
                Anomaly(timestamp_ms=int(t), value=float(v), z_score=float(z)) for t, v, z in entries
            )
        correlations = []
        for c in doc["correlations"]:
            a_entity, _, a_metric = c["series_a"].partition("/")
            b_entity, _, b_metric = c["series_b"].partition("/")
            correlations.append(
                Correlation(
                    series_a=(a_entity, a_metric),
                    series_b=(b_entity, b_metric),
                    pearson_r=float(c["pearson_r"]),
                    aligned_samples=int(c["aligned_samples"]),
                )
            )
        return cls(anomalies=anomalies, correlations=tuple(correlations), narrative=str(doc["narrative"]))


def pearson(a: list[float], b: list[float]) -> float | None:
    n = len(a)
    a_mean = sum(a) / n
    b_mean = sum(b) / n
    var_a = sum((x - a_mean) ** 2 for x in a)
    var_b = sum((y - b_mean) ** 2 for y in b)
    if var_a == 0.0 or var_b == 0.0:
        return None
    covariance = sum((x - a_mean) * (y - b_mean) for x, y in zip(a, b))
    return covariance / math.sqrt(var_a * var_b)


def _median(values: list[int]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    middle = n // 2
    if n % 2 == 1:
        return float(ordered[middle])
    return (ordered[middle - 1] + ordered[middle]) / 2.0


def median_cadence_ms(samples: tuple[Sample, ...]) -> float:
    gaps = [samples[i + 1][0] - samples[i][0] for i in range(len(samples) - 1)]
    if not gaps:
        return 0.0
    return _median(gaps)


def align_nearest(
    a: tuple[Sample, ...], b: tuple[Sample, ...]
) -> tuple[list[float], list[float]]:
    """Pair each sample of A with B's nearest-in-time sample, keeping pairs
    within half the coarser series' cadence."""
    tolerance = max(median_cadence_ms(a), median_cadence_ms(b)) / 2.0
    b_times = [t for t, _ in b]
    aligned_a: list[float] = []
    aligned_b: list[float] = []
    import bisect

    for t, value in a:
        i = bisect.bisect_left(b_times, t)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(b_times):
                distance = abs(b_times[j] - t)
                if best is None or distance < best[0]:
                    best = (distance, j)
        if best is not None and best[0] <= tolerance:
            aligned_a.append(value)
            aligned_b.append(b[best[1]][1])
    return aligned_a, aligned_b


def diagnose(context: AnalyticsContext, descriptive: DescriptiveReport) -> DiagnosticReport:
    """Z-score anomalies against the descriptive stage's mean/std, plus
    pairwise Pearson correlations over nearest-timestamp-aligned samples."""
    z_threshold = context.params.z_threshold
    anomalies: dict[SeriesKey, tuple[Anomaly, ...]] = {}
    for key, samples in context.series.items():
        stats = descriptive.per_series.get(key)
        if stats is None or stats.std == 0.0:
            anomalies[key] = ()
            continue
        found = []
        for t, value in samples:
            z = abs(value - stats.mean) / stats.std
            if z > z_threshold:
                found.append(Anomaly(timestamp_ms=t, value=value, z_score=z))
        anomalies[key] = tuple(found)

    correlations: list[Correlation] = []
    keys = sorted(context.series.keys())
    for i, key_a in enumerate(keys):
        for key_b in keys[i + 1 :]:
            a_values, b_values = align_nearest(context.series[key_a], context.series[key_b])
            if len(a_values) < 2:
                continue
            r = pearson(a_values, b_values)
            if r is not None and abs(r) >= context.params.correlation_threshold:
                correlations.append(
                    Correlation(series_a=key_a, series_b=key_b, pearson_r=r, aligned_samples=len(a_values))
                )

    total_anomalies = sum(len(v) for v in anomalies.values())
    strongest = max(correlations, key=lambda c: abs(c.pearson_r), default=None)
    narrative = (
        f"{total_anomalies} anomalous sample(s) across {len(context.series)} series; "
        f"{len(correlations)} correlated pair(s) above |r|>={context.params.correlation_threshold:g}"
    )
    if strongest is not None:
        narrative += (
            f"; strongest {strongest.series_a[0]}/{strongest.series_a[1]}"
            f" vs {strongest.series_b[0]}/{strongest.series_b[1]} r={strongest.pearson_r:.3f}"
        )
    return DiagnosticReport(anomalies=anomalies, correlations=tuple(correlations), narrative=narrative)
