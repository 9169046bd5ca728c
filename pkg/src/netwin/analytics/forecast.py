"""Predictive stage: Holt's linear smoothing and seasonal-naive forecasting.

Method selection uses the descriptive stage's seasonality finding;
samples flagged anomalous by the diagnostic stage are excluded from Holt
fitting (replaced by the model's one-step projection), which is the
concrete way this stage consumes its predecessors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from netwin.analytics.context import AnalyticsContext, Sample, SeriesKey
from netwin.analytics.stats import DescriptiveReport, DiagnosticReport, median_cadence_ms

MIN_SAMPLES = 4


class InsufficientData(ValueError):
    pass


class IrregularCadence(ValueError):
    pass


@dataclass(frozen=True)
class SeriesForecast:
    method: str  # "holt" | "seasonal_naive"
    forecasts: tuple[Sample, ...]
    in_sample_mae: float

    def to_doc(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "forecasts": [[t, v] for t, v in self.forecasts],
            "in_sample_mae": self.in_sample_mae,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "SeriesForecast":
        return cls(
            method=str(doc["method"]),
            forecasts=tuple((int(t), float(v)) for t, v in doc["forecasts"]),
            in_sample_mae=float(doc["in_sample_mae"]),
        )


@dataclass(frozen=True)
class PredictiveReport:
    horizon: int
    per_series: Mapping[SeriesKey, SeriesForecast]

    def to_doc(self) -> dict[str, Any]:
        return {
            "horizon": self.horizon,
            "per_series": {
                f"{entity}/{metric}": forecast.to_doc()
                for (entity, metric), forecast in sorted(self.per_series.items())
            },
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "PredictiveReport":
        per_series = {}
        for key, forecast_doc in doc["per_series"].items():
            entity, _, metric = key.partition("/")
            per_series[(entity, metric)] = SeriesForecast.from_doc(forecast_doc)
        return cls(horizon=int(doc["horizon"]), per_series=per_series)


def holt_forecast(
    values: list[float],
    horizon: int,
    alpha: float,
    beta: float,
    anomalous_indices: frozenset[int] = frozenset(),
) -> tuple[list[float], float]:
    """Holt's linear double exponential smoothing.

    level0 = x0, trend0 = x1 - x0. Anomalous samples are replaced by the
    one-step projection level + trend before updating, so a single outlier
    cannot bend the fitted trend. Returns (forecasts, one-step MAE over the
    fitted values).
    """
    if len(values) < 2:
        raise InsufficientData("holt requires at least 2 samples")
    fitted = list(values)
    if 1 in anomalous_indices and len(values) > 2:
        fitted[1] = fitted[0]  # avoid seeding the trend from an outlier
    level = fitted[0]
    trend = fitted[1] - fitted[0]
    absolute_errors: list[float] = []
    for t in range(1, len(fitted)):
        projection = level + trend
        x = fitted[t]
        if t in anomalous_indices:
            x = projection
        absolute_errors.append(abs(x - projection))
        new_level = alpha * x + (1 - alpha) * projection
        trend = beta * (new_level - level) + (1 - beta) * trend
        level = new_level
    forecasts = [level + k * trend for k in range(1, horizon + 1)]
    mae = sum(absolute_errors) / len(absolute_errors)
    return forecasts, mae


def seasonal_naive_forecast(values: list[float], horizon: int, period: int) -> tuple[list[float], float]:
    """Forecast t+k repeats the last full period; in-sample one-step
    prediction is the value one period earlier."""
    if period < 1 or len(values) < period:
        raise InsufficientData("series shorter than its period")
    forecasts = [values[len(values) - period + ((k - 1) % period)] for k in range(1, horizon + 1)]
    errors = [abs(values[t] - values[t - period]) for t in range(period, len(values))]
    mae = sum(errors) / len(errors) if errors else 0.0
    return forecasts, mae


def _check_cadence(key: SeriesKey, samples: tuple[Sample, ...]) -> float:
    gaps = [samples[i + 1][0] - samples[i][0] for i in range(len(samples) - 1)]
    median_gap = median_cadence_ms(samples)
    if median_gap <= 0:
        raise IrregularCadence(f"series {key[0]}/{key[1]} has a degenerate cadence")
    if max(gaps) > 2 * median_gap:
        raise IrregularCadence(f"series {key[0]}/{key[1]}: max gap exceeds 2x median")
    return median_gap


def predict(
    context: AnalyticsContext,
    descriptive: DescriptiveReport,
    diagnostic: DiagnosticReport,
    horizon: int | None = None,
) -> PredictiveReport:
    """Forecast every series with enough history.

    Series with fewer than 4 samples are skipped; if nothing qualifies the
    run fails with InsufficientData. A series whose sampling cadence is not
    approximately uniform (max gap > 2x median gap) fails the run.
    """
    h = context.params.horizon if horizon is None else horizon
    if h < 1:
        raise ValueError("horizon must be >= 1")
    per_series: dict[SeriesKey, SeriesForecast] = {}
    for key, samples in context.series.items():
        if len(samples) < MIN_SAMPLES:
            continue
        median_gap = _check_cadence(key, samples)
        values = [v for _, v in samples]
        stats = descriptive.per_series.get(key)
        period = stats.seasonality_period if stats else None
        if period is not None and len(values) >= period:
            forecasts, mae = seasonal_naive_forecast(values, h, period)
            method = "seasonal_naive"
        else:
            anomaly_times = {a.timestamp_ms for a in diagnostic.anomalies.get(key, ())}
            anomalous_indices = frozenset(
                i for i, (t, _) in enumerate(samples) if t in anomaly_times
            )
            forecasts, mae = holt_forecast(
                values, h, context.params.holt_alpha, context.params.holt_beta, anomalous_indices
            )
            method = "holt"
        step = int(round(median_gap))
        last_t = samples[-1][0]
        stamped = tuple((last_t + (k + 1) * step, value) for k, value in enumerate(forecasts))
        per_series[key] = SeriesForecast(method=method, forecasts=stamped, in_sample_mae=mae)
    if not per_series:
        raise InsufficientData("no series has enough samples to forecast")
    return PredictiveReport(horizon=h, per_series=per_series)
