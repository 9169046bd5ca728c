"""Predictive stage: Holt and seasonal-naive, checked against an
independent transcription of the recurrences."""

from __future__ import annotations

import random

import pytest

from netwin.analytics import (
    AnalyticsContext,
    AnalyticsParams,
    InsufficientData,
    IrregularCadence,
    describe,
    diagnose,
    predict,
)
from netwin.analytics.forecast import holt_forecast, seasonal_naive_forecast


def at_cadence(values, start_ms=1000, step_ms=1000):
    return tuple((start_ms + i * step_ms, float(v)) for i, v in enumerate(values))


def ctx(series: dict, **param_overrides) -> AnalyticsContext:
    params = AnalyticsParams(**param_overrides) if param_overrides else AnalyticsParams()
    return AnalyticsContext(window=(0, 10**9), series=series, params=params)


def run_predict(series: dict, horizon=5, **params):
    context = ctx(series, **params)
    descriptive = describe(context)
    diagnostic = diagnose(context, descriptive)
    return predict(context, descriptive, diagnostic, horizon=horizon)


def reference_holt(values, horizon, alpha, beta):
    """Literal transcription of the double-smoothing recurrences, kept
    independent of the implementation under test."""
    level = values[0]
    trend = values[1] - values[0]
    for t in range(1, len(values)):
        x = values[t]
        previous_level = level
        level = alpha * x + (1 - alpha) * (level + trend)
        trend = beta * (level - previous_level) + (1 - beta) * trend
    return [level + k * trend for k in range(1, horizon + 1)]


class TestHolt:
    def test_linear_series_forecasts_continue_line(self):
        forecasts, mae = holt_forecast([1.0, 2.0, 3.0, 4.0, 5.0], 2, alpha=0.5, beta=0.3)
        assert forecasts[0] == pytest.approx(6.0, abs=1e-9)
        assert forecasts[1] == pytest.approx(7.0, abs=1e-9)
        assert mae == pytest.approx(0.0, abs=1e-12)

    def test_matches_reference_recurrences_on_random_series(self):
        rng = random.Random(21)
        for _ in range(50):
            n = rng.randint(4, 100)
            values = [rng.gauss(0, 10) for _ in range(n)]
            alpha, beta = rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)
            horizon = rng.randint(1, 10)
            got, _ = holt_forecast(values, horizon, alpha, beta)
            expected = reference_holt(values, horizon, alpha, beta)
            for g, e in zip(got, expected):
                assert g == pytest.approx(e, abs=1e-9)

    def test_linear_exact_for_all_horizons_up_to_ten(self):
        values = [10.0 + 3.0 * i for i in range(12)]
        forecasts, _ = holt_forecast(values, 10, alpha=0.5, beta=0.3)
        for k, value in enumerate(forecasts, start=1):
            assert value == pytest.approx(10.0 + 3.0 * (11 + k), abs=1e-9)

    def test_constant_series_forecasts_constant(self):
        forecasts, mae = holt_forecast([4.0] * 8, 5, alpha=0.5, beta=0.3)
        assert all(f == pytest.approx(4.0, abs=1e-12) for f in forecasts)
        assert mae == 0.0

    def test_anomalous_sample_excluded_from_fit(self):
        # A wild outlier mid-series must not bend the fitted line when the
        # diagnostic stage flagged it.
        values = [1.0, 2.0, 3.0, 900.0, 5.0, 6.0, 7.0, 8.0]
        clean, _ = holt_forecast(
            [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 2, alpha=0.5, beta=0.3
        )
        masked, _ = holt_forecast(values, 2, alpha=0.5, beta=0.3, anomalous_indices=frozenset({3}))
        unmasked, _ = holt_forecast(values, 2, alpha=0.5, beta=0.3)
        assert masked[0] == pytest.approx(clean[0], abs=1e-9)
        assert abs(unmasked[0] - clean[0]) > 1.0


class TestSeasonalNaive:
    def test_repeats_last_period(self):
        forecasts, mae = seasonal_naive_forecast([1.0, 2.0, 1.0, 2.0, 1.0, 2.0], 4, period=2)
        assert forecasts == [1.0, 2.0, 1.0, 2.0]
        assert mae == 0.0

    def test_in_sample_mae_zero_on_exactly_periodic(self):
        values = [3.0, 7.0, 5.0] * 6
        _, mae = seasonal_naive_forecast(values, 3, period=3)
        assert mae == 0.0


class TestPredictStage:
    def test_constant_series(self):
        report = run_predict({("t1", "x"): at_cadence([4.0] * 8)}, horizon=3)
        forecast = report.per_series[("t1", "x")]
        assert [v for _, v in forecast.forecasts] == pytest.approx([4.0, 4.0, 4.0])
        assert forecast.in_sample_mae == 0.0

    def test_linear_series_continues_with_timestamps(self):
        report = run_predict({("t1", "x"): at_cadence([1, 2, 3, 4, 5])}, horizon=2)
        forecast = report.per_series[("t1", "x")]
        assert forecast.method == "holt"
        assert forecast.forecasts[0][0] == 6000
        assert forecast.forecasts[1][0] == 7000
        assert forecast.forecasts[0][1] == pytest.approx(6.0, abs=1e-9)
        assert forecast.forecasts[1][1] == pytest.approx(7.0, abs=1e-9)

    def test_periodic_series_uses_seasonal_naive(self):
        report = run_predict({("t1", "x"): at_cadence([1, 2, 1, 2, 1, 2, 1, 2])}, horizon=2)
        forecast = report.per_series[("t1", "x")]
        assert forecast.method == "seasonal_naive"
        assert [v for _, v in forecast.forecasts] == [1.0, 2.0]

    def test_anomalies_fed_from_diagnostic_are_masked(self):
        values = [float(i) for i in range(1, 21)]
        values[10] = 500.0  # z-score blows past 2.5
        report = run_predict({("t1", "x"): at_cadence(values)}, horizon=1)
        forecast = report.per_series[("t1", "x")]
        assert forecast.forecasts[0][1] == pytest.approx(21.0, abs=0.5)

    def test_exactly_four_samples_accepted_fewer_skipped(self):
        report = run_predict(
            {
                ("t1", "x"): at_cadence([1, 2, 3, 4]),
                ("t2", "y"): at_cadence([5, 6, 7]),
            },
            horizon=1,
        )
        assert ("t1", "x") in report.per_series
        assert ("t2", "y") not in report.per_series

    def test_no_forecastable_series_is_insufficient_data(self):
        with pytest.raises(InsufficientData):
            run_predict({("t1", "x"): at_cadence([1, 2, 3])}, horizon=1)

    def test_irregular_cadence_rejected(self):
        samples = ((1000, 1.0), (2000, 2.0), (3000, 3.0), (10_000, 4.0))
        with pytest.raises(IrregularCadence):
            run_predict({("t1", "x"): samples}, horizon=1)

    def test_pipeline_beats_last_value_naive_on_noisy_seasonal(self):
        rng = random.Random(4242)
        period = 4
        pattern = [0.0, 6.0, 12.0, 6.0]
        values = [pattern[i % period] + rng.gauss(0, 0.3) for i in range(48)]
        train, held_out = values[:40], values[40:45]
        report = run_predict({("t1", "x"): at_cadence(train)}, horizon=5)
        forecast = report.per_series[("t1", "x")]
        predicted = [v for _, v in forecast.forecasts]
        pipeline_mae = sum(abs(p - h) for p, h in zip(predicted, held_out)) / 5
        naive_mae = sum(abs(train[-1] - h) for h in held_out) / 5
        assert pipeline_mae <= naive_mae
