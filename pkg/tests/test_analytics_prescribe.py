"""Prescriptive scoring: dominance, affine invariance, tie-breaks."""

from __future__ import annotations

import random

import pytest

from netwin.analytics import (
    AnalyticsContext,
    AnalyticsParams,
    MessageProfile,
    NoCandidates,
    describe,
    diagnose,
    predict,
    prescribe,
)
from netwin.analytics.context import CandidateLink, DeviceScope
from netwin.analytics.prescribe import Candidate, rank_candidates
from netwin.signals import SignalKind

WEIGHTS = (0.6, 0.3, 0.1)


class TestRankCandidates:
    def test_dominating_candidate_recommended(self):
        ranked = rank_candidates(
            [
                Candidate(kind="wifi", raw_quality=0.9, congestion=0.1, latency_penalty=0),
                Candidate(kind="cellular", raw_quality=0.5, congestion=0.5, latency_penalty=0),
            ],
            WEIGHTS,
        )
        assert ranked[0].kind == "wifi"

    def test_singleton_always_recommended(self):
        for weights in [(0.6, 0.3, 0.1), (0.1, 0.8, 0.1), (1.0, 0.0, 0.0)]:
            ranked = rank_candidates(
                [Candidate(kind="bluetooth", raw_quality=-3.0, congestion=0.9, latency_penalty=1)],
                weights,
            )
            assert ranked[0].kind == "bluetooth"

    def test_empty_candidate_set_rejected(self):
        with pytest.raises(NoCandidates):
            rank_candidates([], WEIGHTS)

    def test_tie_breaks_lexicographically(self):
        ranked = rank_candidates(
            [
                Candidate(kind="wifi", raw_quality=0.5, congestion=0.2, latency_penalty=0),
                Candidate(kind="cellular", raw_quality=0.5, congestion=0.2, latency_penalty=0),
            ],
            WEIGHTS,
        )
        assert [s.kind for s in ranked] == ["cellular", "wifi"]

    def test_affine_invariance_of_recommendation(self):
        rng = random.Random(8)
        for _ in range(200):
            n = rng.randint(1, 4)
            kinds = ["bluetooth", "cellular", "wifi", "lte-alt"][:n]
            base = [
                Candidate(
                    kind=kinds[i],
                    raw_quality=rng.uniform(-1, 2),
                    congestion=rng.random(),
                    latency_penalty=rng.randint(0, 1),
                )
                for i in range(n)
            ]
            scale, shift = rng.uniform(0.1, 9.0), rng.uniform(-50, 50)
            transformed = [
                Candidate(
                    kind=c.kind,
                    raw_quality=scale * c.raw_quality + shift,
                    congestion=c.congestion,
                    latency_penalty=c.latency_penalty,
                )
                for c in base
            ]
            assert (
                rank_candidates(base, WEIGHTS)[0].kind
                == rank_candidates(transformed, WEIGHTS)[0].kind
            )

    def test_dominance_property_over_random_sets(self):
        rng = random.Random(99)
        for _ in range(500):
            n = rng.randint(2, 5)
            candidates = [
                Candidate(
                    kind=f"k{i}",
                    raw_quality=rng.uniform(0, 1),
                    congestion=rng.random(),
                    latency_penalty=rng.randint(0, 1),
                )
                for i in range(n)
            ]
            ranked = rank_candidates(candidates, WEIGHTS)
            by_kind = {c.kind: c for c in candidates}
            for contender in candidates:
                others = [c for c in candidates if c.kind != contender.kind]
                dominates = all(
                    contender.raw_quality >= o.raw_quality
                    and contender.congestion <= o.congestion
                    and contender.latency_penalty <= o.latency_penalty
                    for o in others
                ) and any(
                    contender.raw_quality > o.raw_quality
                    or contender.congestion < o.congestion
                    or contender.latency_penalty < o.latency_penalty
                    for o in others
                )
                if dominates:
                    assert ranked[0].kind == contender.kind, (contender, by_kind, ranked)

    def test_normalized_values_in_unit_interval(self):
        rng = random.Random(5)
        for _ in range(100):
            candidates = [
                Candidate(
                    kind=f"k{i}",
                    raw_quality=rng.uniform(-30, 30),
                    congestion=rng.random(),
                    latency_penalty=rng.randint(0, 1),
                )
                for i in range(rng.randint(1, 5))
            ]
            for scored in rank_candidates(candidates, WEIGHTS):
                assert 0.0 <= scored.quality <= 1.0
                assert 0.0 <= scored.congestion <= 1.0
                assert scored.latency_penalty in (0, 1)


def device_context(samples_by_rel: dict, links, active="wifi", profile=None, **param_overrides):
    params = AnalyticsParams(**param_overrides) if param_overrides else AnalyticsParams()
    return AnalyticsContext(
        window=(0, 10**9),
        series=samples_by_rel,
        devices=(
            DeviceScope(twin_id="t1", external_id="d1", active_interface=active, links=tuple(links)),
        ),
        params=params,
        profile=profile,
    )


def series(values, start_ms=1000, step_ms=1000):
    return tuple((start_ms + i * step_ms, float(v)) for i, v in enumerate(values))


class TestPrescribeStage:
    def make_context(self, wifi_rssi, cell_rssi, profile=None, active="wifi"):
        links = [
            CandidateLink(kind=SignalKind.WIFI, rel_id="r1", source_twin="t2"),
            CandidateLink(kind=SignalKind.CELLULAR, rel_id="r2", source_twin="t3"),
        ]
        samples = {
            ("r1", "rssi_dbm_smoothed"): series(wifi_rssi),
            ("r2", "rssi_dbm_smoothed"): series(cell_rssi),
        }
        return device_context(samples, links, active=active, profile=profile)

    def full_run(self, context):
        descriptive = describe(context)
        diagnostic = diagnose(context, descriptive)
        predictive = predict(context, descriptive, diagnostic)
        return prescribe(context, predictive, context.profile)

    def test_strong_wifi_recommended(self):
        context = self.make_context([-45.0] * 8, [-95.0] * 8)
        report = self.full_run(context)
        (rec,) = report.per_device
        assert rec.recommended == "wifi"
        assert rec.device_id == "d1"

    def test_recommendation_switch_proposes_action(self):
        context = self.make_context([-95.0] * 8, [-55.0] * 8, active="wifi")
        report = self.full_run(context)
        (rec,) = report.per_device
        assert rec.recommended == "cellular"
        assert rec.proposed_action is not None
        assert rec.proposed_action.verb == "set_primary_interface"
        assert rec.proposed_action.arguments["kind"] == "cellular"

    def test_no_action_when_already_on_recommended(self):
        context = self.make_context([-45.0] * 8, [-95.0] * 8, active="wifi")
        (rec,) = self.full_run(context).per_device
        assert rec.proposed_action is None

    def test_latency_penalty_applied_from_profile(self):
        # Bluetooth-only candidate set where nominal latency (100 ms)
        # misses a 50 ms deadline: singleton still recommended, with l=1.
        links = [CandidateLink(kind=SignalKind.BLUETOOTH, rel_id="r1", source_twin="t2")]
        context = device_context(
            {("r1", "rssi_dbm_smoothed"): series([-60.0] * 8)},
            links,
            profile=MessageProfile(payload_bytes=512, deadline_ms=50.0),
        )
        (rec,) = self.full_run(context).per_device
        assert rec.recommended == "bluetooth"
        assert rec.ranked[0].latency_penalty == 1

    def test_rationale_exposes_q_c_l(self):
        context = self.make_context([-45.0] * 8, [-80.0] * 8)
        (rec,) = self.full_run(context).per_device
        doc = rec.to_doc()
        for entry in doc["ranked"]:
            assert set(entry) >= {"kind", "score", "q", "c", "l", "raw_quality"}

    def test_no_devices_in_scope_raises(self):
        context = AnalyticsContext(window=(0, 1), series={("r1", "x"): series([1, 2, 3, 4])})
        descriptive = describe(context)
        diagnostic = diagnose(context, descriptive)
        predictive = predict(context, descriptive, diagnostic)
        with pytest.raises(NoCandidates):
            prescribe(context, predictive, None)
