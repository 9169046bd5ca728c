"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
PASS/FAIL lines.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import time
from contextlib import contextmanager
from dataclasses import replace

import pytest
from fastapi.testclient import TestClient

from bus_contract_suite import CONTRACT_CHECKS
from netwin.analytics import AnalyticsContext, describe, diagnose, predict
from netwin.analytics.forecast import holt_forecast, seasonal_naive_forecast
from netwin.analytics.prescribe import Candidate, rank_candidates
from netwin.analytics.stats import pearson
from netwin.bus import InMemoryBus, MqttBus
from netwin.bus.broker import MqttBroker
from netwin.bus.topics import topic_matches
from netwin.config import ControllerSettings, NetwinConfig
from netwin.handler import HandlerConfig, SignalHandler
from netwin.runtime import AllInOne
from netwin.scenarios import DeviceSpec, FaultsSpec, ScenarioEvent, ScenarioSpec, SourceSpec, ubikampus_demo
from netwin.signals import (
    Accept,
    BluetoothMetrics,
    CellularMetrics,
    DeviceDescriptor,
    EnvironmentMetrics,
    SignalKind,
    SignalReading,
    ValidationBounds,
    WiFiMetrics,
    canonical_json,
    decode_reading,
    encode_reading,
    validate_reading,
)
from netwin.simulator import Simulator
from netwin.twin import TwinController


@contextmanager
def criterion(number: int, name: str):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {number:02d} [{name}]: FAIL ({time.monotonic() - started:.1f}s)")
        raise
    print(f"\nACCEPTANCE {number:02d} [{name}]: PASS ({time.monotonic() - started:.1f}s)")


def graph_sets(controller: TwinController):
    view = controller.query_graph()
    external = {i.twin_id: i.external_id for i in view.instances}
    nodes = set(external.values())
    edges = {(external[r.source_twin], external[r.target_twin]) for r in view.relationships}
    return nodes, edges


# ---------------------------------------------------------------------------
# 1. End-to-end convergence


def test_01_end_to_end_convergence():
    with criterion(1, "end-to-end convergence on ubikampus-demo"):
        started = time.monotonic()
        config = NetwinConfig(controller=ControllerSettings(ttl_ms=10_000, sweep_interval_ms=2_000))
        runtime = AllInOne(ubikampus_demo(), config=config, seed=7)
        runtime.advance_to(62_000)  # 60 simulated seconds + 2 s quiescence
        truth = runtime.simulator.ground_truth()
        nodes, edges = graph_sets(runtime.controller)
        assert nodes == set(truth.expected_node_ids), (
            nodes - set(truth.expected_node_ids),
            set(truth.expected_node_ids) - nodes,
        )
        assert edges == set(truth.detectable), (
            edges - set(truth.detectable),
            set(truth.detectable) - edges,
        )
        runtime.stop()
        elapsed = time.monotonic() - started
        assert elapsed < 120.0, f"took {elapsed:.1f}s, budget is 120s"


# ---------------------------------------------------------------------------
# 2. Replay determinism


def record_raw_stream(until_ms: int) -> list[tuple[str, str]]:
    spec = replace(
        ubikampus_demo(),
        faults=FaultsSpec(out_of_bounds_rate=0.02, duplicate_rate=0.03, stale_rate=0.02),
    )
    recorded: list[tuple[str, str]] = []
    simulator = Simulator(spec, emit=lambda topic, payload: recorded.append((topic, payload)))
    t = 0
    while t < until_ms:
        t += spec.tick_interval_ms
        simulator.step(t)
    return recorded


def replay_to_snapshot(raw_messages: list[tuple[str, str]]) -> str:
    controller = TwinController(tokens=("replay",))
    session = controller.authenticate("replay")
    handler = SignalHandler(
        HandlerConfig(),
        publish=lambda topic, payload: controller.reconcile(session, decode_reading(payload)),
    )
    for topic, payload in raw_messages:
        handler.dispatch(topic, payload)
    doc = json.loads(controller.snapshot())
    doc.pop("format_version")
    return canonical_json(doc)


def test_02_replay_determinism():
    with criterion(2, "replay determinism of handler + controller"):
        recorded = record_raw_stream(15_000)
        assert len(recorded) > 1000
        first = replay_to_snapshot(recorded)
        second = replay_to_snapshot(recorded)
        assert first.encode("utf-8") == second.encode("utf-8")


# ---------------------------------------------------------------------------
# 3. Idempotent reconciliation


def random_curated_reading(rng: random.Random, i: int) -> SignalReading:
    kind = rng.choice(list(SignalKind))
    timestamp = 1000 + i * rng.randint(1, 50)
    if kind is SignalKind.ENVIRONMENT:
        sensor = f"env-{rng.randint(1, 4)}"
        return SignalReading(
            device=DeviceDescriptor(
                device_id=sensor,
                model_name="env-sensor",
                capabilities=frozenset({SignalKind.ENVIRONMENT}),
                app_version="1.0.0",
            ),
            kind=kind,
            timestamp_ms=timestamp,
            source_id=sensor,
            metrics=EnvironmentMetrics(
                pm25_ugm3=round(rng.uniform(0, 40), 3),
                co2_ppm=round(rng.uniform(380, 1200), 3),
                motion_count=rng.randint(0, 12),
            ),
            curated=True,
            smoothed={"co2_ppm": round(rng.uniform(380, 1200), 3)},
        )
    device = DeviceDescriptor(
        device_id=f"d{rng.randint(1, 6)}",
        model_name=rng.choice(["simphone-a", "simphone-b"]),
        capabilities=frozenset({SignalKind.CELLULAR, SignalKind.WIFI, SignalKind.BLUETOOTH}),
        app_version="1.0.0",
        active_interface=rng.choice([SignalKind.CELLULAR, SignalKind.WIFI]),
    )
    rssi = round(rng.uniform(-110, -40), 3)
    if kind is SignalKind.CELLULAR:
        source = f"cell-{rng.randint(1, 3)}"
        metrics = CellularMetrics(
            network_type=rng.choice(["LTE", "NR"]),
            frequency_mhz=1800.0,
            rssi_dbm=rssi,
            rsrp_dbm=rssi - 30.0,
            cell_id=source,
        )
    elif kind is SignalKind.WIFI:
        source = f"ap-{rng.randint(1, 5)}"
        metrics = WiFiMetrics(
            ssid="net", bssid="aa:bb:cc:00:11:22", frequency_mhz=2412.0, rssi_dbm=rssi, channel=1
        )
    else:
        source = f"bt-{rng.randint(1, 5)}"
        metrics = BluetoothMetrics(peer_address="de:ad:be:ef:00:01", rssi_dbm=rssi)
    return SignalReading(
        device=device,
        kind=kind,
        timestamp_ms=timestamp,
        source_id=source,
        metrics=metrics,
        curated=True,
        smoothed={"rssi_dbm": round(rssi + rng.uniform(-2, 2), 3)},
    )


def test_03_idempotent_reconciliation():
    with criterion(3, "idempotent reconciliation over 1000 random readings"):
        rng = random.Random(20260808)
        controller = TwinController(tokens=("t",))
        session = controller.authenticate("t")
        for i in range(1000):
            reading = random_curated_reading(rng, i)
            controller.reconcile(session, reading)
            before = controller.snapshot()
            second = controller.reconcile(session, reading)
            assert second.empty
            assert controller.snapshot() == before, f"snapshot changed on duplicate #{i}"


# ---------------------------------------------------------------------------
# 4. Event-bus contract


ALPHABET = ("a", "b", "c")


def exhaustive_topics():
    for n in range(1, 5):
        for parts in itertools.product(ALPHABET, repeat=n):
            yield "/".join(parts)


def exhaustive_filters():
    for n in range(1, 5):
        for parts in itertools.product(ALPHABET + ("+",), repeat=n):
            yield "/".join(parts)
        for parts in itertools.product(ALPHABET + ("+",), repeat=n - 1):
            yield "/".join(parts + ("#",))


def oracle_expand(topic_filter: str, max_segments: int = 4) -> set[str]:
    parts = topic_filter.split("/")
    expansions: list[list[str]] = [[]]
    for i, part in enumerate(parts):
        if part == "#":
            tails: list[list[str]] = []
            for extra in range(0, max_segments - i + 1):
                for suffix in itertools.product(ALPHABET, repeat=extra):
                    tails.extend(prefix + list(suffix) for prefix in expansions)
            expansions = tails
            break
        symbols = list(ALPHABET) if part == "+" else [part]
        expansions = [prefix + [s] for prefix in expansions for s in symbols]
    return {"/".join(e) for e in expansions if e}


def test_04_event_bus_contract():
    with criterion(4, "bus contract on both implementations + wildcard oracle"):
        topics = list(exhaustive_topics())
        pairs_checked = 0
        for topic_filter in exhaustive_filters():
            expected = oracle_expand(topic_filter)
            for topic in topics:
                assert topic_matches(topic_filter, topic) == (topic in expected)
                pairs_checked += 1
        assert pairs_checked == 425 * 120

        broker = MqttBroker().start()
        try:
            for make_bus in (lambda: InMemoryBus(), lambda: MqttBus(broker.url)):
                for check in CONTRACT_CHECKS:
                    bus = make_bus()
                    opened = []

                    def connect(name=None):
                        client = bus.connect(name)
                        opened.append(client)
                        return client

                    check(connect)
                    for client in opened:
                        client.close()
        finally:
            broker.stop()


# ---------------------------------------------------------------------------
# 5. Handler correctness under fuzz


def fuzz_messages(count: int, rng: random.Random):
    """Mixed raw documents: valid, out-of-bounds, stale, duplicates, junk."""
    last_valid: str | None = None
    for i in range(count):
        roll = rng.random()
        topic = f"netwin/raw/d{rng.randint(1, 5)}/{rng.choice(['cellular', 'wifi', 'bluetooth', 'environment'])}"
        if roll < 0.08:
            yield topic, rng.choice(["{broken", '{"kind": "zigbee"}', '["not-an-object"]', ""])
            continue
        if roll < 0.14 and last_valid is not None:
            yield topic, last_valid  # exact duplicate of an earlier payload
            continue
        reading = random_curated_reading(rng, i)
        reading = replace(reading, curated=False, smoothed={})
        if roll < 0.22:
            metrics = reading.metrics
            if hasattr(metrics, "rssi_dbm"):
                metrics = replace(metrics, rssi_dbm=rng.choice([-300.0, 20.0]))
            else:
                metrics = replace(metrics, co2_ppm=50_000.0)
            reading = replace(reading, metrics=metrics)
        elif roll < 0.30:
            reading = replace(reading, timestamp_ms=max(1, reading.timestamp_ms - rng.randint(10_000, 90_000)))
        payload = encode_reading(reading)
        last_valid = payload
        yield f"netwin/raw/{reading.device.device_id}/{reading.kind.value}", payload


def test_05_handler_fuzz():
    with criterion(5, "handler stats identity + curated validity on 10k fuzzed docs"):
        rng = random.Random(55_555)
        published: list[tuple[str, str]] = []
        handler = SignalHandler(HandlerConfig(), publish=lambda t, p: published.append((t, p)))
        consumed = 0
        for topic, payload in fuzz_messages(10_000, rng):
            handler.dispatch(topic, payload)
            consumed += 1
        assert consumed == 10_000
        snap = handler.stats.snapshot()
        assert sum(row["consumed"] for row in snap.values()) == 10_000
        assert handler.stats.identity_holds()
        accepted_total = sum(row["accepted"] for row in snap.values())
        assert accepted_total == len(published) > 100

        bounds = ValidationBounds()
        extremes: dict[tuple[str, str, str], tuple[float, float]] = {}
        for topic, payload in published:
            reading = decode_reading(payload)
            assert reading.curated is True
            assert isinstance(validate_reading(reading, bounds), Accept)
            for metric, smoothed_value in reading.smoothed.items():
                key = (reading.device.device_id, reading.source_id, metric)
                raw_value = float(getattr(reading.metrics, metric))
                low, high = extremes.get(key, (raw_value, raw_value))
                low, high = min(low, raw_value), max(high, raw_value)
                extremes[key] = (low, high)
                assert low - 1e-9 <= smoothed_value <= high + 1e-9, (key, smoothed_value, (low, high))


# ---------------------------------------------------------------------------
# 6. Analytics oracle equivalence


def test_06_analytics_oracle_equivalence():
    with criterion(6, "anomaly sets and Pearson vs brute-force oracles"):
        rng = random.Random(606_060)
        for case in range(100):
            n = rng.randint(1, 256)
            values = [rng.gauss(-70, 6) for _ in range(n)]
            if n >= 8:
                for _ in range(rng.randint(0, 3)):
                    values[rng.randrange(n)] = rng.choice([-20.0, -130.0])
            samples = tuple((1000 + i * 1000, v) for i, v in enumerate(values))
            context = AnalyticsContext(window=(0, 10**9), series={("e", "m"): samples})
            report = diagnose(context, describe(context))
            got = {a.timestamp_ms for a in report.anomalies[("e", "m")]}

            mean = sum(values) / n
            std = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
            expected = set()
            if std > 0:
                expected = {1000 + i * 1000 for i, v in enumerate(values) if abs(v - mean) / std > 2.5}
            assert got == expected, f"case {case}"

        for case in range(100):
            n = rng.randint(2, 200)
            a = [rng.gauss(0, 4) for _ in range(n)]
            b = [0.7 * x + rng.gauss(0, 2) for x in a]
            got = pearson(a, b)
            a_mean, b_mean = sum(a) / n, sum(b) / n
            num = sum((x - a_mean) * (y - b_mean) for x, y in zip(a, b))
            den = math.sqrt(sum((x - a_mean) ** 2 for x in a) * sum((y - b_mean) ** 2 for y in b))
            if den == 0:
                assert got is None
            else:
                assert got is not None and abs(got - num / den) <= 1e-9


# ---------------------------------------------------------------------------
# 7. Forecast checks


def test_07_forecast_checks():
    with criterion(7, "Holt exactness, seasonal-naive MAE 0, beats last-value naive"):
        rng = random.Random(777)
        for _ in range(20):
            intercept, slope = rng.uniform(-50, 50), rng.uniform(-4, 4)
            n = rng.randint(4, 40)
            values = [intercept + slope * i for i in range(n)]
            forecasts, _ = holt_forecast(values, 10, alpha=0.5, beta=0.3)
            for k, value in enumerate(forecasts, start=1):
                assert abs(value - (intercept + slope * (n - 1 + k))) <= 1e-9

        for period in (2, 3, 5):
            pattern = [rng.uniform(-10, 10) for _ in range(period)]
            values = pattern * 6
            forecasts, mae = seasonal_naive_forecast(values, period * 2, period)
            assert mae == 0.0
            assert forecasts == pattern * 2

        period = 4
        pattern = [0.0, 6.0, 12.0, 6.0]
        noisy = [pattern[i % period] + rng.gauss(0, 0.3) for i in range(48)]
        train, held_out = noisy[:40], noisy[40:45]
        context = AnalyticsContext(
            window=(0, 10**9),
            series={("e", "m"): tuple((1000 * (i + 1), v) for i, v in enumerate(train))},
        )
        descriptive = describe(context)
        predictive = predict(context, descriptive, diagnose(context, descriptive), horizon=5)
        predicted = [v for _, v in predictive.per_series[("e", "m")].forecasts]
        pipeline_mae = sum(abs(p - h) for p, h in zip(predicted, held_out)) / 5
        naive_mae = sum(abs(train[-1] - h) for h in held_out) / 5
        assert pipeline_mae <= naive_mae


# ---------------------------------------------------------------------------
# 8. Prescription properties


def test_08_prescription_properties():
    with criterion(8, "dominance, affine invariance, singleton over 1000 sets"):
        rng = random.Random(888)
        weights = (0.6, 0.3, 0.1)
        for case in range(1000):
            n = rng.randint(1, 5)
            candidates = [
                Candidate(
                    kind=f"k{j}",
                    raw_quality=rng.uniform(-5, 5),
                    congestion=rng.random(),
                    latency_penalty=rng.randint(0, 1),
                )
                for j in range(n)
            ]
            ranked = rank_candidates(candidates, weights)
            assert len(ranked) == n

            if n == 1:
                assert ranked[0].kind == candidates[0].kind
            for contender in candidates:
                others = [c for c in candidates if c is not contender]
                if not others:
                    continue
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
                    assert ranked[0].kind == contender.kind, f"case {case}"

            scale, shift = rng.uniform(0.05, 20.0), rng.uniform(-100, 100)
            transformed = [replace(c, raw_quality=scale * c.raw_quality + shift) for c in candidates]
            assert rank_candidates(transformed, weights)[0].kind == ranked[0].kind
            for scored in ranked:
                assert 0.0 <= scored.quality <= 1.0


# ---------------------------------------------------------------------------
# 9. Feedback loop


def test_09_feedback_loop():
    with criterion(9, "console-API action round trip to readings and twin"):
        runtime = AllInOne(ubikampus_demo(), seed=7)
        runtime.advance_to(5000)
        probe = runtime.bus.connect("probe")
        raw = probe.subscribe("netwin/raw/d01/#")
        with TestClient(runtime.app) as client:
            response = client.post(
                "/actions",
                json={
                    "device_id": "d01",
                    "verb": "set_primary_interface",
                    "arguments": {"kind": "cellular"},
                },
                headers={"Authorization": "Bearer netwin-dev"},
            )
            assert response.status_code == 202
            runtime.advance_by(2000)  # two simulated seconds
        switched = []
        while True:
            message = raw.pop_nowait()
            if message is None:
                break
            reading = decode_reading(message.payload)
            switched.append(reading.device.active_interface)
        assert switched, "device emitted nothing in the window"
        assert switched[-1] is SignalKind.CELLULAR
        device_twin = runtime.controller.find_device_twin("d01")
        assert device_twin is not None
        assert device_twin.properties.get("active_interface") == "cellular"
        runtime.stop()


# ---------------------------------------------------------------------------
# 10. Eviction timing


def eviction_scenario() -> ScenarioSpec:
    def device(device_id, x):
        return DeviceSpec(
            device_id=device_id,
            model_name="simphone-a",
            position=(x, 0.0),
            capabilities=frozenset({SignalKind.WIFI}),
            report_period_ms={SignalKind.WIFI: 1000},
            active_interface=SignalKind.WIFI,
        )

    return ScenarioSpec(
        rng_seed=10,
        duration_s=40.0,
        tick_interval_ms=500,
        devices=(device("d-stay", 5.0), device("d-leave", 6.0)),
        sources=(
            SourceSpec(
                source_id="ap-1",
                kind=SignalKind.WIFI,
                position=(0.0, 0.0),
                tx_power_dbm=-40.0,
                attributes={"ssid": "n", "bssid": "aa:bb:cc:00:11:22", "channel": 1, "frequency_mhz": 2412.0},
            ),
        ),
        events=(ScenarioEvent(at_ms=10_000, device_id="d-leave", event="leave"),),
        shadow_sigma_db=0.0,
    )


def test_10_eviction():
    ttl_ms, sweep_ms = 8_000, 2_000
    with criterion(10, "leave event evicts within TTL + sweep, never before TTL"):
        config = NetwinConfig(controller=ControllerSettings(ttl_ms=ttl_ms, sweep_interval_ms=sweep_ms))
        runtime = AllInOne(eviction_scenario(), config=config)
        # Last reading of d-leave is at 10_000; TTL expires at 18_000.
        runtime.advance_to(17_500)
        nodes, edges = graph_sets(runtime.controller)
        assert "d-leave" in nodes, "evicted before TTL"
        assert ("d-leave", "ap-1") in edges
        runtime.advance_to(10_000 + ttl_ms + sweep_ms + 500)
        nodes, edges = graph_sets(runtime.controller)
        assert "d-leave" not in nodes, "not evicted within TTL + sweep"
        assert ("d-leave", "ap-1") not in edges
        assert "d-stay" in nodes and ("d-stay", "ap-1") in edges
        runtime.stop()
