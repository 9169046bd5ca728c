"""Gateway HTTP/WebSocket API against a live in-process deployment."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from netwin.runtime import AllInOne
from netwin.scenarios import DeviceSpec, ScenarioSpec, SourceSpec
from netwin.signals import SignalKind

TOKEN = "netwin-dev"


def small_scenario() -> ScenarioSpec:
    return ScenarioSpec(
        rng_seed=3,
        duration_s=30.0,
        tick_interval_ms=500,
        devices=(
            DeviceSpec(
                device_id="d1",
                model_name="simphone-a",
                position=(5.0, 0.0),
                capabilities=frozenset({SignalKind.WIFI, SignalKind.CELLULAR}),
                report_period_ms={SignalKind.WIFI: 1000, SignalKind.CELLULAR: 1000},
                active_interface=SignalKind.WIFI,
            ),
        ),
        sources=(
            SourceSpec(
                source_id="ap-1",
                kind=SignalKind.WIFI,
                position=(0.0, 0.0),
                tx_power_dbm=-40.0,
                attributes={"ssid": "net", "bssid": "aa:bb:cc:00:11:22", "channel": 1, "frequency_mhz": 2412.0},
            ),
            SourceSpec(
                source_id="cell-1",
                kind=SignalKind.CELLULAR,
                position=(10.0, 0.0),
                tx_power_dbm=-30.0,
                attributes={"network_type": "LTE", "frequency_mhz": 1800.0, "cell_id": "cell-1"},
            ),
        ),
        shadow_sigma_db=0.0,
    )


@pytest.fixture
def runtime():
    rt = AllInOne(small_scenario())
    yield rt
    rt.stop()


@pytest.fixture
def populated(runtime):
    runtime.advance_to(5000)
    return runtime


@pytest.fixture
def client(populated):
    with TestClient(populated.app) as c:
        yield c


class TestGraphEndpoints:
    def test_empty_store(self, runtime):
        with TestClient(runtime.app) as client:
            body = client.get("/twins").json()
            assert body == {"twins": [], "relationships": []}

    def test_twins_after_reconciliation(self, client):
        body = client.get("/twins").json()
        external_ids = {t["external_id"] for t in body["twins"]}
        assert external_ids == {"d1", "ap-1", "cell-1"}

    def test_unknown_twin_404(self, client):
        response = client.get("/twins/t999")
        assert response.status_code == 404
        body = response.json()
        assert body["code"] == "unknown_twin"
        assert body["status"] == 404 and body["message"]

    def test_twin_detail_ego_view(self, client):
        twins = client.get("/twins").json()["twins"]
        device = next(t for t in twins if t["external_id"] == "d1")
        detail = client.get(f"/twins/{device['twin_id']}").json()
        assert detail["twin"]["external_id"] == "d1"
        assert len(detail["relationships"]) == 2
        assert {n["external_id"] for n in detail["neighbors"]} == {"ap-1", "cell-1"}

    def test_relationships_carry_signal_strength(self, client):
        body = client.get("/relationships").json()
        assert len(body["relationships"]) == 2
        for relationship in body["relationships"]:
            assert relationship["kind"] == "detects"
            assert relationship["signal_strength_dbm"] < -20.0

    def test_read_endpoints_are_side_effect_free(self, client, populated):
        before = populated.controller.snapshot()
        for _ in range(3):
            client.get("/twins")
            client.get("/relationships")
            client.get("/kpis", params={"entity": "r1", "metric": "rssi_dbm"})
            client.get("/stats")
        assert populated.controller.snapshot() == before


class TestKpis:
    def test_samples_in_order(self, client):
        body = client.get("/kpis", params={"entity": "r1", "metric": "rssi_dbm"}).json()
        timestamps = [t for t, _ in body["samples"]]
        assert timestamps == sorted(timestamps) and len(timestamps) >= 4

    def test_bad_range_400(self, client):
        response = client.get(
            "/kpis", params={"entity": "r1", "metric": "rssi_dbm", "from_ms": 10, "to_ms": 5}
        )
        assert response.status_code == 400
        assert response.json()["code"] == "bad_range"

    def test_unknown_series_404(self, client):
        response = client.get("/kpis", params={"entity": "r1", "metric": "nope"})
        assert response.status_code == 404
        assert response.json()["code"] == "unknown_series"

    def test_catalog_lists_series(self, client):
        body = client.get("/kpis/catalog", params={"entity": "r1"}).json()
        metrics = {row["metric"] for row in body["series"]}
        assert "rssi_dbm" in metrics and "rssi_dbm_smoothed" in metrics


class TestAnalyticsEndpoint:
    def test_descriptive_only(self, client):
        response = client.post("/analytics/run", json={"stages": ["descriptive"]})
        assert response.status_code == 200
        body = response.json()
        assert set(body["reports"]) == {"descriptive"}
        assert body["reports"]["descriptive"]["per_series"]

    def test_prefix_violation_400(self, client):
        response = client.post("/analytics/run", json={"stages": ["predictive"]})
        assert response.status_code == 400
        assert response.json()["code"] == "stage_precondition"

    def test_full_pipeline_with_profile(self, client):
        response = client.post(
            "/analytics/run",
            json={
                "stages": ["descriptive", "diagnostic", "predictive", "prescriptive"],
                "profile": {"payload_bytes": 1024, "deadline_ms": 250.0},
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert set(body["reports"]) == {"descriptive", "diagnostic", "predictive", "prescriptive"}
        per_device = body["reports"]["prescriptive"]["per_device"]
        assert per_device[0]["recommended_interface"] in ("wifi", "cellular")

    def test_insufficient_data_422(self, runtime):
        runtime.advance_to(1000)  # one sample per series: nothing forecastable
        with TestClient(runtime.app) as client:
            response = client.post(
                "/analytics/run", json={"stages": ["descriptive", "diagnostic", "predictive"]}
            )
        assert response.status_code == 422

    def test_unknown_backend_400(self, client):
        response = client.post("/analytics/run", json={"stages": ["descriptive"], "backend": "oracle"})
        assert response.status_code == 400

    def test_mock_backend_without_replies_502(self, client):
        response = client.post("/analytics/run", json={"stages": ["descriptive"], "backend": "mock"})
        assert response.status_code == 502
        assert response.json()["code"] == "backend_error"


class TestActions:
    def auth(self):
        return {"Authorization": f"Bearer {TOKEN}"}

    def test_action_published_to_bus(self, client, populated):
        subscription = populated.bus.connect("probe").subscribe("netwin/actions/+")
        response = client.post(
            "/actions",
            json={"device_id": "d1", "verb": "set_primary_interface", "arguments": {"kind": "cellular"}},
            headers=self.auth(),
        )
        assert response.status_code == 202
        message = subscription.get(timeout=2.0)
        assert message is not None
        assert message.topic == "netwin/actions/d1"
        command = json.loads(message.payload)
        assert command["verb"] == "set_primary_interface"
        assert command["arguments"]["kind"] == "cellular"
        assert subscription.pop_nowait() is None  # exactly one message per 202

    def test_missing_token_401(self, client):
        response = client.post("/actions", json={"device_id": "d1", "verb": "pause"})
        assert response.status_code == 401

    def test_unknown_device_404_nothing_published(self, client, populated):
        subscription = populated.bus.connect("probe2").subscribe("netwin/actions/+")
        response = client.post(
            "/actions", json={"device_id": "ghost", "verb": "pause"}, headers=self.auth()
        )
        assert response.status_code == 404
        assert subscription.get(timeout=0.2) is None

    def test_invalid_verb_400(self, client):
        response = client.post(
            "/actions", json={"device_id": "d1", "verb": "reboot"}, headers=self.auth()
        )
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_verb"

    def test_invalid_arguments_400(self, client):
        response = client.post(
            "/actions",
            json={"device_id": "d1", "verb": "set_primary_interface", "arguments": {"kind": "zigbee"}},
            headers=self.auth(),
        )
        assert response.status_code == 400


class TestStream:
    def test_changeset_frames_pushed(self, populated):
        with TestClient(populated.app) as client:
            with client.websocket_connect("/stream") as ws:
                ws.send_text(json.dumps({"subscribe": []}))
                assert json.loads(ws.receive_text())["type"] == "subscribed"
                populated.advance_by(1000)
                frame = json.loads(ws.receive_text())
                assert frame["type"] == "changeset"
                assert "updated_relationships" in frame["changeset"]

    def test_kpi_tick_for_subscribed_entity(self, populated):
        relationship = populated.controller.query_graph().relationships[0]
        with TestClient(populated.app) as client:
            with client.websocket_connect("/stream") as ws:
                ws.send_text(json.dumps({"subscribe": [relationship.rel_id]}))
                assert json.loads(ws.receive_text())["type"] == "subscribed"
                frame = json.loads(ws.receive_text())
                while frame["type"] != "kpi_tick":
                    frame = json.loads(ws.receive_text())
                assert frame["entity"] == relationship.rel_id
                assert frame["samples"]

    def test_no_kpi_ticks_without_subscription(self, populated):
        import time as time_module

        with TestClient(populated.app) as client:
            with client.websocket_connect("/stream") as ws:
                ws.send_text(json.dumps({"subscribe": []}))
                assert json.loads(ws.receive_text())["type"] == "subscribed"
                # Two tick intervals pass with nothing subscribed; any tick
                # emitted in that window would be queued ahead of the
                # changeset the advance below produces.
                time_module.sleep(2.2)
                populated.advance_by(1000)
                frame = json.loads(ws.receive_text())
                assert frame["type"] == "changeset"

    def test_malformed_subscribe_closes_with_protocol_error(self, populated):
        with TestClient(populated.app) as client:
            with client.websocket_connect("/stream") as ws:
                ws.send_text("not json at all")
                with pytest.raises(Exception):
                    # Starlette surfaces the close as WebSocketDisconnect on
                    # the next receive.
                    ws.receive_text()


class TestHandlerStats:
    def test_stats_exposed(self, client):
        body = client.get("/stats").json()
        assert body["handler"]["wifi"]["accepted"] > 0
