"""HTTP/WebSocket API serving the twin console and external clients.

Read endpoints are open and side-effect free; the action endpoint requires
a bearer token shared with the twin controller. The /stream WebSocket
pushes every graph ChangeSet plus a throttled KPI tick per subscribed
entity.
"""

from __future__ import annotations

import asyncio
import json
import logging
import queue
import threading
import time
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from netwin.actions import ActionCommand, InvalidAction, VERBS
from netwin.analytics import (
    AnalyticsParams,
    BackendError,
    DeterministicBackend,
    EmptyScope,
    InsufficientData,
    IrregularCadence,
    MessageProfile,
    MockBackend,
    NoCandidates,
    RemoteBackend,
    StagePreconditionError,
    context_from_controller,
    run_pipeline,
)
from netwin.bus.base import BusClient, TransportError
from netwin.bus.topics import TOPIC_ROOT, topic_for
from netwin.config import AnalyticsSettings
from netwin.twin import TwinController, UnknownSeries, UnknownTwin

logger = logging.getLogger(__name__)

MAX_WINDOW_MS = 2**62
STREAM_QUEUE_LIMIT = 1000
KPI_TICK_INTERVAL_S = 1.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str) -> None:
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"status": status, "code": code, "message": message})


class StreamHub:
    """Fans bus graph events out to per-client bounded queues.

    A slow client overflows its own queue and is disconnected; it never
    blocks the feed for others.
    """

    def __init__(self, bus_client: BusClient) -> None:
        self._clients: dict[int, queue.Queue] = {}
        self._ids = iter(range(1, 2**62))
        self._lock = threading.Lock()
        self._subscription = bus_client.subscribe(f"{TOPIC_ROOT}/events/graph")
        self._thread = threading.Thread(target=self._pump, daemon=True, name="stream-hub")
        self._thread.start()

    def _pump(self) -> None:
        for message in self._subscription:
            payload = message.payload.decode("utf-8", "replace")
            with self._lock:
                targets = list(self._clients.items())
            for client_id, client_queue in targets:
                try:
                    client_queue.put_nowait(payload)
                except queue.Full:
                    with self._lock:
                        self._clients.pop(client_id, None)

    def register(self) -> tuple[int, queue.Queue]:
        client_queue: queue.Queue = queue.Queue(maxsize=STREAM_QUEUE_LIMIT)
        with self._lock:
            client_id = next(self._ids)
            self._clients[client_id] = client_queue
        return client_id, client_queue

    def unregister(self, client_id: int) -> None:
        with self._lock:
            self._clients.pop(client_id, None)

    def dropped(self, client_id: int) -> bool:
        with self._lock:
            return client_id not in self._clients

    def close(self) -> None:
        self._subscription.close()


def create_app(
    controller: TwinController,
    bus_client: BusClient,
    handler_stats=None,
    analytics: AnalyticsSettings | None = None,
    mock_replies: Mapping[str, Mapping[str, Any]] | None = None,
    console_dir: str | Path | None = None,
    kpi_tick_interval_s: float = KPI_TICK_INTERVAL_S,
) -> FastAPI:
    analytics = analytics or AnalyticsSettings()
    app = FastAPI(title="netwin gateway", version="0.1.0")
    hub = StreamHub(bus_client)
    app.state.hub = hub
    app.state.controller = controller

    @app.exception_handler(ApiError)
    async def on_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return _error_response(exc.status, exc.code, exc.message)

    # -- graph views

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/twins")
    def twins() -> dict:
        return controller.query_graph().to_doc()

    @app.get("/twins/{twin_id}")
    def twin_detail(twin_id: str) -> dict:
        try:
            view = controller.query_graph(twin_id=twin_id)
        except UnknownTwin:
            raise ApiError(404, "unknown_twin", f"no twin {twin_id!r}")
        doc = view.to_doc()
        center = next(t for t in doc["twins"] if t["twin_id"] == twin_id)
        return {
            "twin": center,
            "relationships": doc["relationships"],
            "neighbors": [t for t in doc["twins"] if t["twin_id"] != twin_id],
        }

    @app.get("/relationships")
    def relationships() -> dict:
        return {"relationships": controller.query_graph().to_doc()["relationships"]}

    @app.get("/models")
    def models() -> dict:
        view = controller.query_graph()
        return {
            "models": [
                {"model_id": m.model_id, "name": m.name, "schema": [list(p) for p in m.schema]}
                for m in sorted(view.models.values(), key=lambda m: (len(m.model_id), m.model_id))
            ]
        }

    @app.get("/kpis")
    def kpis(entity: str, metric: str, from_ms: int = 0, to_ms: int = MAX_WINDOW_MS) -> dict:
        if from_ms > to_ms:
            raise ApiError(400, "bad_range", "from must be <= to")
        try:
            samples = controller.query_kpis(entity, metric, from_ms, to_ms)
        except UnknownSeries:
            raise ApiError(404, "unknown_series", f"no series {entity}/{metric}")
        return {"entity": entity, "metric": metric, "samples": [[t, v] for t, v in samples]}

    @app.get("/kpis/catalog")
    def kpi_catalog(entity: str | None = None) -> dict:
        keys = controller.kpi_keys(entity)
        return {"series": [{"entity": e, "metric": m} for e, m in keys]}

    @app.get("/stats")
    def stats() -> dict:
        if handler_stats is None:
            return {"handler": None}
        return {"handler": handler_stats.snapshot()}

    # -- analytics

    @app.post("/analytics/run")
    def analytics_run(body: dict) -> dict:
        stages = body.get("stages")
        if not isinstance(stages, list) or not stages:
            raise ApiError(400, "bad_request", "body requires a non-empty 'stages' list")
        window_doc = body.get("window") or {}
        window = (int(window_doc.get("from_ms", 0)), int(window_doc.get("to_ms", MAX_WINDOW_MS)))
        scope = body.get("scope")
        if scope is not None:
            scope = tuple(str(s) for s in scope)
        try:
            params = AnalyticsParams.from_doc(body.get("params", {}))
            profile = None
            if body.get("profile") is not None:
                profile = MessageProfile.from_doc(body["profile"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ApiError(400, "bad_request", f"invalid parameters: {exc}")

        backend_name = body.get("backend", "deterministic")
        if backend_name == "deterministic":
            backend = DeterministicBackend()
        elif backend_name == "remote":
            if not analytics.remote_url:
                raise ApiError(400, "bad_request", "no remote analytics endpoint configured")
            backend = RemoteBackend(analytics.remote_url, templates_dir=analytics.templates_dir)
        elif backend_name == "mock":
            backend = MockBackend(mock_replies or {})
        else:
            raise ApiError(400, "bad_request", f"unknown backend {backend_name!r}")

        context = context_from_controller(controller, window=window, scope=scope, params=params)
        if profile is not None:
            from dataclasses import replace

            context = replace(context, profile=profile)
        try:
            bundle = run_pipeline(context, stages, backend)
        except StagePreconditionError as exc:
            raise ApiError(400, "stage_precondition", str(exc))
        except (InsufficientData, IrregularCadence, EmptyScope, NoCandidates) as exc:
            raise ApiError(422, "insufficient_data", f"{type(exc).__name__}: {exc}")
        except BackendError as exc:
            raise ApiError(502, "backend_error", str(exc))
        return bundle.to_doc()

    # -- actions

    @app.post("/actions", status_code=202)
    def post_action(body: dict, request: Request) -> dict:
        token = _bearer_token(request)
        if token is None or not controller.check_token(token):
            raise ApiError(401, "unauthorized", "missing or invalid bearer token")
        verb = body.get("verb")
        if verb not in VERBS:
            raise ApiError(400, "invalid_verb", f"verb must be one of {list(VERBS)}")
        device_id = body.get("device_id")
        if not isinstance(device_id, str) or not device_id:
            raise ApiError(400, "invalid_arguments", "device_id required")
        if controller.find_device_twin(device_id) is None:
            raise ApiError(404, "unknown_device", f"no device twin for {device_id!r}")
        try:
            command = ActionCommand(
                device_id=device_id,
                verb=verb,
                arguments=body.get("arguments", {}),
                issued_by=f"api:{token[:8]}",
                issued_at_ms=int(time.time() * 1000),
            )
        except InvalidAction as exc:
            raise ApiError(400, "invalid_arguments", str(exc))
        topic = topic_for("actions", device_id)
        try:
            bus_client.publish(topic, command.encode().encode("utf-8"))
        except TransportError as exc:
            raise ApiError(503, "transport_error", str(exc))
        return {"status": "accepted", "topic": topic}

    # -- live stream

    @app.websocket("/stream")
    async def stream(ws: WebSocket) -> None:
        await ws.accept()
        try:
            first = json.loads(await ws.receive_text())
            subscribed = _parse_subscribe(first)
        except (ValueError, KeyError, TypeError):
            await ws.close(code=1002)
            return
        except WebSocketDisconnect:
            return
        client_id, client_queue = hub.register()
        sent_upto: dict[tuple[str, str], int] = {}
        last_tick = time.monotonic()
        # Ack after registering with the hub: once the client sees this
        # frame, no later graph event can be missed.
        await ws.send_text(json.dumps({"type": "subscribed", "entities": list(subscribed)}))
        receive_task = asyncio.create_task(ws.receive())
        try:
            while True:
                done, _ = await asyncio.wait({receive_task}, timeout=0.05)
                if receive_task in done:
                    message = receive_task.result()
                    if message.get("type") == "websocket.disconnect":
                        return
                    text = message.get("text")
                    if text:
                        try:
                            subscribed = _parse_subscribe(json.loads(text))
                        except (ValueError, KeyError, TypeError):
                            await ws.close(code=1002)
                            return
                        await ws.send_text(
                            json.dumps({"type": "subscribed", "entities": list(subscribed)})
                        )
                    receive_task = asyncio.create_task(ws.receive())
                while True:
                    try:
                        payload = client_queue.get_nowait()
                    except queue.Empty:
                        break
                    await ws.send_text(json.dumps({"type": "changeset", "changeset": json.loads(payload)}))
                if hub.dropped(client_id):
                    await ws.close(code=1013)  # overloaded: client too slow
                    return
                now = time.monotonic()
                if subscribed and now - last_tick >= kpi_tick_interval_s:
                    last_tick = now
                    for frame in _kpi_tick_frames(controller, subscribed, sent_upto):
                        await ws.send_text(frame)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            hub.unregister(client_id)
            receive_task.cancel()

    if console_dir is not None and Path(console_dir).exists():
        app.mount("/console", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app


def _bearer_token(request: Request) -> str | None:
    header = request.headers.get("authorization", "")
    if header.lower().startswith("bearer "):
        return header[7:].strip()
    return None


def _parse_subscribe(frame: Any) -> tuple[str, ...]:
    if not isinstance(frame, dict):
        raise ValueError("subscribe frame must be an object")
    entities = frame["subscribe"]
    if not isinstance(entities, list) or not all(isinstance(e, str) for e in entities):
        raise ValueError("subscribe must be a list of entity ids")
    return tuple(entities)


def _kpi_tick_frames(
    controller: TwinController,
    subscribed: tuple[str, ...],
    sent_upto: dict[tuple[str, str], int],
) -> list[str]:
    frames = []
    for entity in subscribed:
        for entity_id, metric in controller.kpi_keys(entity):
            try:
                samples = controller.query_kpis(entity_id, metric, sent_upto.get((entity_id, metric), -(2**62)) + 1, MAX_WINDOW_MS)
            except UnknownSeries:
                continue
            if not samples:
                continue
            sent_upto[(entity_id, metric)] = samples[-1][0]
            frames.append(
                json.dumps(
                    {
                        "type": "kpi_tick",
                        "entity": entity_id,
                        "metric": metric,
                        "samples": [[t, v] for t, v in samples],
                    }
                )
            )
    return frames
