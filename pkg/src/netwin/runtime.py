"""Component wiring: all-in-one orchestration and deterministic stepping.

``AllInOne`` wires bus, simulator, handler, controller, and gateway in one
process. ``advance_to`` fast-forwards simulated time deterministically by
draining each pipeline hop in order after every tick; ``start_realtime``
runs the same loop against the wall clock on background threads.
"""

from __future__ import annotations

import logging
import threading
import time
from pathlib import Path

from fastapi import FastAPI

from netwin.bus.base import BusClient
from netwin.bus.memory import InMemoryBus
from netwin.config import NetwinConfig
from netwin.gateway import create_app
from netwin.handler import HandlerConfig, HandlerService, SignalHandler
from netwin.scenarios import ScenarioSpec, load_scenario
from netwin.signals import ValidationBounds
from netwin.simulator import Simulator
from netwin.twin.controller import ControllerService, TwinController

logger = logging.getLogger(__name__)

SNAPSHOT_SUFFIX = ".twinsnap.json"


class AllInOne:
    """Single-process deployment: in-memory bus plus every component."""

    def __init__(
        self,
        scenario: ScenarioSpec | str = "ubikampus-demo",
        config: NetwinConfig | None = None,
        seed: int | None = None,
        timestamp_base_ms: int = 0,
    ) -> None:
        self.config = config or NetwinConfig()
        spec = scenario if isinstance(scenario, ScenarioSpec) else load_scenario(scenario)
        self.scenario = spec

        self.bus = InMemoryBus()
        self._sim_client = self.bus.connect("simulator")
        self._handler_client = self.bus.connect("signal-handler")
        self._controller_client = self.bus.connect("twin-controller")
        self._gateway_client = self.bus.connect("gateway")

        handler_config = HandlerConfig(
            bounds=ValidationBounds.from_mapping(self.config.handler.bounds),
            alpha=self.config.handler.alpha,
            staleness_window_ms=self.config.handler.staleness_window_ms,
        )
        self.handler = SignalHandler(handler_config)

        if self.config.handler.placement == "device":
            # The simulator hosts the handler in-process: raw readings skip
            # the bus and curated documents are published directly.
            self.handler._publish = lambda topic, payload: self._sim_client.publish(
                topic, payload.encode("utf-8")
            )
            self.handler_service = None
            emit = lambda topic, payload: self.handler.dispatch(topic, payload)
        else:
            self.handler_service = HandlerService(self._handler_client, self.handler)
            emit = None

        self.simulator = Simulator(
            spec,
            bus_client=self._sim_client if emit is None else None,
            emit=emit,
            seed=seed,
            timestamp_base_ms=timestamp_base_ms,
        )
        self.simulator.attach_action_stream(self._sim_client)

        self.controller = TwinController(
            tokens=self.config.controller.tokens,
            session_ttl_s=self.config.controller.session_ttl_s,
            kpi_capacity=self.config.controller.kpi_capacity,
        )
        self.controller_service = ControllerService(
            self._controller_client,
            controller=self.controller,
            token=self.config.controller.tokens[0],
            ttl_ms=self.config.controller.ttl_ms,
            sweep_interval_ms=self.config.controller.sweep_interval_ms,
        )

        self._app: FastAPI | None = None
        self._sim_thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.now_ms = 0

    @property
    def app(self) -> FastAPI:
        if self._app is None:
            console_dir = _default_console_dir()
            self._app = create_app(
                self.controller,
                self._gateway_client,
                handler_stats=self.handler.stats,
                analytics=self.config.analytics,
                console_dir=console_dir,
            )
        return self._app

    # -- deterministic stepping

    def drain(self) -> None:
        """Flush every queued hop: raw -> curated -> twin graph."""
        if self.handler_service is not None:
            self.handler_service.pump_once()
        self.controller_service.pump_once()

    def advance_to(self, t_ms: int, tick_ms: int | None = None) -> None:
        """Fast-forward simulated time, draining after every tick so the end
        state is a pure function of (scenario, seed, actions)."""
        step = tick_ms or self.scenario.tick_interval_ms
        while self.now_ms < t_ms:
            self.now_ms = min(self.now_ms + step, t_ms)
            self.simulator.pump_actions()
            self.simulator.step(self.now_ms)
            self.drain()
            self.controller_service.sweep(self.timestamp_base_ms + self.now_ms)

    def advance_by(self, delta_ms: int, tick_ms: int | None = None) -> None:
        self.advance_to(self.now_ms + delta_ms, tick_ms)

    @property
    def timestamp_base_ms(self) -> int:
        return self.simulator.timestamp_base_ms

    # -- realtime mode

    def start_realtime(self) -> None:
        if self.handler_service is not None:
            self.handler_service.start()
        self.controller_service.start()
        started_wall_ms = int(time.time() * 1000)
        if self.simulator.timestamp_base_ms == 0:
            self.simulator.timestamp_base_ms = started_wall_ms
        tick_s = self.scenario.tick_interval_ms / 1000.0

        def loop() -> None:
            while not self._stop.is_set():
                elapsed_ms = int(time.time() * 1000) - started_wall_ms
                self.simulator.pump_actions()
                self.simulator.step(elapsed_ms)
                self.now_ms = elapsed_ms
                self._stop.wait(tick_s)

        self._sim_thread = threading.Thread(target=loop, daemon=True, name="simulator")
        self._sim_thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._sim_thread is not None:
            self._sim_thread.join(timeout=5.0)
        if self.handler_service is not None:
            self.handler_service.stop()
        self.controller_service.stop()

    def write_snapshot(self, directory: str | Path, name: str = "final") -> Path:
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        target = path / f"{name}{SNAPSHOT_SUFFIX}"
        target.write_text(self.controller.snapshot(), "utf-8")
        return target


def _default_console_dir() -> Path | None:
    # Serve the built console when the frontend has been compiled next to
    # this package checkout; absent otherwise.
    candidates = [
        Path(__file__).resolve().parent.parent.parent / "frontend" / "dist",
        Path.cwd() / "frontend" / "dist",
    ]
    for candidate in candidates:
        if candidate.exists():
            return candidate
    return None
