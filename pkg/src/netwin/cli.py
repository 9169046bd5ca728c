"""The netwin command line: all-in-one and per-component entry points."""

from __future__ import annotations

import json
import logging
import signal
import sys
import threading
import time
from pathlib import Path

import click

from netwin.bus.broker import MqttBroker
from netwin.bus.base import TransportError
from netwin.bus.mqtt import MqttBus
from netwin.config import ConfigError, load_config, load_tokens_file, parse_duration_ms
from netwin.gateway import create_app
from netwin.handler import HandlerConfig, HandlerService, SignalHandler
from netwin.runtime import AllInOne
from netwin.scenarios import load_scenario, save_scenario, ubikampus_demo
from netwin.signals import ValidationBounds
from netwin.simulator import Simulator
from netwin.twin.controller import ControllerService, TwinController

logger = logging.getLogger(__name__)


def _fail(message: str, code: int = 2) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _serve(app, host: str, port: int) -> None:
    import uvicorn

    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        _fail(f"cannot bind {host}:{port}: {exc}", code=3)


@click.group()
@click.option("--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool) -> None:
    """Self-hosted digital twin for a multi-RAT campus network."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@main.command("all-in-one")
@click.option("--scenario", default="ubikampus-demo", help="Scenario file or 'ubikampus-demo'.")
@click.option("--seed", type=int, default=None, help="Override the scenario RNG seed.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--port", type=int, default=None, help="Gateway port (default 8080).")
@click.option("--snapshot-dir", type=click.Path(), default=None)
@click.option("--fast-forward", type=str, default=None, help="Pre-run this much simulated time (e.g. 60s) before serving.")
def all_in_one(scenario, seed, config_path, port, snapshot_dir, fast_forward) -> None:
    """In-memory bus + simulator + handler + controller + gateway."""
    try:
        config = load_config(config_path)
        spec = load_scenario(scenario)
        runtime = AllInOne(spec, config=config, seed=seed)
        if fast_forward:
            runtime.advance_to(parse_duration_ms(fast_forward))
    except (ConfigError, ValueError) as exc:
        _fail(str(exc))
        return
    runtime.start_realtime()
    snapshot_target = snapshot_dir or config.controller.snapshot_dir

    def shutdown(*_args) -> None:
        runtime.stop()
        if snapshot_target:
            path = runtime.write_snapshot(snapshot_target)
            click.echo(f"snapshot written to {path}")
        sys.exit(0)

    signal.signal(signal.SIGINT, shutdown)
    signal.signal(signal.SIGTERM, shutdown)
    _serve(runtime.app, config.gateway.host, port or config.gateway.port)
    shutdown()


@main.command()
@click.option("--scenario", default="ubikampus-demo")
@click.option("--bus", "bus_url", required=True, help="Broker URL, e.g. mqtt://localhost:1883.")
@click.option("--seed", type=int, default=None)
@click.option("--realtime/--fast", default=True)
def simulate(scenario, bus_url, seed, realtime) -> None:
    """Run the device simulator against an external broker."""
    try:
        spec = load_scenario(scenario)
        client = MqttBus(bus_url).connect("simulator")
    except (ValueError, TransportError) as exc:
        _fail(str(exc))
        return
    base = int(time.time() * 1000) if realtime else 0
    simulator = Simulator(spec, bus_client=client, seed=seed, timestamp_base_ms=base)
    simulator.attach_action_stream(client)
    duration_ms = int(spec.duration_s * 1000)
    click.echo(f"simulating {len(spec.devices)} devices for {spec.duration_s:.0f}s ({'realtime' if realtime else 'fast'})")
    try:
        if realtime:
            started = time.time()
            while True:
                elapsed_ms = int((time.time() - started) * 1000)
                simulator.pump_actions()
                simulator.step(min(elapsed_ms, duration_ms))
                if elapsed_ms >= duration_ms:
                    break
                time.sleep(spec.tick_interval_ms / 1000.0)
        else:
            t = 0
            while t < duration_ms:
                t = min(t + spec.tick_interval_ms, duration_ms)
                simulator.pump_actions()
                simulator.step(t)
    except TransportError as exc:
        _fail(f"bus failure: {exc}", code=3)
    finally:
        client.close()
    click.echo(f"emitted {simulator.emitted_count} readings")


@main.command()
@click.option("--bus", "bus_url", required=True)
@click.option("--bounds", "bounds_path", type=click.Path(), default=None, help="JSON file of metric -> [low, high].")
@click.option("--alpha", type=float, default=0.3)
@click.option("--staleness", default="5s")
@click.option("--placement", type=click.Choice(["cloud"]), default="cloud")
def handler(bus_url, bounds_path, alpha, staleness, placement) -> None:
    """Run the signal handler as a standalone (cloud-placement) process."""
    bounds = ValidationBounds()
    if bounds_path:
        try:
            doc = json.loads(Path(bounds_path).read_text("utf-8"))
            bounds = ValidationBounds.from_mapping(doc)
        except (OSError, ValueError) as exc:
            _fail(f"bounds file: {exc}")
            return
    try:
        client = MqttBus(bus_url).connect("signal-handler")
    except TransportError as exc:
        _fail(str(exc), code=3)
        return
    config = HandlerConfig(bounds=bounds, alpha=alpha, staleness_window_ms=parse_duration_ms(staleness))
    service = HandlerService(client, SignalHandler(config))
    click.echo(f"signal handler consuming netwin/raw/# via {bus_url}")
    try:
        service.run_forever()
    except KeyboardInterrupt:
        service.stop()
        client.close()


@main.command()
@click.option("--bus", "bus_url", required=True)
@click.option("--snapshot-dir", type=click.Path(), default=None)
@click.option("--ttl", default="60s")
@click.option("--sweep", default="10s")
@click.option("--token-file", type=click.Path(), default=None)
def controller(bus_url, snapshot_dir, ttl, sweep, token_file) -> None:
    """Run the twin controller headless against an external broker."""
    tokens = ("netwin-dev",)
    if token_file:
        tokens = load_tokens_file(token_file)
    try:
        client = MqttBus(bus_url).connect("twin-controller")
    except TransportError as exc:
        _fail(str(exc), code=3)
        return
    twin_controller = TwinController(tokens=tokens)
    service = ControllerService(
        client,
        controller=twin_controller,
        token=tokens[0],
        ttl_ms=parse_duration_ms(ttl),
        sweep_interval_ms=parse_duration_ms(sweep),
    )
    click.echo(f"twin controller consuming netwin/curated/# via {bus_url}")

    def shutdown(*_args) -> None:
        service.stop()
        if snapshot_dir:
            path = Path(snapshot_dir)
            path.mkdir(parents=True, exist_ok=True)
            target = path / "final.twinsnap.json"
            target.write_text(twin_controller.snapshot(), "utf-8")
            click.echo(f"snapshot written to {target}")
        client.close()
        sys.exit(0)

    signal.signal(signal.SIGINT, shutdown)
    signal.signal(signal.SIGTERM, shutdown)
    try:
        service.run_forever()
    except KeyboardInterrupt:
        shutdown()


@main.command()
@click.option("--bus", "bus_url", required=True)
@click.option("--port", type=int, default=8080)
@click.option("--host", default="127.0.0.1")
@click.option("--token-file", type=click.Path(), default=None)
@click.option("--ttl", default="60s")
def serve(bus_url, port, host, token_file, ttl) -> None:
    """Gateway plus an embedded twin controller consuming curated topics."""
    tokens = ("netwin-dev",)
    if token_file:
        tokens = load_tokens_file(token_file)
    try:
        bus = MqttBus(bus_url)
        controller_client = bus.connect("twin-controller")
        gateway_client = bus.connect("gateway")
    except TransportError as exc:
        _fail(str(exc), code=3)
        return
    twin_controller = TwinController(tokens=tokens)
    service = ControllerService(
        controller_client, controller=twin_controller, token=tokens[0], ttl_ms=parse_duration_ms(ttl)
    ).start()
    app = create_app(twin_controller, gateway_client)
    click.echo(f"gateway on http://{host}:{port}, twin controller consuming via {bus_url}")
    try:
        _serve(app, host, port)
    finally:
        service.stop()


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=1883)
def broker(host, port) -> None:
    """Run the bundled MQTT 3.1.1 broker (for distributed demos)."""
    instance = MqttBroker(host, port)
    try:
        instance.start()
    except OSError as exc:
        _fail(f"cannot bind {host}:{port}: {exc}", code=3)
        return
    click.echo(f"mqtt broker on {instance.url}")
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    stop.wait()
    instance.stop()


@main.command("scenario")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=7)
def scenario_cmd(out_path, seed) -> None:
    """Write the bundled demo scenario to a JSON file for editing."""
    save_scenario(ubikampus_demo(seed), out_path)
    click.echo(f"scenario written to {out_path}")


if __name__ == "__main__":
    main()
