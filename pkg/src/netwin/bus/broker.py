"""Minimal MQTT 3.1.1 broker.

Exists so distributed mode and the bus contract suite work out of the box
with no external broker: QoS 0/1, clean sessions only, no retained
messages, no persistence, no auth. One copy of each message is delivered
per client with at least one matching subscription.
"""

from __future__ import annotations

import itertools
import logging
import socket
import struct
import threading

from netwin.bus import mqtt as wire
from netwin.bus.topics import topic_matches

logger = logging.getLogger(__name__)


class _BrokerSession:
    def __init__(self, broker: "MqttBroker", sock: socket.socket, peer: str) -> None:
        self.broker = broker
        self.sock = sock
        self.peer = peer
        self.reader = wire._SocketReader(sock)
        self.write_lock = threading.Lock()
        self.subscriptions: list[tuple[str, int]] = []  # (filter, granted qos)
        self.packet_ids = itertools.count(1)
        self.client_id = ""
        self.alive = True

    def send(self, data: bytes) -> None:
        with self.write_lock:
            self.sock.sendall(data)

    def run(self) -> None:
        try:
            packet = self.reader.read_packet()
            if packet.packet_type != wire.CONNECT:
                return
            if not packet.body.startswith(wire.PROTOCOL_NAME) or packet.body[6] != wire.PROTOCOL_LEVEL:
                self.send(wire.make_connack(return_code=1))  # unacceptable protocol
                return
            self.client_id, _ = wire.parse_string(packet.body, 10)
            self.send(wire.make_connack(return_code=0))
            while self.alive:
                self._handle(self.reader.read_packet())
        except (ConnectionError, OSError, struct.error):
            pass
        finally:
            self.broker._drop(self)
            try:
                self.sock.close()
            except OSError:
                pass

    def _handle(self, packet: wire.Packet) -> None:
        if packet.packet_type == wire.PUBLISH:
            topic, qos, packet_id, payload = wire.parse_publish(packet)
            if qos > 0 and packet_id is not None:
                self.send(wire.make_puback(packet_id))
            self.broker._route(topic, payload, qos)
        elif packet.packet_type == wire.SUBSCRIBE:
            (packet_id,) = struct.unpack_from(">H", packet.body, 0)
            offset, codes = 2, []
            while offset < len(packet.body):
                topic_filter, offset = wire.parse_string(packet.body, offset)
                requested_qos = packet.body[offset]
                offset += 1
                granted = min(requested_qos, 1)
                with self.broker._lock:
                    self.subscriptions.append((topic_filter, granted))
                codes.append(granted)
            self.send(wire.make_suback(packet_id, codes))
        elif packet.packet_type == wire.UNSUBSCRIBE:
            (packet_id,) = struct.unpack_from(">H", packet.body, 0)
            offset = 2
            while offset < len(packet.body):
                topic_filter, offset = wire.parse_string(packet.body, offset)
                with self.broker._lock:
                    self.subscriptions = [s for s in self.subscriptions if s[0] != topic_filter]
            self.send(wire.make_unsuback(packet_id))
        elif packet.packet_type == wire.PINGREQ:
            self.send(wire.encode_packet(wire.PINGRESP, 0, b""))
        elif packet.packet_type == wire.PUBACK:
            pass  # no redelivery tracking: localhost links, happy-path QoS 1
        elif packet.packet_type == wire.DISCONNECT:
            self.alive = False


class MqttBroker:
    """Threaded socket server; ``port=0`` binds an ephemeral port."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self.host = host
        self._requested_port = port
        self._listener: socket.socket | None = None
        self._sessions: list[_BrokerSession] = []
        self._lock = threading.Lock()
        self._accept_thread: threading.Thread | None = None
        self._stopping = False

    @property
    def port(self) -> int:
        if self._listener is None:
            raise RuntimeError("broker not started")
        return self._listener.getsockname()[1]

    @property
    def url(self) -> str:
        return f"mqtt://{self.host}:{self.port}"

    def start(self) -> "MqttBroker":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self._requested_port))
        listener.listen(64)
        self._listener = listener
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True, name="mqtt-broker")
        self._accept_thread.start()
        logger.info("mqtt broker listening on %s:%d", self.host, self.port)
        return self

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            session = _BrokerSession(self, sock, f"{addr[0]}:{addr[1]}")
            with self._lock:
                self._sessions.append(session)
            threading.Thread(target=session.run, daemon=True, name=f"mqtt-session-{addr[1]}").start()

    def _drop(self, session: _BrokerSession) -> None:
        with self._lock:
            if session in self._sessions:
                self._sessions.remove(session)

    def _route(self, topic: str, payload: bytes, publish_qos: int) -> None:
        # Single lock around routing keeps per-connection publish order intact.
        with self._lock:
            for session in self._sessions:
                granted = [q for f, q in session.subscriptions if topic_matches(f, topic)]
                if not granted:
                    continue
                qos = min(publish_qos, max(granted))
                packet_id = (next(session.packet_ids) % 65535) + 1 if qos > 0 else None
                try:
                    session.send(wire.make_publish(topic, payload, qos=qos, packet_id=packet_id))
                except OSError:
                    session.alive = False

    def stop(self) -> None:
        self._stopping = True
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            sessions = list(self._sessions)
        for session in sessions:
            session.alive = False
            try:
                session.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                session.sock.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5.0)
