"""MQTT 3.1.1 adapter for distributed mode.

A deliberately small client: QoS 1, clean sessions, no retained messages,
no will, no TLS. The wire codec lives here and is shared with the bundled
broker so the contract suite can run without external infrastructure.
"""

from __future__ import annotations

import itertools
import socket
import struct
import threading
import time
from dataclasses import dataclass
from urllib.parse import urlparse

from netwin.bus.base import BusClient, BusMessage, Subscription, TransportError
from netwin.bus.topics import topic_matches, validate_filter, validate_topic

CONNECT = 1
CONNACK = 2
PUBLISH = 3
PUBACK = 4
SUBSCRIBE = 8
SUBACK = 9
UNSUBSCRIBE = 10
UNSUBACK = 11
PINGREQ = 12
PINGRESP = 13
DISCONNECT = 14

PROTOCOL_NAME = b"\x00\x04MQTT"
PROTOCOL_LEVEL = 4

ACK_TIMEOUT_S = 10.0


# ---------------------------------------------------------------------------
# Wire codec


def encode_varint(value: int) -> bytes:
    if value < 0 or value > 268_435_455:
        raise ValueError(f"remaining length out of range: {value}")
    out = bytearray()
    while True:
        value, digit = divmod(value, 128)
        out.append(digit | (0x80 if value else 0))
        if not value:
            return bytes(out)


def encode_string(value: str) -> bytes:
    data = value.encode("utf-8")
    if len(data) > 0xFFFF:
        raise ValueError("string too long for MQTT")
    return struct.pack(">H", len(data)) + data


def encode_packet(packet_type: int, flags: int, body: bytes) -> bytes:
    return bytes([(packet_type << 4) | flags]) + encode_varint(len(body)) + body


@dataclass(frozen=True)
class Packet:
    packet_type: int
    flags: int
    body: bytes


class _SocketReader:
    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock

    def read_exactly(self, n: int) -> bytes:
        chunks = bytearray()
        while len(chunks) < n:
            chunk = self._sock.recv(n - len(chunks))
            if not chunk:
                raise ConnectionError("socket closed")
            chunks.extend(chunk)
        return bytes(chunks)

    def read_packet(self) -> Packet:
        first = self.read_exactly(1)[0]
        packet_type, flags = first >> 4, first & 0x0F
        remaining = 0
        for shift in range(0, 28, 7):
            digit = self.read_exactly(1)[0]
            remaining |= (digit & 0x7F) << shift
            if not digit & 0x80:
                break
        else:
            raise ConnectionError("malformed remaining length")
        body = self.read_exactly(remaining) if remaining else b""
        return Packet(packet_type, flags, body)


def parse_string(body: bytes, offset: int) -> tuple[str, int]:
    (length,) = struct.unpack_from(">H", body, offset)
    end = offset + 2 + length
    return body[offset + 2 : end].decode("utf-8"), end


def parse_publish(packet: Packet) -> tuple[str, int, int | None, bytes]:
    """Returns (topic, qos, packet_id, payload)."""
    qos = (packet.flags >> 1) & 0x03
    topic, offset = parse_string(packet.body, 0)
    packet_id = None
    if qos > 0:
        (packet_id,) = struct.unpack_from(">H", packet.body, offset)
        offset += 2
    return topic, qos, packet_id, packet.body[offset:]


def make_publish(topic: str, payload: bytes, qos: int, packet_id: int | None, dup: bool = False) -> bytes:
    flags = (0x08 if dup else 0) | (qos << 1)
    body = encode_string(topic)
    if qos > 0:
        if packet_id is None:
            raise ValueError("QoS > 0 requires a packet id")
        body += struct.pack(">H", packet_id)
    return encode_packet(PUBLISH, flags, body + payload)


def make_connect(client_id: str, keepalive_s: int = 0) -> bytes:
    body = PROTOCOL_NAME + bytes([PROTOCOL_LEVEL, 0x02]) + struct.pack(">H", keepalive_s)
    body += encode_string(client_id)
    return encode_packet(CONNECT, 0, body)


def make_connack(session_present: bool = False, return_code: int = 0) -> bytes:
    return encode_packet(CONNACK, 0, bytes([0x01 if session_present else 0x00, return_code]))


def make_puback(packet_id: int) -> bytes:
    return encode_packet(PUBACK, 0, struct.pack(">H", packet_id))


def make_subscribe(packet_id: int, topic_filter: str, qos: int = 1) -> bytes:
    body = struct.pack(">H", packet_id) + encode_string(topic_filter) + bytes([qos])
    return encode_packet(SUBSCRIBE, 0x02, body)


def make_suback(packet_id: int, return_codes: list[int]) -> bytes:
    return encode_packet(SUBACK, 0, struct.pack(">H", packet_id) + bytes(return_codes))


def make_unsubscribe(packet_id: int, topic_filter: str) -> bytes:
    return encode_packet(UNSUBSCRIBE, 0x02, struct.pack(">H", packet_id) + encode_string(topic_filter))


def make_unsuback(packet_id: int) -> bytes:
    return encode_packet(UNSUBACK, 0, struct.pack(">H", packet_id))


# ---------------------------------------------------------------------------
# Client


def parse_broker_url(url: str) -> tuple[str, int]:
    parsed = urlparse(url if "://" in url else f"mqtt://{url}")
    if parsed.scheme not in ("mqtt", "tcp"):
        raise TransportError(f"unsupported broker scheme {parsed.scheme!r}")
    return parsed.hostname or "127.0.0.1", parsed.port or 1883


class MqttBus:
    """Connection factory for one broker, mirroring InMemoryBus.connect."""

    def __init__(self, url: str) -> None:
        self.host, self.port = parse_broker_url(url)
        self._client_ids = itertools.count(1)

    def connect(self, client_id: str | None = None) -> "MqttClient":
        if client_id is None:
            client_id = f"netwin-{time.monotonic_ns()}-{next(self._client_ids)}"
        return MqttClient(self.host, self.port, client_id)


class MqttClient(BusClient):
    """One MQTT connection. Thread-safe publish; reader thread dispatches
    incoming messages to every local subscription whose filter matches."""

    def __init__(self, host: str, port: int, client_id: str) -> None:
        self.client_id = client_id
        try:
            self._sock = socket.create_connection((host, port), timeout=10.0)
        except OSError as exc:
            raise TransportError(f"cannot reach broker at {host}:{port}: {exc}") from exc
        self._sock.settimeout(None)
        self._reader = _SocketReader(self._sock)
        self._write_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._packet_ids = itertools.count(1)
        self._pending_acks: dict[tuple[int, int], threading.Event] = {}
        self._subscriptions: list[Subscription] = []
        self._recv_seq = itertools.count(1)
        self._closed = False
        self._error: Exception | None = None

        self._send(make_connect(client_id))
        try:
            packet = self._reader.read_packet()
        except ConnectionError as exc:
            raise TransportError(f"broker closed connection during handshake: {exc}") from exc
        if packet.packet_type != CONNACK or len(packet.body) < 2 or packet.body[1] != 0:
            self._sock.close()
            raise TransportError("broker refused connection")

        self._reader_thread = threading.Thread(target=self._read_loop, daemon=True, name=f"mqtt-{client_id}")
        self._reader_thread.start()

    # -- wire helpers

    def _send(self, data: bytes) -> None:
        with self._write_lock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                raise TransportError(f"send failed: {exc}") from exc

    def _next_packet_id(self) -> int:
        return (next(self._packet_ids) % 65535) + 1

    def _expect_ack(self, ack_type: int, packet_id: int) -> threading.Event:
        # Register before sending so a fast ack cannot slip past the waiter.
        event = threading.Event()
        with self._state_lock:
            self._pending_acks[(ack_type, packet_id)] = event
        return event

    def _wait_ack(self, event: threading.Event, ack_type: int, packet_id: int) -> None:
        if not event.wait(ACK_TIMEOUT_S):
            with self._state_lock:
                self._pending_acks.pop((ack_type, packet_id), None)
            raise TransportError(f"timed out waiting for ack {ack_type}/{packet_id}")
        if self._error is not None:
            raise TransportError(str(self._error))

    def _read_loop(self) -> None:
        try:
            while not self._closed:
                packet = self._reader.read_packet()
                if packet.packet_type == PUBLISH:
                    topic, qos, packet_id, payload = parse_publish(packet)
                    message = BusMessage(topic=topic, payload=payload, publish_seq=next(self._recv_seq))
                    with self._state_lock:
                        targets = [
                            s for s in self._subscriptions if topic_matches(s.topic_filter, topic)
                        ]
                    for subscription in targets:
                        subscription._deliver(message)
                    if qos > 0 and packet_id is not None:
                        self._send(make_puback(packet_id))
                elif packet.packet_type in (PUBACK, SUBACK, UNSUBACK):
                    (packet_id,) = struct.unpack_from(">H", packet.body, 0)
                    with self._state_lock:
                        event = self._pending_acks.pop((packet.packet_type, packet_id), None)
                    if event is not None:
                        event.set()
                elif packet.packet_type == PINGRESP:
                    pass
        except (ConnectionError, OSError, TransportError) as exc:
            self._error = exc
        finally:
            with self._state_lock:
                pending = list(self._pending_acks.values())
                self._pending_acks.clear()
            for event in pending:
                event.set()

    # -- BusClient contract

    def publish(self, topic: str, payload: bytes) -> None:
        validate_topic(topic)
        if self._closed:
            raise TransportError("client is closed")
        packet_id = self._next_packet_id()
        event = self._expect_ack(PUBACK, packet_id)
        self._send(make_publish(topic, payload, qos=1, packet_id=packet_id))
        self._wait_ack(event, PUBACK, packet_id)

    def subscribe(self, topic_filter: str) -> Subscription:
        validate_filter(topic_filter)
        if self._closed:
            raise TransportError("client is closed")
        subscription = Subscription(topic_filter, self._unsubscribe)
        packet_id = self._next_packet_id()
        with self._state_lock:
            self._subscriptions.append(subscription)
        try:
            event = self._expect_ack(SUBACK, packet_id)
            self._send(make_subscribe(packet_id, topic_filter))
            self._wait_ack(event, SUBACK, packet_id)
        except TransportError:
            with self._state_lock:
                if subscription in self._subscriptions:
                    self._subscriptions.remove(subscription)
            raise
        return subscription

    def _unsubscribe(self, subscription: Subscription) -> None:
        with self._state_lock:
            if subscription in self._subscriptions:
                self._subscriptions.remove(subscription)
            still_used = any(s.topic_filter == subscription.topic_filter for s in self._subscriptions)
        if self._closed or still_used:
            return
        packet_id = self._next_packet_id()
        try:
            event = self._expect_ack(UNSUBACK, packet_id)
            self._send(make_unsubscribe(packet_id, subscription.topic_filter))
            self._wait_ack(event, UNSUBACK, packet_id)
        except TransportError:
            pass  # connection going away also unsubscribes

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        for subscription in list(self._subscriptions):
            subscription.close()
        try:
            self._send(encode_packet(DISCONNECT, 0, b""))
        except TransportError:
            pass
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        self._reader_thread.join(timeout=5.0)
