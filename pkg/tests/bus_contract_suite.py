"""The bus delivery/ordering contract, written once and run against every
implementation. Each check takes a `connect` factory yielding fresh
clients on the same bus."""

from __future__ import annotations

import threading

RECV_TIMEOUT = 5.0


def collect(subscription, n, timeout=RECV_TIMEOUT):
    out = []
    for _ in range(n):
        message = subscription.get(timeout=timeout)
        if message is None:
            break
        out.append(message)
    return out


def check_matching_subscriber_receives_payload(connect):
    subscription = connect().subscribe("netwin/raw/+/cellular")
    connect().publish("netwin/raw/d1/cellular", b"hello")
    messages = collect(subscription, 1)
    assert [m.payload for m in messages] == [b"hello"]
    assert messages[0].topic == "netwin/raw/d1/cellular"


def check_non_matching_subscriber_receives_nothing(connect):
    subscription = connect().subscribe("netwin/raw/d1/wifi")
    connect().publish("netwin/raw/d1/cellular", b"hello")
    assert subscription.get(timeout=0.3) is None


def check_per_topic_order_preserved(connect):
    subscription = connect().subscribe("netwin/raw/d1/cellular")
    publisher = connect()
    for i in range(20):
        publisher.publish("netwin/raw/d1/cellular", str(i).encode())
    payloads = [m.payload for m in collect(subscription, 20)]
    assert payloads == [str(i).encode() for i in range(20)]


def check_multi_level_wildcard(connect):
    subscription = connect().subscribe("netwin/raw/#")
    publisher = connect()
    publisher.publish("netwin/raw/d1/cellular", b"a")
    publisher.publish("netwin/raw/d2/wifi", b"b")
    publisher.publish("netwin/curated/d1/wifi", b"nope")
    payloads = {m.payload for m in collect(subscription, 2)}
    assert payloads == {b"a", b"b"}
    assert subscription.get(timeout=0.3) is None


def check_fan_out_to_same_filter(connect):
    s1 = connect().subscribe("netwin/events/graph")
    s2 = connect().subscribe("netwin/events/graph")
    connect().publish("netwin/events/graph", b"change")
    assert [m.payload for m in collect(s1, 1)] == [b"change"]
    assert [m.payload for m in collect(s2, 1)] == [b"change"]


def check_closed_stream_receives_nothing(connect):
    subscription = connect().subscribe("netwin/raw/d1/cellular")
    subscription.close()
    connect().publish("netwin/raw/d1/cellular", b"late")
    assert subscription.get(timeout=0.3) is None


def check_no_delivery_before_subscription(connect):
    publisher = connect()
    publisher.publish("netwin/raw/d1/cellular", b"early")
    subscription = connect().subscribe("netwin/raw/d1/cellular")
    assert subscription.get(timeout=0.3) is None


def check_empty_payload_allowed(connect):
    subscription = connect().subscribe("netwin/events/graph")
    connect().publish("netwin/events/graph", b"")
    assert [m.payload for m in collect(subscription, 1)] == [b""]


def check_publish_seq_strictly_increasing(connect):
    subscription = connect().subscribe("netwin/raw/#")
    publisher = connect()
    for i in range(5):
        publisher.publish("netwin/raw/d1/wifi", str(i).encode())
    seqs = [m.publish_seq for m in collect(subscription, 5)]
    assert seqs == sorted(seqs) and len(set(seqs)) == 5


def check_concurrent_publishers_keep_per_publisher_order(connect):
    subscription = connect().subscribe("netwin/raw/#")
    publishers = [connect() for _ in range(4)]

    def pump(client, tag):
        for i in range(25):
            client.publish(f"netwin/raw/{tag}/wifi", f"{tag}:{i}".encode())

    threads = [
        threading.Thread(target=pump, args=(client, f"d{n}")) for n, client in enumerate(publishers)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    messages = collect(subscription, 100)
    assert len(messages) == 100
    for n in range(4):
        mine = [m.payload for m in messages if m.payload.startswith(f"d{n}:".encode())]
        assert mine == [f"d{n}:{i}".encode() for i in range(25)]


CONTRACT_CHECKS = [
    check_matching_subscriber_receives_payload,
    check_non_matching_subscriber_receives_nothing,
    check_per_topic_order_preserved,
    check_multi_level_wildcard,
    check_fan_out_to_same_filter,
    check_closed_stream_receives_nothing,
    check_no_delivery_before_subscription,
    check_empty_payload_allowed,
    check_publish_seq_strictly_increasing,
    check_concurrent_publishers_keep_per_publisher_order,
]
