"""The one contract suite, parametrized over both bus implementations."""

from __future__ import annotations

import pytest

from bus_contract_suite import CONTRACT_CHECKS
from netwin.bus import InMemoryBus, MqttBus, TransportError
from netwin.bus.broker import MqttBroker


@pytest.fixture(scope="module")
def broker():
    broker = MqttBroker().start()
    yield broker
    broker.stop()


@pytest.fixture(params=["memory", "mqtt"])
def connect(request, broker):
    bus = InMemoryBus() if request.param == "memory" else MqttBus(broker.url)
    opened = []

    def factory(name=None):
        client = bus.connect(name)
        opened.append(client)
        return client

    yield factory
    for client in opened:
        client.close()


@pytest.mark.parametrize("check", CONTRACT_CHECKS, ids=lambda c: c.__name__)
def test_contract(connect, check):
    check(connect)


class TestMqttOnly:
    def test_unreachable_broker_raises_transport_error(self):
        with pytest.raises(TransportError):
            MqttBus("mqtt://127.0.0.1:1").connect()

    def test_client_ids_are_distinct(self, broker):
        bus = MqttBus(broker.url)
        a, b = bus.connect(), bus.connect()
        try:
            assert a.client_id != b.client_id
        finally:
            a.close()
            b.close()
