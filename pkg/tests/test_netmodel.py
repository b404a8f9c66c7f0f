import pytest

from trustsdn.engine import DomainError, RngStream
from trustsdn.netmodel import (
    CHANNEL_DEFAULTS,
    ChannelKind,
    Direction,
    DuplicateRule,
    FloodAction,
    FlowRule,
    ForwardAction,
    Link,
    LinkSpec,
    LinkState,
    Packet,
    PacketInAction,
    Protocol,
    SwitchState,
    serialization_us,
    switch_forward,
    transmit,
)


def make_packet(pkt_id=1, src="10.0.0.1", dst="10.0.0.2",
                protocol=Protocol.ICMP, size=230):
    return Packet(pkt_id=pkt_id, src_ip=src, dst_ip=dst, protocol=protocol,
                  size=size, created_at=0)


def make_link(channel=ChannelKind.PRIMARY, loss_p=None, stream=None):
    base = CHANNEL_DEFAULTS[channel]
    spec = LinkSpec(base.down_bps, base.up_bps, base.prop_delay_us,
                    base.loss_p if loss_p is None else loss_p, channel)
    return Link(name="L", spec=spec, a="H1", b="S1", b_port=1, stream=stream)


def test_serialization_rounds_up():
    # independently computed: bits * 1e6 / bps, ceiling
    assert serialization_us(230, 1_000_000) == 1840
    assert serialization_us(230, 5_000_000) == 368
    assert serialization_us(128, 200_000_000) == 6      # 5.12 -> 6
    assert serialization_us(128, 1_000_000_000) == 2    # 1.024 -> 2
    assert serialization_us(1500, 10_000_000) == 1200


def test_spec_validation():
    with pytest.raises(DomainError):
        LinkSpec(0, 1, 1, 0.0, ChannelKind.CORE)
    with pytest.raises(DomainError):
        LinkSpec(1, 1, 1, 1.0, ChannelKind.CORE)


def test_transmit_delay_is_serialization_plus_propagation():
    link = make_link(ChannelKind.FALLBACK, loss_p=0.0)
    res = transmit(make_packet(), link, Direction.UP, 1000)
    # fallback up: 1 Mbps -> 1840 us serialization, 500 us propagation
    assert res.status == "delivered"
    assert res.arrival == 1000 + 1840 + 500


def test_transmit_fifo_occupancy():
    link = make_link(ChannelKind.FALLBACK, loss_p=0.0)
    first = transmit(make_packet(1), link, Direction.UP, 0)
    second = transmit(make_packet(2), link, Direction.UP, 100)
    assert first.start == 0
    assert second.start == 1840  # waits for the first to clock out
    assert second.arrival == 1840 + 1840 + 500
    # directions do not interfere
    down = transmit(make_packet(3), link, Direction.DOWN, 100)
    assert down.start == 100


def test_transmit_loss_still_occupies_and_skips_channel_trace():
    link = make_link(loss_p=0.999, stream=RngStream(0, "loss:test"))
    pkt = make_packet()
    res = transmit(pkt, link, Direction.UP, 0)
    assert res.status == "lost"
    assert pkt.channel_trace == []
    assert link.busy_until[Direction.UP] > 0


def test_transmit_on_down_link():
    link = make_link(loss_p=0.0)
    link.state = LinkState.DOWN
    res = transmit(make_packet(), link, Direction.UP, 0)
    assert res.status == "link_down"
    assert link.busy_until[Direction.UP] == 0


def test_channel_trace_records_path():
    pkt = make_packet()
    transmit(pkt, make_link(ChannelKind.PRIMARY, loss_p=0.0), Direction.UP, 0)
    transmit(pkt, make_link(ChannelKind.FALLBACK, loss_p=0.0), Direction.DOWN, 0)
    assert pkt.channel_trace == [ChannelKind.PRIMARY, ChannelKind.FALLBACK]


def make_switch():
    sw = SwitchState(switch_id="S1")
    for port in range(1, 5):
        sw.ports[port] = f"link{port}"
    return sw


def test_switch_forward_uses_rule():
    sw = make_switch()
    sw.install(FlowRule("10.0.0.1", "10.0.0.2", out_port=2,
                        channel=ChannelKind.PRIMARY))
    action = switch_forward(sw, make_packet(), in_port=1)
    assert action == ForwardAction(out_port=2)
    assert sw.mac_ip_table["10.0.0.1"] == 1


def test_switch_floods_unmatched_arp():
    sw = make_switch()
    pkt = make_packet(protocol=Protocol.ARP, size=64)
    action = switch_forward(sw, pkt, in_port=2)
    assert action == FloodAction(ports=(1, 3, 4))


def test_switch_escalates_unmatched_data():
    sw = make_switch()
    action = switch_forward(sw, make_packet(), in_port=3)
    assert action == PacketInAction(in_port=3)


def test_switch_forward_rejects_unknown_port():
    with pytest.raises(DomainError):
        switch_forward(make_switch(), make_packet(), in_port=99)


def test_install_idempotent_and_conflicting():
    sw = make_switch()
    rule = FlowRule("a", "b", out_port=1, channel=ChannelKind.PRIMARY)
    assert sw.install(rule) is True
    same = FlowRule("a", "b", out_port=1, channel=ChannelKind.PRIMARY)
    assert sw.install(same) is False
    conflict = FlowRule("a", "b", out_port=2, channel=ChannelKind.PRIMARY)
    with pytest.raises(DuplicateRule):
        sw.install(conflict)


def test_lookup_prefers_higher_priority():
    sw = make_switch()
    sw.install(FlowRule("a", "b", out_port=1, channel=ChannelKind.PRIMARY, priority=10))
    sw.install(FlowRule("a", "b", out_port=2, channel=ChannelKind.FALLBACK, priority=20))
    assert sw.lookup("a", "b").out_port == 2


def test_remove_rules_by_ip_and_channel():
    sw = make_switch()
    sw.install(FlowRule("a", "b", out_port=1, channel=ChannelKind.PRIMARY))
    sw.install(FlowRule("b", "a", out_port=2, channel=ChannelKind.PRIMARY))
    sw.install(FlowRule("a", "c", out_port=3, channel=ChannelKind.FALLBACK))
    removed = sw.remove_rules(frozenset({"a"}), ChannelKind.PRIMARY)
    assert {r.match for r in removed} == {("a", "b"), ("b", "a")}
    assert sw.lookup("a", "c") is not None  # other channel untouched


def test_packet_size_must_be_positive():
    with pytest.raises(DomainError):
        make_packet(size=0)
