import pytest

from trustsdn.controller import (
    Controller,
    DECISION_LOG_HEADER,
    Decision,
    DeleteFlows,
    DropPacket,
    FloodPacket,
    ForwardPacket,
    HostAttachment,
    InstallFlow,
    MirrorToIds,
    PacketInMeta,
    TrustTable,
    UnknownSwitch,
    decision_log_csv,
    trust_gate,
)
from trustsdn.netmodel import ChannelKind, LinkState, Protocol
from trustsdn.topology import S1, S2, TopologySpec, build


def make_controller(n_hosts=4, **kwargs):
    net = build(TopologySpec(n_hosts=n_hosts))
    attachments = {
        addr.ip: HostAttachment(
            host=name, ip=addr.ip,
            primary_port=net.host_port(S1, name),
            fallback_port=net.host_port(S2, name),
            primary_link=net.host_links[name][ChannelKind.PRIMARY],
            fallback_link=net.host_links[name][ChannelKind.FALLBACK],
        )
        for name, addr in net.hosts.items()
    }
    ctl = Controller(trust=TrustTable(), attachments=attachments, **kwargs)
    return ctl, net


def meta(src="10.0.0.1", dst="10.0.0.2", switch=S1, in_port=1, pkt_id=7):
    return PacketInMeta(pkt_id=pkt_id, src_ip=src, dst_ip=dst,
                        protocol=Protocol.ICMP, in_port=in_port, switch_id=switch)


def seen(ctl, *ips):
    for i, ip in enumerate(ips, start=1):
        ctl.host_locations[ip] = (S1, i)


def test_trust_gate_boundaries():
    assert trust_gate(100, 100, 50) == Decision.PERMIT_PRIMARY
    assert trust_gate(50, 50, 50) == Decision.PERMIT_PRIMARY
    assert trust_gate(49.9, 100, 50) == Decision.QUARANTINE
    assert trust_gate(100, 49.9, 50) == Decision.QUARANTINE


def test_trust_table_defaults_and_clamping():
    table = TrustTable()
    assert table.get("10.0.0.9") == 100.0
    assert table.adjust("10.0.0.9", -250) == (100.0, 0.0)
    assert table.adjust("10.0.0.9", 150) == (0.0, 100.0)
    assert table.trusted("10.0.0.9")


def test_permit_installs_bidirectional_pair_and_forwards():
    ctl, _ = make_controller()
    seen(ctl, "10.0.0.1", "10.0.0.2")
    actions = ctl.on_packet_in(meta(), t=100)
    kinds = [type(a) for a in actions]
    assert kinds == [MirrorToIds, InstallFlow, InstallFlow, ForwardPacket]
    fwd, rev = actions[1].rule, actions[2].rule
    assert actions[1].switch_id == S1 and actions[2].switch_id == S1
    assert fwd.match == ("10.0.0.1", "10.0.0.2") and fwd.out_port == 2
    assert rev.match == ("10.0.0.2", "10.0.0.1") and rev.out_port == 1
    assert fwd.channel == ChannelKind.PRIMARY
    assert actions[3].out_port == 2


def test_unknown_destination_floods():
    ctl, _ = make_controller()
    actions = ctl.on_packet_in(meta(), t=100)
    assert [type(a) for a in actions] == [MirrorToIds, FloodPacket]


def test_quarantine_action_order():
    ctl, _ = make_controller()
    seen(ctl, "10.0.0.1", "10.0.0.2")
    ctl.trust.set("10.0.0.1", 40)
    actions = ctl.on_packet_in(meta(), t=100)
    kinds = [type(a) for a in actions]
    delete = kinds.index(DeleteFlows)
    drop = kinds.index(DropPacket)
    install = kinds.index(InstallFlow)
    assert delete < drop < install
    assert all(a.rule.channel == ChannelKind.FALLBACK
               for a in actions if isinstance(a, InstallFlow))


def test_quarantine_drop_all_mode_installs_nothing():
    from trustsdn.controller import QuarantineMode
    ctl, _ = make_controller(quarantine_mode=QuarantineMode.DROP_ALL)
    seen(ctl, "10.0.0.1", "10.0.0.2")
    ctl.trust.set("10.0.0.2", 10)
    actions = ctl.on_packet_in(meta(), t=100)
    assert not any(isinstance(a, InstallFlow) for a in actions)
    assert any(isinstance(a, DropPacket) for a in actions)


def test_mirror_is_always_first():
    ctl, _ = make_controller()
    seen(ctl, "10.0.0.1", "10.0.0.2")
    for score in (100, 10):
        ctl.trust.set("10.0.0.1", score)
        actions = ctl.on_packet_in(meta(), t=0)
        assert isinstance(actions[0], MirrorToIds)


def test_trust_drop_withdraws_and_redirects_active_peers():
    ctl, _ = make_controller()
    seen(ctl, "10.0.0.1", "10.0.0.2")
    ctl.on_packet_in(meta(), t=0)  # primary pair pending
    actions = ctl.on_trust_change("10.0.0.1", 100, 30, t=50)
    assert isinstance(actions[0], DeleteFlows)
    assert actions[0].channel == ChannelKind.PRIMARY
    installs = [a for a in actions if isinstance(a, InstallFlow)]
    assert len(installs) == 2
    assert {a.rule.match for a in installs} == {
        ("10.0.0.1", "10.0.0.2"), ("10.0.0.2", "10.0.0.1")}
    assert all(a.rule.channel == ChannelKind.FALLBACK for a in installs)


def test_upward_crossing_restores_nothing():
    ctl, _ = make_controller()
    assert ctl.on_trust_change("10.0.0.1", 30, 80, t=0) == []


def test_readmission_is_lazy_via_next_packet_in():
    ctl, _ = make_controller()
    seen(ctl, "10.0.0.1", "10.0.0.2")
    ctl.trust.set("10.0.0.1", 30)
    ctl.on_packet_in(meta(), t=0)  # quarantined
    ctl.trust.set("10.0.0.1", 80)
    assert ctl.on_trust_change("10.0.0.1", 30, 80, t=10) == []
    actions = ctl.on_packet_in(meta(), t=20)
    installs = [a for a in actions if isinstance(a, InstallFlow)]
    assert installs and all(a.rule.channel == ChannelKind.PRIMARY for a in installs)


def test_link_down_failover_and_idempotence():
    ctl, net = make_controller()
    seen(ctl, "10.0.0.1", "10.0.0.2")
    ctl.on_packet_in(meta(), t=0)
    actions = ctl.on_link_down("H1-S1", "10.0.0.1", t=100)
    assert isinstance(actions[0], DeleteFlows)
    installs = [a for a in actions if isinstance(a, InstallFlow)]
    assert len(installs) == 2
    assert all(a.switch_id == S2 for a in installs)
    # second notification is a no-op
    assert ctl.on_link_down("H1-S1", "10.0.0.1", t=200) == []


def test_link_down_without_active_flows_is_logged_noop():
    ctl, _ = make_controller()
    assert ctl.on_link_down("H3-S1", "10.0.0.3", t=0) == []
    assert ctl.decision_log[-1]["decision"] == "NoActiveFlows"


def test_packet_in_with_dead_primary_uses_fallback():
    ctl, _ = make_controller()
    seen(ctl, "10.0.0.1", "10.0.0.2")
    ctl.link_status["H1-S1"] = LinkState.DOWN
    actions = ctl.on_packet_in(meta(), t=0)
    installs = [a for a in actions if isinstance(a, InstallFlow)]
    assert installs and all(a.rule.channel == ChannelKind.FALLBACK for a in installs)
    # escalated at S1, which cannot reach fallback: packet is dropped
    assert any(isinstance(a, DropPacket) for a in actions)


def test_unknown_switch_raises():
    ctl, _ = make_controller()
    with pytest.raises(UnknownSwitch):
        ctl.on_packet_in(meta(switch="S9"), t=0)


def test_decision_log_csv_shape():
    ctl, _ = make_controller()
    seen(ctl, "10.0.0.1", "10.0.0.2")
    ctl.on_packet_in(meta(), t=5)
    csv_text = decision_log_csv(ctl)
    lines = csv_text.strip().split("\n")
    assert lines[0] == DECISION_LOG_HEADER
    assert lines[1].startswith("5,packet_in,10.0.0.1,10.0.0.2,")
    assert "PermitPrimary" in lines[1]
