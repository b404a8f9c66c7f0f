"""Dual-homed topology builder.

Every host gets one primary link to S1 and one fallback link to S2;
S1 and S2 uplink to the backbone switch S3, which also attaches the IDS
node and the controller. Port numbering convention (also shown by
export_text): on S1/S2, port k is host k and port n_hosts+1 is the S3
uplink; on S3, port 1=S1, 2=S2, 3=IDS, 4=controller.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .engine import RngStream
from .netmodel import (
    CHANNEL_DEFAULTS,
    ChannelKind,
    Link,
    LinkSpec,
    NodeAddress,
    Role,
    SwitchState,
)

S1, S2, S3 = "S1", "S2", "S3"
IDS_NODE, CONTROLLER_NODE = "IDS", "CTRL"


class InvalidSpec(Exception):
    pass


@dataclass(frozen=True)
class TopologySpec:
    n_hosts: int
    link_overrides: Optional[Dict[ChannelKind, LinkSpec]] = None
    seed: int = 0

    def channel_spec(self, channel: ChannelKind) -> LinkSpec:
        if self.link_overrides and channel in self.link_overrides:
            return self.link_overrides[channel]
        return CHANNEL_DEFAULTS[channel]


@dataclass(frozen=True)
class Violation:
    kind: str
    element: str

    def __str__(self):
        return f"{self.kind}({self.element})"


@dataclass
class Network:
    spec: TopologySpec
    hosts: Dict[str, NodeAddress] = field(default_factory=dict)  # "H1" -> addr
    switches: Dict[str, SwitchState] = field(default_factory=dict)
    links: Dict[str, Link] = field(default_factory=dict)
    host_links: Dict[str, Dict[ChannelKind, str]] = field(default_factory=dict)
    ids_node: Optional[NodeAddress] = None
    controller_node: Optional[NodeAddress] = None

    def ip_of(self, host: str) -> str:
        return self.hosts[host].ip

    def host_of_ip(self, ip: str) -> Optional[str]:
        for name, addr in self.hosts.items():
            if addr.ip == ip:
                return name
        return None

    def host_port(self, switch: str, host_name: str) -> int:
        """Port of `host_name` on S1 (primary side) or S2 (fallback side)."""
        channel = ChannelKind.PRIMARY if switch == S1 else ChannelKind.FALLBACK
        link = self.links[self.host_links[host_name][channel]]
        return link.b_port


def host_ip(k: int) -> str:
    """k-th host address, 10.0.x.y, unique for any practical host count."""
    return f"10.0.{(k - 1) // 250}.{(k - 1) % 250 + 1}"


def build(spec: TopologySpec) -> Network:
    if spec.n_hosts < 2:
        raise InvalidSpec(f"n_hosts must be >= 2, got {spec.n_hosts}")
    net = Network(spec=spec)
    for sw_id in (S1, S2, S3):
        net.switches[sw_id] = SwitchState(switch_id=sw_id)

    def add_link(name: str, channel: ChannelKind, a: str, b: str,
                 a_port: Optional[int], b_port: Optional[int]) -> Link:
        link = Link(
            name=name,
            spec=spec.channel_spec(channel),
            a=a, b=b, a_port=a_port, b_port=b_port,
            stream=RngStream(spec.seed, f"loss:{name}"),
        )
        net.links[name] = link
        if a in net.switches and a_port is not None:
            net.switches[a].ports[a_port] = name
        if b in net.switches and b_port is not None:
            net.switches[b].ports[b_port] = name
        return link

    for k in range(1, spec.n_hosts + 1):
        name = f"H{k}"
        net.hosts[name] = NodeAddress(node_id=k, ip=host_ip(k), role=Role.HOST)
        add_link(f"{name}-{S1}", ChannelKind.PRIMARY, name, S1, None, k)
        add_link(f"{name}-{S2}", ChannelKind.FALLBACK, name, S2, None, k)
        net.host_links[name] = {
            ChannelKind.PRIMARY: f"{name}-{S1}",
            ChannelKind.FALLBACK: f"{name}-{S2}",
        }

    uplink_port = spec.n_hosts + 1
    add_link(f"{S1}-{S3}", ChannelKind.CORE, S1, S3, uplink_port, 1)
    add_link(f"{S2}-{S3}", ChannelKind.CORE, S2, S3, uplink_port, 2)
    net.ids_node = NodeAddress(node_id=1001, ip="10.0.100.1", role=Role.IDS)
    net.controller_node = NodeAddress(node_id=1002, ip="10.0.100.2", role=Role.CONTROLLER)
    add_link(f"{IDS_NODE}-{S3}", ChannelKind.CORE, IDS_NODE, S3, None, 3)
    add_link(f"{CONTROLLER_NODE}-{S3}", ChannelKind.CORE, CONTROLLER_NODE, S3, None, 4)
    return net


def validate(network: Network) -> List[Violation]:
    violations: List[Violation] = []
    seen_ips: Dict[str, str] = {}
    for name, addr in network.hosts.items():
        if addr.ip in seen_ips:
            violations.append(Violation("DuplicateIp", f"{seen_ips[addr.ip]},{name}:{addr.ip}"))
        seen_ips[addr.ip] = name
        channels = {
            network.links[ln].spec.channel
            for ln in network.host_links.get(name, {}).values()
            if ln in network.links
        }
        if ChannelKind.PRIMARY not in channels:
            violations.append(Violation("MissingPrimary", name))
        if ChannelKind.FALLBACK not in channels:
            violations.append(Violation("MissingFallback", name))
        if channels - {ChannelKind.PRIMARY, ChannelKind.FALLBACK}:
            violations.append(Violation("ExtraHostChannel", name))
    for core_name in (f"{S1}-{S3}", f"{S2}-{S3}", f"{IDS_NODE}-{S3}", f"{CONTROLLER_NODE}-{S3}"):
        link = network.links.get(core_name)
        if link is None:
            violations.append(Violation("MissingCoreLink", core_name))
        elif link.spec.channel != ChannelKind.CORE:
            violations.append(Violation("WrongChannel", core_name))
    expected = 2 * len(network.hosts) + 4
    if len(network.links) != expected:
        violations.append(Violation("LinkCount", f"expected {expected}, got {len(network.links)}"))
    if network.ids_node is None or network.ids_node.role != Role.IDS:
        violations.append(Violation("MissingIds", IDS_NODE))
    if network.controller_node is None or network.controller_node.role != Role.CONTROLLER:
        violations.append(Violation("MissingController", CONTROLLER_NODE))
    return violations


def export_text(network: Network) -> str:
    """One line per node and link; stable order, used for golden tests."""
    lines = []
    for name, addr in network.hosts.items():
        lines.append(f"host {name} ip={addr.ip}")
    lines.append(f"node {IDS_NODE} ip={network.ids_node.ip} role=Ids")
    lines.append(f"node {CONTROLLER_NODE} ip={network.controller_node.ip} role=Controller")
    for sw_id, sw in network.switches.items():
        ports = " ".join(f"{p}:{ln}" for p, ln in sorted(sw.ports.items()))
        lines.append(f"switch {sw_id} ports[{ports}]")
    for name, link in network.links.items():
        s = link.spec
        lines.append(
            f"link {name} channel={s.channel.value} a={link.a} b={link.b} "
            f"down_bps={s.down_bps} up_bps={s.up_bps} prop_us={s.prop_delay_us} "
            f"loss={s.loss_p} state={link.state.value}"
        )
    return "\n".join(lines) + "\n"
