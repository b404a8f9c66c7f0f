"""Data-plane primitives: packets, links, switches.

Links are directional (down/up bandwidth), add serialization plus
propagation delay, and lose packets with an i.i.d. Bernoulli draw from
the link's own RNG stream. Switches do exact-match (src, dst) flow-table
lookup, flood unmatched ARP, and escalate everything else as packet-in.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .engine import DomainError, RngStream, SimTime, draw_bernoulli


class Role(str, Enum):
    HOST = "Host"
    IDS = "Ids"
    CONTROLLER = "Controller"


class ChannelKind(str, Enum):
    PRIMARY = "Primary"
    FALLBACK = "Fallback"
    CORE = "Core"


class Protocol(str, Enum):
    ARP = "Arp"
    ICMP = "Icmp"
    IPV4_DATA = "Ipv4Data"


class LinkState(str, Enum):
    UP = "Up"
    DOWN = "Down"


class Direction(str, Enum):
    UP = "Up"      # a -> b (host/edge node toward its switch, Sx toward S3)
    DOWN = "Down"  # b -> a


@dataclass(frozen=True)
class NodeAddress:
    node_id: int
    ip: str
    role: Role = Role.HOST


@dataclass(frozen=True)
class LinkSpec:
    down_bps: int
    up_bps: int
    prop_delay_us: SimTime
    loss_p: float
    channel: ChannelKind

    def __post_init__(self):
        if self.down_bps <= 0 or self.up_bps <= 0:
            raise DomainError("bandwidth must be positive")
        if not 0.0 <= self.loss_p < 1.0:
            raise DomainError(f"loss_p out of [0,1): {self.loss_p}")

    def bw(self, direction: Direction) -> int:
        return self.up_bps if direction == Direction.UP else self.down_bps


# Table-driven per-channel defaults: bandwidths and loss rates follow the
# simulation parameter table; propagation delays are explicit config with
# these documented defaults (see README).
CHANNEL_DEFAULTS: Dict[ChannelKind, LinkSpec] = {
    ChannelKind.PRIMARY: LinkSpec(50_000_000, 10_000_000, 2_000, 0.015, ChannelKind.PRIMARY),
    ChannelKind.FALLBACK: LinkSpec(5_000_000, 1_000_000, 500, 0.06, ChannelKind.FALLBACK),
    ChannelKind.CORE: LinkSpec(1_000_000_000, 200_000_000, 50, 0.01, ChannelKind.CORE),
}


def serialization_us(size_bytes: int, bw_bps: int) -> SimTime:
    """Microseconds to clock size_bytes onto a bw_bps link, rounded up."""
    return -(-(size_bytes * 8 * 1_000_000) // bw_bps)


@dataclass
class Packet:
    pkt_id: int
    src_ip: str
    dst_ip: str
    protocol: Protocol
    size: int
    created_at: SimTime
    channel_trace: List[ChannelKind] = field(default_factory=list)
    is_reply: bool = False

    def __post_init__(self):
        if self.size <= 0:
            raise DomainError("packet size must be positive")

    @property
    def is_payload(self) -> bool:
        return self.protocol != Protocol.ARP

    def clone(self) -> "Packet":
        return replace(self, channel_trace=list(self.channel_trace))


@dataclass
class Link:
    """A directional dual-rate link plus its mutable runtime state."""

    name: str
    spec: LinkSpec
    a: str  # edge endpoint: host name, S1/S2, IDS or CTRL
    b: str  # aggregation endpoint: switch id or S3
    a_port: Optional[int] = None  # port number on endpoint a, if a switch
    b_port: Optional[int] = None  # port number on endpoint b, if a switch
    state: LinkState = LinkState.UP
    stream: Optional[RngStream] = None
    busy_until: Dict[Direction, SimTime] = field(
        default_factory=lambda: {Direction.UP: 0, Direction.DOWN: 0}
    )

    def endpoint(self, direction: Direction) -> str:
        """Receiving endpoint for a transmission in `direction`."""
        return self.b if direction == Direction.UP else self.a


@dataclass(frozen=True)
class TransmitResult:
    status: str  # "delivered" | "lost" | "link_down"
    arrival: Optional[SimTime] = None
    start: Optional[SimTime] = None  # serialization start (after queueing)

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"


def transmit(packet: Packet, link: Link, direction: Direction, t: SimTime) -> TransmitResult:
    """Send one packet over a link; loss is an outcome, not an error.

    Serialization occupies the link per direction (infinite-buffer FIFO):
    the next packet starts only after the previous one finishes clocking
    out. A lost packet still occupies the medium.
    """
    if link.state == LinkState.DOWN:
        return TransmitResult("link_down")
    start = max(t, link.busy_until[direction])
    ser = serialization_us(packet.size, link.spec.bw(direction))
    link.busy_until[direction] = start + ser
    if link.stream is not None and draw_bernoulli(link.stream, link.spec.loss_p):
        return TransmitResult("lost", start=start)
    packet.channel_trace.append(link.spec.channel)
    return TransmitResult("delivered", arrival=start + ser + link.spec.prop_delay_us, start=start)


class DuplicateRule(Exception):
    """A conflicting rule exists at the same (match, priority)."""


@dataclass
class FlowRule:
    src_ip: str
    dst_ip: str
    out_port: int
    channel: ChannelKind
    priority: int = 10
    installed_at: SimTime = 0
    idle_timeout_us: Optional[SimTime] = None
    last_match: SimTime = 0

    @property
    def match(self) -> Tuple[str, str]:
        return (self.src_ip, self.dst_ip)

    def same_entry(self, other: "FlowRule") -> bool:
        return (
            self.match == other.match
            and self.priority == other.priority
            and self.out_port == other.out_port
            and self.channel == other.channel
        )


@dataclass
class ForwardAction:
    out_port: int


@dataclass
class FloodAction:
    ports: Tuple[int, ...]


@dataclass
class PacketInAction:
    in_port: int


@dataclass
class SwitchState:
    switch_id: str
    ports: Dict[int, str] = field(default_factory=dict)  # port -> link name
    flow_table: Dict[Tuple[str, str, int], FlowRule] = field(default_factory=dict)
    mac_ip_table: Dict[str, int] = field(default_factory=dict)  # learned ip -> port

    def lookup(self, src_ip: str, dst_ip: str) -> Optional[FlowRule]:
        best = None
        for rule in self.flow_table.values():
            if rule.match == (src_ip, dst_ip):
                if best is None or rule.priority > best.priority:
                    best = rule
        return best

    def install(self, rule: FlowRule) -> bool:
        """Insert a rule. Returns False for an identical re-install.

        Raises DuplicateRule when a different action already occupies the
        same (match, priority) slot.
        """
        key = (rule.src_ip, rule.dst_ip, rule.priority)
        existing = self.flow_table.get(key)
        if existing is not None:
            if existing.same_entry(rule):
                return False
            raise DuplicateRule(f"{self.switch_id}: conflicting rule at {key}")
        if rule.out_port not in self.ports:
            raise DomainError(f"{self.switch_id}: no port {rule.out_port}")
        self.flow_table[key] = rule
        return True

    def remove_rules(self, ips: frozenset, channel: Optional[ChannelKind]) -> List[FlowRule]:
        """Remove rules of `channel` whose match touches any ip in `ips`."""
        removed = []
        for key in list(self.flow_table):
            rule = self.flow_table[key]
            if channel is not None and rule.channel != channel:
                continue
            if rule.src_ip in ips or rule.dst_ip in ips:
                removed.append(self.flow_table.pop(key))
        return removed


def switch_forward(sw: SwitchState, packet: Packet, in_port: int):
    """Data-plane decision for one packet: Forward, Flood, or PacketIn.

    The switch learns (src_ip -> in_port) from every packet it sees.
    """
    if in_port not in sw.ports:
        raise DomainError(f"{sw.switch_id}: no port {in_port}")
    sw.mac_ip_table[packet.src_ip] = in_port
    rule = sw.lookup(packet.src_ip, packet.dst_ip)
    if rule is not None:
        return ForwardAction(out_port=rule.out_port)
    if packet.protocol == Protocol.ARP:
        ports = tuple(sorted(p for p in sw.ports if p != in_port))
        return FloodAction(ports=ports)
    return PacketInAction(in_port=in_port)
