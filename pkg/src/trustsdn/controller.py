"""Trust-gated SDN control plane.

Every packet-in is mirrored to the IDS, then gated: traffic is permitted
on the primary channel only while both endpoints hold trust scores at or
above the threshold. On a trust collapse or a primary link failure the
controller withdraws primary rules, drops the in-flight packet, and
redirects subsequent traffic onto the fallback channel. Re-admission
after recovery is lazy: rules return only via a later packet-in.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from .engine import SimTime
from .netmodel import ChannelKind, FlowRule, LinkState, Protocol

DEFAULT_THRESHOLD = 50.0
INITIAL_SCORE = 100.0


def _clamp(score: float) -> float:
    return min(100.0, max(0.0, score))


@dataclass
class TrustTable:
    """Per-ip trust scores in [0, 100]; the single authorization truth."""

    threshold: float = DEFAULT_THRESHOLD
    initial: float = INITIAL_SCORE
    scores: Dict[str, float] = field(default_factory=dict)

    def get(self, ip: str) -> float:
        if ip not in self.scores:
            self.scores[ip] = self.initial
        return self.scores[ip]

    def set(self, ip: str, score: float) -> Tuple[float, float]:
        old = self.get(ip)
        new = _clamp(score)
        self.scores[ip] = new
        return old, new

    def adjust(self, ip: str, delta: float) -> Tuple[float, float]:
        return self.set(ip, self.get(ip) + delta)

    def trusted(self, ip: str) -> bool:
        return self.get(ip) >= self.threshold


class Decision(str, Enum):
    PERMIT_PRIMARY = "PermitPrimary"
    QUARANTINE = "Quarantine"


def trust_gate(src_score: float, dst_score: float, threshold: float) -> Decision:
    """Primary channel is permitted iff both scores meet the threshold."""
    if src_score >= threshold and dst_score >= threshold:
        return Decision.PERMIT_PRIMARY
    return Decision.QUARANTINE


class QuarantineMode(str, Enum):
    REDIRECT = "redirect"   # drop the triggering packet, re-rule onto fallback
    DROP_ALL = "drop_all"   # drop; install nothing


class UnknownSwitch(Exception):
    pass


# --- control actions -------------------------------------------------------

@dataclass(frozen=True)
class InstallFlow:
    switch_id: str
    rule: FlowRule


@dataclass(frozen=True)
class DeleteFlows:
    ips: frozenset
    channel: ChannelKind
    switch_id: Optional[str] = None  # None = every switch


@dataclass(frozen=True)
class DropPacket:
    pkt_id: int


@dataclass(frozen=True)
class ForwardPacket:
    pkt_id: int
    switch_id: str
    out_port: int


@dataclass(frozen=True)
class MirrorToIds:
    pkt_id: int


@dataclass(frozen=True)
class FloodPacket:
    pkt_id: int
    switch_id: str
    in_port: int


Action = object


@dataclass(frozen=True)
class PacketInMeta:
    pkt_id: int
    src_ip: str
    dst_ip: str
    protocol: Protocol
    in_port: int
    switch_id: str


@dataclass(frozen=True)
class HostAttachment:
    """Static dual-transceiver wiring of one host, known to the controller."""

    host: str
    ip: str
    primary_port: int    # port on S1
    fallback_port: int   # port on S2
    primary_link: str
    fallback_link: str


class Controller:
    """Deterministic control state machine; outputs are action lists."""

    def __init__(
        self,
        trust: TrustTable,
        attachments: Dict[str, HostAttachment],  # keyed by ip
        control_latency_us: SimTime = 500,
        quarantine_mode: QuarantineMode = QuarantineMode.REDIRECT,
        switch_ids: Tuple[str, ...] = ("S1", "S2", "S3"),
    ):
        self.trust = trust
        self.attachments = attachments
        self.control_latency_us = control_latency_us
        self.quarantine_mode = quarantine_mode
        self.switch_ids = switch_ids
        # learned locations: ip -> (switch, port); discovery gate for installs
        self.host_locations: Dict[str, Tuple[str, int]] = {}
        self.pending_flows: Set[Tuple[str, str, ChannelKind]] = set()
        self.link_status: Dict[str, LinkState] = {}
        self.decision_log: List[Dict] = []

    # -- rule construction ---------------------------------------------------

    def _pair(self, src_ip: str, dst_ip: str, channel: ChannelKind,
              t: SimTime) -> List[InstallFlow]:
        """Bidirectional rule pair on the channel's aggregation switch."""
        src = self.attachments[src_ip]
        dst = self.attachments[dst_ip]
        if channel == ChannelKind.PRIMARY:
            sw, src_port, dst_port = "S1", src.primary_port, dst.primary_port
        else:
            sw, src_port, dst_port = "S2", src.fallback_port, dst.fallback_port
        fwd = FlowRule(src_ip=src_ip, dst_ip=dst_ip, out_port=dst_port,
                       channel=channel, installed_at=t)
        rev = FlowRule(src_ip=dst_ip, dst_ip=src_ip, out_port=src_port,
                       channel=channel, installed_at=t)
        self.pending_flows.add((src_ip, dst_ip, channel))
        self.pending_flows.add((dst_ip, src_ip, channel))
        return [InstallFlow(sw, fwd), InstallFlow(sw, rev)]

    def _withdraw(self, ips: frozenset, channel: ChannelKind) -> DeleteFlows:
        self.pending_flows = {
            f for f in self.pending_flows
            if f[2] != channel or (f[0] not in ips and f[1] not in ips)
        }
        return DeleteFlows(ips=ips, channel=channel)

    def _active_peers(self, ip: str, channel: ChannelKind) -> List[str]:
        """Distinct peers of `ip` among pending flows on `channel`, ordered."""
        peers = []
        for (s, d, ch) in sorted(self.pending_flows):
            if ch != channel:
                continue
            peer = d if s == ip else (s if d == ip else None)
            if peer is not None and peer not in peers:
                peers.append(peer)
        return peers

    def _primary_path_up(self, ip: str) -> bool:
        att = self.attachments.get(ip)
        if att is None:
            return True
        return self.link_status.get(att.primary_link, LinkState.UP) == LinkState.UP

    def _log(self, t: SimTime, event: str, src_ip: str, dst_ip: str,
             decision: str, actions: List[Action]) -> None:
        self.decision_log.append({
            "time_us": t,
            "event": event,
            "src_ip": src_ip,
            "dst_ip": dst_ip,
            "src_trust": self.trust.get(src_ip) if src_ip else "",
            "dst_trust": self.trust.get(dst_ip) if dst_ip else "",
            "decision": decision,
            "actions": "|".join(type(a).__name__ for a in actions),
        })

    # -- event entry points ---------------------------------------------------

    def on_packet_in(self, meta: PacketInMeta, t: SimTime) -> List[Action]:
        if meta.switch_id not in self.switch_ids:
            raise UnknownSwitch(meta.switch_id)
        self.host_locations[meta.src_ip] = (meta.switch_id, meta.in_port)
        actions: List[Action] = [MirrorToIds(meta.pkt_id)]
        src_score = self.trust.get(meta.src_ip)
        dst_score = self.trust.get(meta.dst_ip)
        decision = trust_gate(src_score, dst_score, self.trust.threshold)
        dst_known = meta.dst_ip in self.host_locations

        if decision == Decision.PERMIT_PRIMARY:
            if not dst_known:
                actions.append(FloodPacket(meta.pkt_id, meta.switch_id, meta.in_port))
                self._log(t, "packet_in", meta.src_ip, meta.dst_ip, "Flood", actions)
                return actions
            if self._primary_path_up(meta.src_ip) and self._primary_path_up(meta.dst_ip):
                installs = self._pair(meta.src_ip, meta.dst_ip, ChannelKind.PRIMARY, t)
                actions.extend(installs)
                if meta.switch_id == "S1":
                    actions.append(ForwardPacket(meta.pkt_id, "S1", installs[0].rule.out_port))
                self._log(t, "packet_in", meta.src_ip, meta.dst_ip,
                          Decision.PERMIT_PRIMARY.value, actions)
            else:
                # trusted endpoints but a dead primary link: rule the flow
                # straight onto fallback
                installs = self._pair(meta.src_ip, meta.dst_ip, ChannelKind.FALLBACK, t)
                actions.extend(installs)
                if meta.switch_id == "S2":
                    actions.append(ForwardPacket(meta.pkt_id, "S2", installs[0].rule.out_port))
                else:
                    actions.append(DropPacket(meta.pkt_id))
                self._log(t, "packet_in", meta.src_ip, meta.dst_ip, "PermitFallback", actions)
            return actions

        # Quarantine: withdraw primary, drop the in-flight packet, then
        # redirect subsequent traffic via fallback.
        ips = frozenset({meta.src_ip, meta.dst_ip})
        actions.append(self._withdraw(ips, ChannelKind.PRIMARY))
        actions.append(DropPacket(meta.pkt_id))
        if self.quarantine_mode == QuarantineMode.REDIRECT and dst_known:
            actions.extend(self._pair(meta.src_ip, meta.dst_ip, ChannelKind.FALLBACK, t))
        self._log(t, "packet_in", meta.src_ip, meta.dst_ip,
                  Decision.QUARANTINE.value, actions)
        return actions

    def on_trust_change(self, ip: str, old_score: float, new_score: float,
                        t: SimTime) -> List[Action]:
        th = self.trust.threshold
        if old_score >= th and new_score < th:
            peers = self._active_peers(ip, ChannelKind.PRIMARY)
            actions: List[Action] = [self._withdraw(frozenset({ip}), ChannelKind.PRIMARY)]
            if self.quarantine_mode == QuarantineMode.REDIRECT:
                for peer in peers:
                    actions.extend(self._pair(ip, peer, ChannelKind.FALLBACK, t))
            self._log(t, "trust_change", ip, "", Decision.QUARANTINE.value, actions)
            return actions
        # upward crossings never restore rules; the next packet-in re-gates
        return []

    def on_link_down(self, link_name: str, host_ip: str, t: SimTime) -> List[Action]:
        if self.link_status.get(link_name) == LinkState.DOWN:
            return []
        self.link_status[link_name] = LinkState.DOWN
        peers = self._active_peers(host_ip, ChannelKind.PRIMARY)
        if not peers:
            self._log(t, "link_down", host_ip, "", "NoActiveFlows", [])
            return []
        actions: List[Action] = [self._withdraw(frozenset({host_ip}), ChannelKind.PRIMARY)]
        for peer in peers:
            actions.extend(self._pair(host_ip, peer, ChannelKind.FALLBACK, t))
        self._log(t, "link_down", host_ip, "", "Failover", actions)
        return actions

    def on_link_up(self, link_name: str, host_ip: str, t: SimTime) -> List[Action]:
        self.link_status[link_name] = LinkState.UP
        self._log(t, "link_up", host_ip, "", "NoAutoRestore", [])
        return []

    def note_flow_removed(self, src_ip: str, dst_ip: str, channel: ChannelKind) -> None:
        self.pending_flows.discard((src_ip, dst_ip, channel))


DECISION_LOG_HEADER = "time_us,event,src_ip,dst_ip,src_trust,dst_trust,decision,actions"


def decision_log_csv(controller: Controller) -> str:
    lines = [DECISION_LOG_HEADER]
    for row in controller.decision_log:
        lines.append(
            f"{row['time_us']},{row['event']},{row['src_ip']},{row['dst_ip']},"
            f"{row['src_trust']},{row['dst_trust']},{row['decision']},{row['actions']}"
        )
    return "\n".join(lines) + "\n"
