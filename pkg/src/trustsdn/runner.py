"""Scenario execution: builds the network, wires controller and IDS into
the event loop, generates traffic, injects faults, and produces the trace
and KPI report.

Modeling choices that matter for interpreting results:
  - Hosts pick their egress interface from the flow's current rule
    channel (primary by default); a flow moves to fallback exactly when
    its fallback rule pair finishes installing. Packets with no usable
    egress (own link down, rules not yet ready) are queued at the host
    and flushed when the path comes up, so failover latency decomposes
    exactly into detection + decision + flow-mod transit + first-packet
    transit.
  - Control-plane messages (packet-in, flow-mod, packet-out) cross the
    core links at serialization + propagation cost but are loss-exempt
    and do not occupy the medium.
  - Floods stay on host-side ports of the flooding switch; every host is
    dual-homed onto both aggregation switches, so a contained flood still
    reaches every candidate receiver without leaking onto the other
    channel.
  - The IDS taps host-facing ingress ports of S1/S2 (equivalent to port
    mirroring into S3) and additionally sees every escalated packet via
    the controller's mirror action.
"""

from dataclasses import dataclass, field, replace as dc_replace
from typing import Dict, List, Optional, Tuple

from .engine import Engine, Event, EventKind, SimTime, Trace
from .controller import (
    Controller,
    DeleteFlows,
    DropPacket,
    FloodPacket,
    ForwardPacket,
    HostAttachment,
    InstallFlow,
    MirrorToIds,
    PacketInMeta,
    TrustTable,
    decision_log_csv,
)
from .ids import Ids, IdsMode
from .metrics import KpiReport, compute_report, emit_csv
from .netmodel import (
    ChannelKind,
    Direction,
    FloodAction,
    ForwardAction,
    Link,
    LinkState,
    Packet,
    PacketInAction,
    Protocol,
    serialization_us,
    switch_forward,
    transmit,
)
from .scenario import Directive, ScenarioConfig, TrafficFlow, ValidationError, validate_scenario
from .topology import CONTROLLER_NODE, Network, S1, S2, S3, build

ARP_RETRY_US = 100_000
ARP_SIZE_BYTES = 64


# --- event payloads ----------------------------------------------------------

@dataclass
class EmitPacket:
    flow_index: int
    n: int  # how many already emitted


@dataclass
class LinkDelivery:
    packet: Packet
    link_name: str
    direction: Direction


@dataclass
class ArpRetry:
    host: str
    dst_ip: str


@dataclass
class PacketInMsg:
    packet: Packet
    switch_id: str
    in_port: int


@dataclass
class ApplyInstall:
    switch_id: str
    rule: object
    requested_us: SimTime
    trigger: Tuple[str, str, SimTime]


@dataclass
class ApplyDelete:
    switch_id: str
    ips: frozenset
    channel: ChannelKind
    trigger: Tuple[str, str, SimTime]


@dataclass
class ApplyDrop:
    pkt_id: int


@dataclass
class ApplyPacketOut:
    pkt_id: int
    switch_id: str
    op: str  # "forward" | "flood"
    out_port: Optional[int] = None
    in_port: Optional[int] = None


@dataclass
class LinkChange:
    link_name: str
    state: LinkState
    phase: str  # "apply" | "notify"
    applied_at: SimTime = 0


@dataclass
class TrustSet:
    ip: str
    score: float


@dataclass
class ExpiryCheck:
    switch_id: str
    src_ip: str
    dst_ip: str
    priority: int


@dataclass
class RunResult:
    config: ScenarioConfig
    trace: Trace
    report: KpiReport
    decision_log: str
    trace_sha256: str
    kpi_csv: str


class Simulation:
    def __init__(self, config: ScenarioConfig):
        problems = validate_scenario(config)
        if problems:
            raise ValidationError(problems)
        self.config = config
        self.net: Network = build(config.topology_spec())
        self.engine = Engine()
        self.trace = Trace()

        self.trust = TrustTable(threshold=config.control.threshold,
                                initial=config.control.initial_trust)
        self.ids = Ids(
            window_us=config.ids.window_us,
            rate_limit=config.ids.rate_limit,
            allowed_protocols=(frozenset(config.ids.allowed_protocols)
                               if config.ids.allowed_protocols is not None
                               else frozenset(Protocol)),
            acl=(frozenset(config.ids.acl) if config.ids.acl is not None else None),
            penalties=dict(config.ids.penalties),
            recovery_points=config.ids.recovery_points,
        )
        self.ids.on_crossing = self._on_trust_crossing

        attachments = {}
        for name, addr in self.net.hosts.items():
            attachments[addr.ip] = HostAttachment(
                host=name,
                ip=addr.ip,
                primary_port=self.net.host_port(S1, name),
                fallback_port=self.net.host_port(S2, name),
                primary_link=self.net.host_links[name][ChannelKind.PRIMARY],
                fallback_link=self.net.host_links[name][ChannelKind.FALLBACK],
            )
        self.controller = Controller(
            trust=self.trust,
            attachments=attachments,
            control_latency_us=config.control.latency_us,
            quarantine_mode=config.control.quarantine_mode,
        )

        # host state
        self.arp_resolved: Dict[str, set] = {h: set() for h in self.net.hosts}
        self.arp_pending: Dict[str, Dict[str, List[Packet]]] = {h: {} for h in self.net.hosts}
        self.arp_outstanding: Dict[str, set] = {h: set() for h in self.net.hosts}
        self.flow_channel: Dict[Tuple[str, str], ChannelKind] = {}
        self.blocked: Dict[Tuple[str, str], List[Packet]] = {}
        self.buffered: Dict[int, Tuple[Packet, str, int]] = {}
        self.pending_crossings: List[Tuple[str, float, float, SimTime]] = []
        self._pkt_counter = 0
        self._host_ports: Dict[str, set] = {}  # switch -> host-facing port numbers
        for sw_id, sw in self.net.switches.items():
            self._host_ports[sw_id] = {
                p for p, ln in sw.ports.items() if self.net.links[ln].a in self.net.hosts
            }
        self._to_ctrl = {sw: self._control_path(sw, to_controller=True)
                         for sw in (S1, S2, S3)}
        self._from_ctrl = {sw: self._control_path(sw, to_controller=False)
                           for sw in (S1, S2, S3)}

        e = self.engine
        e.register(EventKind.PACKET_ARRIVAL, self._on_packet_arrival)
        e.register(EventKind.PACKET_IN, self._on_packet_in)
        e.register(EventKind.CONTROL_ACTION, self._on_control_action)
        e.register(EventKind.LINK_STATE_CHANGE, self._on_link_state_change)
        e.register(EventKind.TRUST_OVERRIDE, self._on_trust_override)
        e.register(EventKind.RECOVERY_TICK, self._on_recovery_tick)
        e.register(EventKind.FLOW_EXPIRY, self._on_flow_expiry)
        e.register(EventKind.SCENARIO_DIRECTIVE, self._on_directive)

        self._schedule_initial_events()

    # --- setup ----------------------------------------------------------------

    def _control_path(self, switch_id: str, to_controller: bool) -> SimTime:
        """Fixed control-message latency between a switch and the controller."""
        msg = self.config.control.flowmod_bytes
        ctrl_link = self.net.links[f"{CONTROLLER_NODE}-{S3}"]
        total = 0
        if switch_id != S3:
            uplink = self.net.links[f"{switch_id}-{S3}"]
            direction = Direction.UP if to_controller else Direction.DOWN
            total += serialization_us(msg, uplink.spec.bw(direction)) + uplink.spec.prop_delay_us
        direction = Direction.DOWN if to_controller else Direction.UP
        total += serialization_us(msg, ctrl_link.spec.bw(direction)) + ctrl_link.spec.prop_delay_us
        return total

    def _schedule_initial_events(self) -> None:
        cfg = self.config
        # recovery ticks first so same-instant overrides land after the tick
        interval = cfg.ids.recovery_interval_us
        t = interval
        while t <= cfg.duration_us:
            self.engine.schedule_at(t, EventKind.RECOVERY_TICK)
            t += interval
        for d in cfg.directives:
            if d.kind in ("fail_link", "restore_link"):
                state = LinkState.DOWN if d.kind == "fail_link" else LinkState.UP
                link_name = self.net.host_links[d.host][d.channel]
                self.engine.schedule_at(
                    d.at_us, EventKind.LINK_STATE_CHANGE,
                    LinkChange(link_name, state, "apply"))
            elif d.kind == "set_trust":
                self.engine.schedule_at(d.at_us, EventKind.TRUST_OVERRIDE,
                                        TrustSet(cfg.resolve_ip(d.ip), d.score))
            else:
                self.engine.schedule_at(d.at_us, EventKind.SCENARIO_DIRECTIVE, d)
        for idx, flow in enumerate(cfg.traffic):
            self.engine.schedule_at(flow.start_us, EventKind.PACKET_ARRIVAL,
                                    EmitPacket(idx, 0))

    # --- helpers --------------------------------------------------------------

    def _next_pkt_id(self) -> int:
        self._pkt_counter += 1
        return self._pkt_counter

    def _host_link(self, host: str, channel: ChannelKind) -> Link:
        return self.net.links[self.net.host_links[host][channel]]

    def _send_on_link(self, pkt: Packet, link: Link, direction: Direction,
                      t: SimTime) -> None:
        res = transmit(pkt, link, direction, t)
        fields = dict(link=link.name, dir=direction.value,
                      channel=link.spec.channel.value, pkt=pkt.pkt_id,
                      proto=pkt.protocol.value, payload=int(pkt.is_payload),
                      outcome=res.status)
        if res.delivered:
            fields["arrival"] = res.arrival
        self.trace.add(t, "link_tx", **fields)
        if res.delivered:
            self.engine.schedule_at(res.arrival, EventKind.PACKET_ARRIVAL,
                                    LinkDelivery(pkt, link.name, direction))

    def _host_send(self, host: str, pkt: Packet, t: SimTime) -> None:
        """Entry point for host-originated packets (ARP resolution first)."""
        if (self.config.arp_enabled and pkt.protocol != Protocol.ARP
                and pkt.dst_ip not in self.arp_resolved[host]):
            self.arp_pending[host].setdefault(pkt.dst_ip, []).append(pkt)
            if pkt.dst_ip not in self.arp_outstanding[host]:
                self.arp_outstanding[host].add(pkt.dst_ip)
                self._send_arp_request(host, pkt.dst_ip, t)
            return
        self._send_from_host(host, pkt, t)

    def _send_arp_request(self, host: str, dst_ip: str, t: SimTime) -> None:
        req = Packet(pkt_id=self._next_pkt_id(), src_ip=self.net.ip_of(host),
                     dst_ip=dst_ip, protocol=Protocol.ARP,
                     size=ARP_SIZE_BYTES, created_at=t)
        self._send_from_host(host, req, t)
        retry_at = t + ARP_RETRY_US
        if retry_at <= self.config.duration_us:
            self.engine.schedule_at(retry_at, EventKind.PACKET_ARRIVAL,
                                    ArpRetry(host, dst_ip))

    def _send_from_host(self, host: str, pkt: Packet, t: SimTime) -> None:
        key = (pkt.src_ip, pkt.dst_ip)
        channel = self.flow_channel.get(key)
        if channel is None:
            primary = self._host_link(host, ChannelKind.PRIMARY)
            channel = (ChannelKind.PRIMARY if primary.state == LinkState.UP
                       else ChannelKind.FALLBACK)
        link = self._host_link(host, channel)
        if link.state == LinkState.DOWN:
            self.blocked.setdefault(key, []).append(pkt)
            self.trace.add(t, "queue", pkt=pkt.pkt_id, host=host, reason="link_down")
            return
        self._send_on_link(pkt, link, Direction.UP, t)

    def _flush_flow(self, key: Tuple[str, str], t: SimTime) -> None:
        packets = self.blocked.pop(key, [])
        src_host = self.net.host_of_ip(key[0])
        for pkt in packets:
            self.trace.add(t, "flush", pkt=pkt.pkt_id, host=src_host)
            self._send_from_host(src_host, pkt, t)

    def _ids_observe(self, pkt: Packet, t: SimTime) -> None:
        findings = self.ids.observe(pkt.src_ip, pkt.dst_ip, pkt.protocol,
                                    pkt.size, t)
        for f in findings:
            self.trace.add(t, "finding", ip=f.ip, kind=f.kind.value,
                           penalty=f.penalty)
        if findings:
            self.ids.apply_findings(self.trust, findings)

    def _on_trust_crossing(self, ip: str, old: float, new: float,
                           direction: str, cause_t: SimTime) -> None:
        t = self.engine.now()
        self.trace.add(t, "trust", ip=ip, old=old, new=new,
                       cause_us=cause_t, crossed=direction)
        if direction != "down":
            return
        if self.config.ids.mode == IdsMode.INLINE:
            actions = self.controller.on_trust_change(ip, old, new, t)
            self._materialize(actions, t, ("trust", ip, cause_t))
        else:
            self.pending_crossings.append((ip, old, new, cause_t))

    # --- action materialization ------------------------------------------------

    def _materialize(self, actions: List[object], t: SimTime,
                     trigger: Tuple[str, str, SimTime]) -> None:
        if not actions:
            return
        t_eff = t + self.config.control.latency_us
        trig_kind, trig_ip, trig_t = trigger
        consumed = False
        for action in actions:
            self.trace.add(t, "action", act=type(action).__name__,
                           effective_us=t_eff, trigger_kind=trig_kind,
                           trigger_ip=trig_ip, trigger_t=trig_t)
            if isinstance(action, MirrorToIds):
                continue  # observation already happened at decision time
            if isinstance(action, DeleteFlows):
                targets = [action.switch_id] if action.switch_id else [S1, S2, S3]
                for sw_id in targets:
                    self.engine.schedule_at(
                        t_eff + self._from_ctrl[sw_id], EventKind.CONTROL_ACTION,
                        ApplyDelete(sw_id, action.ips, action.channel, trigger))
            elif isinstance(action, InstallFlow):
                self.engine.schedule_at(
                    t_eff + self._from_ctrl[action.switch_id],
                    EventKind.CONTROL_ACTION,
                    ApplyInstall(action.switch_id, action.rule, t, trigger))
            elif isinstance(action, DropPacket):
                entry = self.buffered.get(action.pkt_id)
                sw_id = entry[1] if entry else S1
                self.engine.schedule_at(
                    t_eff + self._from_ctrl[sw_id], EventKind.CONTROL_ACTION,
                    ApplyDrop(action.pkt_id))
                consumed = True
            elif isinstance(action, ForwardPacket):
                self.engine.schedule_at(
                    t_eff + self._from_ctrl[action.switch_id],
                    EventKind.CONTROL_ACTION,
                    ApplyPacketOut(action.pkt_id, action.switch_id, "forward",
                                   out_port=action.out_port))
                consumed = True
            elif isinstance(action, FloodPacket):
                self.engine.schedule_at(
                    t_eff + self._from_ctrl[action.switch_id],
                    EventKind.CONTROL_ACTION,
                    ApplyPacketOut(action.pkt_id, action.switch_id, "flood",
                                   in_port=action.in_port))
                consumed = True
        if trig_kind == "packet_in" and not consumed:
            # decision produced no directive for the buffered packet
            pkt_id = next((a.pkt_id for a in actions if isinstance(a, MirrorToIds)), None)
            if pkt_id is not None and pkt_id in self.buffered:
                self.buffered.pop(pkt_id)
                self.trace.add(t, "drop", pkt=pkt_id, reason="no_directive")

    # --- event handlers ---------------------------------------------------------

    def _on_packet_arrival(self, event: Event) -> None:
        payload = event.payload
        t = event.at
        if isinstance(payload, EmitPacket):
            self._handle_emit(payload, t)
        elif isinstance(payload, LinkDelivery):
            self._handle_delivery(payload, t)
        elif isinstance(payload, ArpRetry):
            self._handle_arp_retry(payload, t)

    def _handle_emit(self, emit: EmitPacket, t: SimTime) -> None:
        flow = self.config.traffic[emit.flow_index]
        src_ip = self.config.resolve_ip(flow.src)
        dst_ip = self.config.resolve_ip(flow.dst)
        host = self.net.host_of_ip(src_ip)
        pkt = Packet(pkt_id=self._next_pkt_id(), src_ip=src_ip, dst_ip=dst_ip,
                     protocol=flow.protocol, size=flow.size_bytes, created_at=t)
        self.trace.add(t, "emit", pkt=pkt.pkt_id, src=src_ip, dst=dst_ip,
                       proto=flow.protocol.value)
        self._host_send(host, pkt, t)
        n = emit.n + 1
        if flow.count is not None and n >= flow.count:
            return
        period = 1_000_000 // flow.rate_pps
        next_at = flow.start_us + n * period
        if next_at <= self.config.duration_us:
            self.engine.schedule_at(next_at, EventKind.PACKET_ARRIVAL,
                                    EmitPacket(emit.flow_index, n))

    def _handle_arp_retry(self, retry: ArpRetry, t: SimTime) -> None:
        if retry.dst_ip in self.arp_resolved[retry.host]:
            return
        if not self.arp_pending[retry.host].get(retry.dst_ip):
            self.arp_outstanding[retry.host].discard(retry.dst_ip)
            return
        self._send_arp_request(retry.host, retry.dst_ip, t)

    def _handle_delivery(self, delivery: LinkDelivery, t: SimTime) -> None:
        link = self.net.links[delivery.link_name]
        endpoint = link.endpoint(delivery.direction)
        if endpoint in self.net.switches:
            in_port = link.b_port if delivery.direction == Direction.UP else link.a_port
            self._switch_ingress(endpoint, delivery.packet, in_port, t)
        elif endpoint in self.net.hosts:
            self._host_receive(endpoint, delivery.packet, t)
        # deliveries to IDS/CTRL attachment points carry no data traffic

    def _switch_ingress(self, sw_id: str, pkt: Packet, in_port: int,
                        t: SimTime) -> None:
        sw = self.net.switches[sw_id]
        action = switch_forward(sw, pkt, in_port)
        if isinstance(action, PacketInAction):
            self.buffered[pkt.pkt_id] = (pkt, sw_id, in_port)
            self.trace.add(t, "packet_in", pkt=pkt.pkt_id, switch=sw_id,
                           src=pkt.src_ip, dst=pkt.dst_ip)
            self.engine.schedule_at(t + self._to_ctrl[sw_id], EventKind.PACKET_IN,
                                    PacketInMsg(pkt, sw_id, in_port))
            return
        if in_port in self._host_ports[sw_id]:
            self._ids_observe(pkt, t)  # tap on host-facing ingress
        if isinstance(action, ForwardAction):
            rule = sw.lookup(pkt.src_ip, pkt.dst_ip)
            if rule is not None:
                rule.last_match = t
            self._switch_egress(sw_id, pkt, action.out_port, t)
        elif isinstance(action, FloodAction):
            self._flood(sw_id, pkt, in_port, t)

    def _switch_egress(self, sw_id: str, pkt: Packet, out_port: int,
                       t: SimTime) -> None:
        link = self.net.links[self.net.switches[sw_id].ports[out_port]]
        direction = Direction.UP if link.a == sw_id else Direction.DOWN
        self._send_on_link(pkt, link, direction, t)

    def _flood(self, sw_id: str, pkt: Packet, in_port: int, t: SimTime) -> None:
        # contained flood: host-side ports only (see module docstring)
        for port in sorted(self._host_ports[sw_id]):
            if port == in_port:
                continue
            self._switch_egress(sw_id, pkt.clone(), port, t)

    def _host_receive(self, host: str, pkt: Packet, t: SimTime) -> None:
        my_ip = self.net.ip_of(host)
        if pkt.protocol == Protocol.ARP:
            if pkt.dst_ip != my_ip:
                return
            # any ARP teaches the receiver the sender's address
            self.arp_resolved[host].add(pkt.src_ip)
            if not pkt.is_reply:
                reply = Packet(pkt_id=self._next_pkt_id(), src_ip=my_ip,
                               dst_ip=pkt.src_ip, protocol=Protocol.ARP,
                               size=ARP_SIZE_BYTES, created_at=t, is_reply=True)
                self._send_from_host(host, reply, t)
            else:
                self.arp_outstanding[host].discard(pkt.src_ip)
                for queued in self.arp_pending[host].pop(pkt.src_ip, []):
                    self._send_from_host(host, queued, t)
            return
        if pkt.dst_ip != my_ip:
            return  # flooded copy for someone else
        self.trace.add(t, "deliver", host=host, pkt=pkt.pkt_id, src=pkt.src_ip,
                       dst=pkt.dst_ip, proto=pkt.protocol.value,
                       channels="+".join(c.value for c in pkt.channel_trace),
                       latency_us=t - pkt.created_at)
        if pkt.protocol == Protocol.ICMP and not pkt.is_reply:
            reply = Packet(pkt_id=self._next_pkt_id(), src_ip=my_ip,
                           dst_ip=pkt.src_ip, protocol=Protocol.ICMP,
                           size=pkt.size, created_at=t, is_reply=True)
            self._host_send(host, reply, t)

    def _on_packet_in(self, event: Event) -> None:
        msg: PacketInMsg = event.payload
        t = event.at
        pkt = msg.packet
        self._ids_observe(pkt, t)  # controller mirror; inline crossings fire here
        # the escalating switch shares what it learned from ARP floods, so a
        # trusted flow needs exactly one packet-in before its rules exist
        learned = self.net.switches[msg.switch_id].mac_ip_table.get(pkt.dst_ip)
        if learned is not None:
            self.controller.host_locations.setdefault(
                pkt.dst_ip, (msg.switch_id, learned))
        meta = PacketInMeta(pkt_id=pkt.pkt_id, src_ip=pkt.src_ip,
                            dst_ip=pkt.dst_ip, protocol=pkt.protocol,
                            in_port=msg.in_port, switch_id=msg.switch_id)
        actions = self.controller.on_packet_in(meta, t)
        row = self.controller.decision_log[-1]
        self.trace.add(t, "decision", src=pkt.src_ip, dst=pkt.dst_ip,
                       decision=row["decision"])
        self._materialize(actions, t, ("packet_in", pkt.src_ip, t))

    def _on_control_action(self, event: Event) -> None:
        payload = event.payload
        t = event.at
        if isinstance(payload, ApplyInstall):
            self._apply_install(payload, t)
        elif isinstance(payload, ApplyDelete):
            self._apply_delete(payload, t)
        elif isinstance(payload, ApplyDrop):
            entry = self.buffered.pop(payload.pkt_id, None)
            if entry is not None:
                self.trace.add(t, "drop", pkt=payload.pkt_id, reason="controller")
        elif isinstance(payload, ApplyPacketOut):
            self._apply_packet_out(payload, t)

    def _apply_install(self, apply: ApplyInstall, t: SimTime) -> None:
        sw = self.net.switches[apply.switch_id]
        rule = apply.rule
        rule.installed_at = t
        rule.last_match = t
        installed = sw.install(rule)
        trig_kind, trig_ip, trig_t = apply.trigger
        self.trace.add(t, "rule_install", switch=apply.switch_id,
                       src=rule.src_ip, dst=rule.dst_ip,
                       channel=rule.channel.value,
                       requested_us=apply.requested_us, done_us=t,
                       idempotent=int(not installed),
                       trigger_kind=trig_kind, trigger_ip=trig_ip,
                       trigger_t=trig_t)
        if installed and self.config.control.idle_timeout_us is not None:
            rule.idle_timeout_us = self.config.control.idle_timeout_us
            self.engine.schedule_at(
                t + rule.idle_timeout_us, EventKind.FLOW_EXPIRY,
                ExpiryCheck(apply.switch_id, rule.src_ip, rule.dst_ip,
                            rule.priority))
        # rule pair complete -> the flow now rides this channel
        reverse = sw.lookup(rule.dst_ip, rule.src_ip)
        if reverse is not None and reverse.channel == rule.channel:
            fwd_key = (rule.src_ip, rule.dst_ip)
            rev_key = (rule.dst_ip, rule.src_ip)
            self.flow_channel[fwd_key] = rule.channel
            self.flow_channel[rev_key] = rule.channel
            self._flush_flow(fwd_key, t)
            self._flush_flow(rev_key, t)

    def _retire_rules(self, switch_id: str, removed, t: SimTime, reason: str) -> None:
        for rule in removed:
            self.trace.add(t, "rule_remove", switch=switch_id, src=rule.src_ip,
                           dst=rule.dst_ip, channel=rule.channel.value,
                           reason=reason)
            self.controller.note_flow_removed(rule.src_ip, rule.dst_ip, rule.channel)
            key = (rule.src_ip, rule.dst_ip)
            if self.flow_channel.get(key) == rule.channel:
                del self.flow_channel[key]

    def _apply_delete(self, apply: ApplyDelete, t: SimTime) -> None:
        sw = self.net.switches[apply.switch_id]
        removed = sw.remove_rules(apply.ips, apply.channel)
        self._retire_rules(apply.switch_id, removed, t, reason="withdrawn")

    def _apply_packet_out(self, out: ApplyPacketOut, t: SimTime) -> None:
        entry = self.buffered.pop(out.pkt_id, None)
        if entry is None:
            return
        pkt, sw_id, _in_port = entry
        if out.op == "forward":
            self._switch_egress(out.switch_id, pkt, out.out_port, t)
        else:
            self._flood(out.switch_id, pkt, out.in_port, t)

    def _on_link_state_change(self, event: Event) -> None:
        change: LinkChange = event.payload
        t = event.at
        link = self.net.links[change.link_name]
        host_ip = self.net.hosts[link.a].ip if link.a in self.net.hosts else ""
        if change.phase == "apply":
            self.trace.add(t, "directive",
                           kind="fail_link" if change.state == LinkState.DOWN
                           else "restore_link", link=change.link_name)
            if link.state == change.state:
                return  # idempotent; no duplicate notification
            link.state = change.state
            self.trace.add(t, "link_state", link=change.link_name,
                           state=change.state.value,
                           channel=link.spec.channel.value, host_ip=host_ip)
            self.engine.schedule_at(
                t + self.config.control.detection_delay_us,
                EventKind.LINK_STATE_CHANGE,
                LinkChange(change.link_name, change.state, "notify", applied_at=t))
            if change.state == LinkState.UP and link.a in self.net.hosts:
                for key in [k for k in self.blocked if k[0] == host_ip]:
                    self._flush_flow(key, t)
            return
        # notify phase: the controller reacts after the detection delay
        if change.state == LinkState.DOWN:
            if link.spec.channel == ChannelKind.PRIMARY:
                actions = self.controller.on_link_down(change.link_name, host_ip, t)
                self._materialize(actions, t, ("link", host_ip, change.applied_at))
            else:
                self.controller.link_status[change.link_name] = LinkState.DOWN
                self.trace.add(t, "link_notify", link=change.link_name,
                               state="Down", handled="logged_only")
        else:
            self.controller.on_link_up(change.link_name, host_ip, t)

    def _on_trust_override(self, event: Event) -> None:
        ts: TrustSet = event.payload
        t = event.at
        self.trace.add(t, "directive", kind="set_trust", ip=ts.ip, score=ts.score)
        self.ids.set_trust(self.trust, ts.ip, ts.score, t)

    def _on_directive(self, event: Event) -> None:
        d: Directive = event.payload
        t = event.at
        fields = dict(kind=d.kind, value=d.value)
        if d.finding is not None:
            fields["finding"] = d.finding.value
        self.trace.add(t, "directive", **fields)
        if d.kind == "set_threshold":
            self.trust.threshold = d.value
        elif d.kind == "set_penalty":
            self.ids.penalties[d.finding] = d.value
        elif d.kind == "set_recovery":
            self.ids.recovery_points = d.value

    def _on_recovery_tick(self, event: Event) -> None:
        t = event.at
        self.trace.add(t, "tick")
        self.ids.tick_recovery(self.trust, t)
        crossings, self.pending_crossings = self.pending_crossings, []
        for (ip, old, new, cause_t) in crossings:
            if self.trust.get(ip) >= self.trust.threshold:
                continue  # recovered before the sync point; nothing to enforce
            actions = self.controller.on_trust_change(ip, old, new, t)
            self._materialize(actions, t, ("trust", ip, cause_t))

    def _on_flow_expiry(self, event: Event) -> None:
        check: ExpiryCheck = event.payload
        t = event.at
        sw = self.net.switches[check.switch_id]
        key = (check.src_ip, check.dst_ip, check.priority)
        rule = sw.flow_table.get(key)
        if rule is None or rule.idle_timeout_us is None:
            return
        if t - rule.last_match >= rule.idle_timeout_us:
            del sw.flow_table[key]
            self._retire_rules(check.switch_id, [rule], t, reason="expired")
        else:
            self.engine.schedule_at(rule.last_match + rule.idle_timeout_us,
                                    EventKind.FLOW_EXPIRY, check)

    # --- run -------------------------------------------------------------------

    def run(self) -> RunResult:
        self.engine.run_until(self.config.duration_us)
        report = compute_report(self.trace.records, self.config.n_hosts)
        return RunResult(
            config=self.config,
            trace=self.trace,
            report=report,
            decision_log=decision_log_csv(self.controller),
            trace_sha256=self.trace.sha256(),
            kpi_csv=emit_csv([report]),
        )


def run(config: ScenarioConfig) -> RunResult:
    return Simulation(config).run()


def sweep(config: ScenarioConfig, sizes: List[int]) -> Tuple[str, List[RunResult]]:
    """One run per network size (seed policy: scenario seed + index)."""
    if not sizes:
        raise ValidationError(["sweep sizes must be non-empty"])
    results = []
    for i, size in enumerate(sizes):
        derived = dc_replace(config, n_hosts=size, seed=config.seed + i,
                             name=f"{config.name}-{size}")
        results.append(run(derived))
    csv_text = emit_csv([r.report for r in results])
    return csv_text, results
