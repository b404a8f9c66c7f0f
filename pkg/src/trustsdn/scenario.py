"""Scenario files: ingestion, validation, serialization.

The on-disk format is YAML with explicit unit suffixes (`_us`, `_bps`,
`_pct`, `_pps`, `_bytes`). Omitted sections fall back to the built-in
defaults: per-channel link parameters, trust threshold 50, initial trust
100, async IDS mode. `serialize` and `load_scenario` round-trip exactly.
"""

from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

import yaml

from .engine import SimTime
from .controller import QuarantineMode
from .ids import DEFAULT_PENALTIES, FindingKind, IdsMode
from .netmodel import CHANNEL_DEFAULTS, ChannelKind, LinkSpec, Protocol
from .topology import TopologySpec, host_ip

SCENARIO_FORMAT_VERSION = 1


class ParseError(Exception):
    pass


class ValidationError(Exception):
    def __init__(self, problems: List[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


_PROTOCOLS = {"arp": Protocol.ARP, "icmp": Protocol.ICMP, "ipv4": Protocol.IPV4_DATA}
_PROTOCOL_NAMES = {v: k for k, v in _PROTOCOLS.items()}
_CHANNELS = {"primary": ChannelKind.PRIMARY, "fallback": ChannelKind.FALLBACK,
             "core": ChannelKind.CORE}
_CHANNEL_NAMES = {v: k for k, v in _CHANNELS.items()}
_FINDINGS = {
    "rate_anomaly": FindingKind.RATE_ANOMALY,
    "protocol_violation": FindingKind.PROTOCOL_VIOLATION,
    "unauthorized_access": FindingKind.UNAUTHORIZED_ACCESS,
}
_FINDING_NAMES = {v: k for k, v in _FINDINGS.items()}

DIRECTIVE_KINDS = ("fail_link", "restore_link", "set_trust", "set_threshold",
                   "set_penalty", "set_recovery")


@dataclass(frozen=True)
class TrafficFlow:
    src: str                 # host name ("H1") or ip
    dst: str
    start_us: SimTime
    rate_pps: int
    size_bytes: int
    protocol: Protocol = Protocol.ICMP
    count: Optional[int] = None  # None = emit until scenario end


@dataclass(frozen=True)
class Directive:
    at_us: SimTime
    kind: str
    host: Optional[str] = None            # fail_link / restore_link
    channel: Optional[ChannelKind] = None
    ip: Optional[str] = None              # set_trust
    score: Optional[float] = None
    finding: Optional[FindingKind] = None  # set_penalty
    value: Optional[float] = None          # set_threshold/set_penalty/set_recovery


@dataclass(frozen=True)
class ControlConfig:
    latency_us: SimTime = 500
    detection_delay_us: SimTime = 1000
    flowmod_bytes: int = 128
    quarantine_mode: QuarantineMode = QuarantineMode.REDIRECT
    threshold: float = 50.0
    initial_trust: float = 100.0
    idle_timeout_us: Optional[SimTime] = None


@dataclass(frozen=True)
class IdsSettings:
    mode: IdsMode = IdsMode.ASYNC
    recovery_interval_us: SimTime = 1_000_000
    window_us: SimTime = 1_000_000
    rate_limit: int = 200
    recovery_points: float = 1.0
    penalties: Tuple[Tuple[FindingKind, float], ...] = tuple(
        sorted(DEFAULT_PENALTIES.items(), key=lambda kv: kv[0].value)
    )
    allowed_protocols: Optional[Tuple[Protocol, ...]] = None  # None = all
    acl: Optional[Tuple[Tuple[str, str], ...]] = None         # None = any


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    duration_us: SimTime
    seed: int
    n_hosts: int
    traffic: Tuple[TrafficFlow, ...] = ()
    directives: Tuple[Directive, ...] = ()
    control: ControlConfig = ControlConfig()
    ids: IdsSettings = IdsSettings()
    link_overrides: Tuple[Tuple[ChannelKind, LinkSpec], ...] = ()
    arp_enabled: bool = True

    def topology_spec(self) -> TopologySpec:
        return TopologySpec(n_hosts=self.n_hosts,
                            link_overrides=dict(self.link_overrides) or None,
                            seed=self.seed)

    def resolve_ip(self, ref: str) -> str:
        """Host name or ip literal -> ip."""
        if ref.startswith("H") and ref[1:].isdigit():
            return host_ip(int(ref[1:]))
        return ref

    def host_ips(self) -> Dict[str, str]:
        return {f"H{k}": host_ip(k) for k in range(1, self.n_hosts + 1)}


# --- parsing -----------------------------------------------------------------

def _link_spec_from(channel: ChannelKind, raw: dict) -> LinkSpec:
    base = CHANNEL_DEFAULTS[channel]
    if "loss_p" in raw:  # exact form, used by serialize()
        loss_p = float(raw["loss_p"])
    elif "loss_pct" in raw:
        loss_p = raw["loss_pct"] / 100.0
    else:
        loss_p = base.loss_p
    return LinkSpec(
        down_bps=int(raw.get("down_bps", base.down_bps)),
        up_bps=int(raw.get("up_bps", base.up_bps)),
        prop_delay_us=int(raw.get("prop_delay_us", base.prop_delay_us)),
        loss_p=loss_p,
        channel=channel,
    )


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError("scenario must be a mapping")
    try:
        return _from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad scenario field: {exc}") from exc


def _from_dict(raw: dict) -> ScenarioConfig:
    topo = raw.get("topology", {})
    ctl = raw.get("control", {})
    ids_raw = raw.get("ids", {})

    penalties = dict(DEFAULT_PENALTIES)
    for name, value in (ids_raw.get("penalties") or {}).items():
        penalties[_FINDINGS[name]] = float(value)

    allowed = ids_raw.get("allowed_protocols")
    acl = ids_raw.get("acl")

    traffic = tuple(
        TrafficFlow(
            src=str(f["src"]),
            dst=str(f["dst"]),
            start_us=int(f["start_us"]),
            rate_pps=int(f["rate_pps"]),
            size_bytes=int(f["size_bytes"]),
            protocol=_PROTOCOLS[f.get("protocol", "icmp")],
            count=int(f["count"]) if f.get("count") is not None else None,
        )
        for f in raw.get("traffic", [])
    )
    directives = tuple(
        Directive(
            at_us=int(d["at_us"]),
            kind=str(d["kind"]),
            host=d.get("host"),
            channel=_CHANNELS[d["channel"]] if d.get("channel") else None,
            ip=d.get("ip"),
            score=float(d["score"]) if d.get("score") is not None else None,
            finding=_FINDINGS[d["finding"]] if d.get("finding") else None,
            value=float(d["value"]) if d.get("value") is not None else None,
        )
        for d in raw.get("directives", [])
    )
    overrides = tuple(
        (_CHANNELS[ch], _link_spec_from(_CHANNELS[ch], spec))
        for ch, spec in sorted((raw.get("links") or {}).items())
    )
    return ScenarioConfig(
        name=str(raw.get("name", "scenario")),
        duration_us=int(raw["duration_us"]),
        seed=int(raw.get("seed", 0)),
        n_hosts=int(topo.get("n_hosts", 15)),
        traffic=traffic,
        directives=directives,
        control=ControlConfig(
            latency_us=int(ctl.get("latency_us", 500)),
            detection_delay_us=int(ctl.get("detection_delay_us", 1000)),
            flowmod_bytes=int(ctl.get("flowmod_bytes", 128)),
            quarantine_mode=QuarantineMode(ctl.get("quarantine_mode", "redirect")),
            threshold=float(ctl.get("threshold", 50.0)),
            initial_trust=float(ctl.get("initial_trust", 100.0)),
            idle_timeout_us=(int(ctl["idle_timeout_us"])
                             if ctl.get("idle_timeout_us") is not None else None),
        ),
        ids=IdsSettings(
            mode=IdsMode(ids_raw.get("mode", "async")),
            recovery_interval_us=int(ids_raw.get("recovery_interval_us", 1_000_000)),
            window_us=int(ids_raw.get("window_us", 1_000_000)),
            rate_limit=int(ids_raw.get("rate_limit", 200)),
            recovery_points=float(ids_raw.get("recovery_points", 1.0)),
            penalties=tuple(sorted(penalties.items(), key=lambda kv: kv[0].value)),
            allowed_protocols=(tuple(_PROTOCOLS[p] for p in allowed)
                               if allowed is not None else None),
            acl=(tuple((str(a), str(b)) for a, b in acl)
                 if acl is not None else None),
        ),
        link_overrides=overrides,
        arp_enabled=bool(raw.get("arp_enabled", True)),
    )


def load_scenario(path: str) -> ScenarioConfig:
    with open(path) as fh:
        config = parse_scenario(fh.read())
    problems = validate_scenario(config)
    if problems:
        raise ValidationError(problems)
    return config


# --- validation --------------------------------------------------------------

def validate_scenario(config: ScenarioConfig) -> List[str]:
    problems: List[str] = []
    if config.n_hosts < 2:
        problems.append(f"topology.n_hosts must be >= 2, got {config.n_hosts}")
    if config.duration_us <= 0:
        problems.append("duration_us must be positive")
    known_ips = set(config.host_ips().values())
    known_hosts = set(config.host_ips())

    def known_endpoint(ref: str) -> bool:
        return ref in known_hosts or ref in known_ips

    for i, flow in enumerate(config.traffic):
        where = f"traffic[{i}]"
        if not known_endpoint(flow.src):
            problems.append(f"{where}: unknown src {flow.src}")
        if not known_endpoint(flow.dst):
            problems.append(f"{where}: unknown dst {flow.dst}")
        if flow.src == flow.dst:
            problems.append(f"{where}: src == dst")
        if flow.rate_pps <= 0:
            problems.append(f"{where}: rate_pps must be positive")
        if flow.size_bytes <= 0:
            problems.append(f"{where}: size_bytes must be positive")
        if not 0 <= flow.start_us <= config.duration_us:
            problems.append(f"{where}: start_us outside [0, duration]")
    for i, d in enumerate(config.directives):
        where = f"directives[{i}]"
        if d.kind not in DIRECTIVE_KINDS:
            problems.append(f"{where}: unknown kind {d.kind}")
            continue
        if not 0 <= d.at_us <= config.duration_us:
            problems.append(f"{where}: at_us outside [0, duration]")
        if d.kind in ("fail_link", "restore_link"):
            if d.host not in known_hosts:
                problems.append(f"{where}: unknown host {d.host}")
            if d.channel not in (ChannelKind.PRIMARY, ChannelKind.FALLBACK):
                problems.append(f"{where}: channel must be primary or fallback")
        elif d.kind == "set_trust":
            if d.ip is None or not known_endpoint(d.ip):
                problems.append(f"{where}: unknown ip {d.ip}")
            if d.score is None or not 0 <= d.score <= 100:
                problems.append(f"{where}: score must be in [0,100]")
        elif d.kind == "set_threshold":
            if d.value is None or not 0 <= d.value <= 100:
                problems.append(f"{where}: value must be in [0,100]")
        elif d.kind == "set_penalty":
            if d.finding is None:
                problems.append(f"{where}: set_penalty needs a finding")
            if d.value is None or d.value <= 0:
                problems.append(f"{where}: value must be positive")
        elif d.kind == "set_recovery":
            if d.value is None or d.value <= 0:
                problems.append(f"{where}: value must be positive")
    return problems


# --- serialization -----------------------------------------------------------

def serialize(config: ScenarioConfig) -> str:
    doc: dict = {
        "version": SCENARIO_FORMAT_VERSION,
        "name": config.name,
        "duration_us": config.duration_us,
        "seed": config.seed,
        "topology": {"n_hosts": config.n_hosts},
        "arp_enabled": config.arp_enabled,
        "control": {
            "latency_us": config.control.latency_us,
            "detection_delay_us": config.control.detection_delay_us,
            "flowmod_bytes": config.control.flowmod_bytes,
            "quarantine_mode": config.control.quarantine_mode.value,
            "threshold": config.control.threshold,
            "initial_trust": config.control.initial_trust,
        },
        "ids": {
            "mode": config.ids.mode.value,
            "recovery_interval_us": config.ids.recovery_interval_us,
            "window_us": config.ids.window_us,
            "rate_limit": config.ids.rate_limit,
            "recovery_points": config.ids.recovery_points,
            "penalties": {_FINDING_NAMES[k]: v for k, v in config.ids.penalties},
        },
    }
    if config.control.idle_timeout_us is not None:
        doc["control"]["idle_timeout_us"] = config.control.idle_timeout_us
    if config.ids.allowed_protocols is not None:
        doc["ids"]["allowed_protocols"] = [
            _PROTOCOL_NAMES[p] for p in config.ids.allowed_protocols
        ]
    if config.ids.acl is not None:
        doc["ids"]["acl"] = [list(pair) for pair in config.ids.acl]
    if config.link_overrides:
        doc["links"] = {
            _CHANNEL_NAMES[ch]: {
                "down_bps": spec.down_bps,
                "up_bps": spec.up_bps,
                "prop_delay_us": spec.prop_delay_us,
                "loss_p": spec.loss_p,
            }
            for ch, spec in config.link_overrides
        }
    if config.traffic:
        doc["traffic"] = [
            {k: v for k, v in {
                "src": f.src, "dst": f.dst, "start_us": f.start_us,
                "rate_pps": f.rate_pps, "size_bytes": f.size_bytes,
                "protocol": _PROTOCOL_NAMES[f.protocol],
                "count": f.count,
            }.items() if v is not None}
            for f in config.traffic
        ]
    if config.directives:
        doc["directives"] = [
            {k: v for k, v in {
                "at_us": d.at_us, "kind": d.kind, "host": d.host,
                "channel": _CHANNEL_NAMES[d.channel] if d.channel else None,
                "ip": d.ip, "score": d.score,
                "finding": _FINDING_NAMES[d.finding] if d.finding else None,
                "value": d.value,
            }.items() if v is not None}
            for d in config.directives
        ]
    return yaml.safe_dump(doc, sort_keys=False)
