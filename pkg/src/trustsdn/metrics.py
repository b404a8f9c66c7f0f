"""KPI computation over a finished run trace.

All five reported quantities are recomputed offline from the immutable
trace, never from live counters, so tests can recompute them with an
independent pass over the same records.

Definitions chosen here (the source material reports these KPIs without
defining them; see README):
  - fallback delay: per trigger (primary link failure or downward trust
    crossing), time until the first packet of an affected flow is
    delivered end-to-end over a path containing a fallback hop.
  - trust transition time: per downward crossing, time from the causing
    observation/override to the first enforcing control action taking
    effect.
  - routing adaptability: per failover/quarantine enforcement, time from
    the trigger to the last required rule being installed; always at most
    the fallback delay for the same trigger.
  - packet loss rate: per channel, lost/sent over host payload packet
    link traversals (ARP and control-plane messages excluded).
  - flow installation time: per actually-installed rule, flow-mod
    completion minus the controller request.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .engine import TraceRecord
from .netmodel import ChannelKind


class NoFallbackObserved(Exception):
    """A failover/quarantine trigger saw no fallback delivery before the end."""


@dataclass
class KpiReport:
    n_hosts: int
    fallback_delay_us: Optional[float] = None
    flow_install_us: Optional[float] = None
    trust_transition_us: Optional[float] = None
    loss_primary: float = 0.0
    loss_fallback: float = 0.0
    loss_core: float = 0.0
    routing_adaptability_us: Optional[float] = None
    sent: Dict[str, int] = field(default_factory=dict)       # channel -> count
    delivered: Dict[str, int] = field(default_factory=dict)  # channel -> count


@dataclass(frozen=True)
class Trigger:
    kind: str  # "link" | "trust"
    ip: str
    t: int


def _mean(values: List[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def find_triggers(records: List[TraceRecord]) -> List[Trigger]:
    triggers = []
    for rec in records:
        if (rec.kind == "link_state" and rec.fields.get("state") == "Down"
                and rec.fields.get("channel") == ChannelKind.PRIMARY.value):
            triggers.append(Trigger("link", rec.fields["host_ip"], rec.time_us))
        elif rec.kind == "trust" and rec.fields.get("crossed") == "down":
            triggers.append(Trigger("trust", rec.fields["ip"], rec.fields["cause_us"]))
    return triggers


def fallback_delay(records: List[TraceRecord]) -> Optional[float]:
    """Mean over link-failure triggers of time-to-first fallback delivery
    of an affected flow. Trust-driven redirections are timed separately by
    trust_transition_time. Raises NoFallbackObserved if a trigger is never
    answered before the run ends."""
    triggers = [trig for trig in find_triggers(records) if trig.kind == "link"]
    # a failure on an idle host triggers no failover and owes no delivery
    triggers = [
        trig for trig in triggers
        if any(rec.kind == "action"
               and rec.fields.get("trigger_kind") == "link"
               and rec.fields.get("trigger_ip") == trig.ip
               and rec.fields.get("trigger_t") == trig.t
               for rec in records)
    ]
    if not triggers:
        return None
    delays = []
    for trig in triggers:
        first = None
        for rec in records:
            if rec.kind != "deliver" or rec.time_us <= trig.t:
                continue
            if trig.ip not in (rec.fields["src"], rec.fields["dst"]):
                continue
            if ChannelKind.FALLBACK.value in rec.fields["channels"].split("+"):
                first = rec.time_us
                break
        if first is None:
            raise NoFallbackObserved(f"{trig.kind} trigger at {trig.t} for {trig.ip}")
        delays.append(float(first - trig.t))
    return _mean(delays)


def trust_transition_time(records: List[TraceRecord]) -> Optional[float]:
    """Mean over enforced downward crossings of cause-to-enforcement time."""
    transitions = []
    for rec in records:
        if rec.kind != "trust" or rec.fields.get("crossed") != "down":
            continue
        cause = rec.fields["cause_us"]
        ip = rec.fields["ip"]
        for act in records:
            if (act.kind == "action" and act.fields.get("trigger_kind") == "trust"
                    and act.fields.get("trigger_ip") == ip
                    and act.fields.get("trigger_t") == cause):
                transitions.append(float(act.fields["effective_us"] - cause))
                break
    return _mean(transitions)


def packet_loss_rates(records: List[TraceRecord]) -> Tuple[Dict[str, int], Dict[str, int]]:
    """Per-channel (sent, delivered) counters over payload link traversals."""
    sent: Dict[str, int] = {}
    delivered: Dict[str, int] = {}
    for rec in records:
        if rec.kind != "link_tx" or not rec.fields.get("payload"):
            continue
        outcome = rec.fields["outcome"]
        if outcome == "link_down":
            continue  # never transmitted
        channel = rec.fields["channel"]
        sent[channel] = sent.get(channel, 0) + 1
        if outcome == "delivered":
            delivered[channel] = delivered.get(channel, 0) + 1
    return sent, delivered


def routing_adaptability(records: List[TraceRecord]) -> Optional[float]:
    """Mean over failover/quarantine enforcements of trigger-to-rules-ready."""
    groups: Dict[Tuple[str, str, int], int] = {}
    for rec in records:
        if rec.kind != "rule_install" or rec.fields.get("idempotent"):
            continue
        if rec.fields.get("trigger_kind") not in ("link", "trust"):
            continue
        key = (rec.fields["trigger_kind"], rec.fields["trigger_ip"],
               rec.fields["trigger_t"])
        groups[key] = max(groups.get(key, 0), rec.fields["done_us"])
    return _mean([float(done - key[2]) for key, done in groups.items()])


def flow_install_time(records: List[TraceRecord]) -> Optional[float]:
    times = [
        float(rec.fields["done_us"] - rec.fields["requested_us"])
        for rec in records
        if rec.kind == "rule_install" and not rec.fields.get("idempotent")
    ]
    return _mean(times)


def compute_report(records: List[TraceRecord], n_hosts: int) -> KpiReport:
    sent, delivered = packet_loss_rates(records)

    def loss(channel: ChannelKind) -> float:
        s = sent.get(channel.value, 0)
        if s == 0:
            return 0.0
        return 1.0 - delivered.get(channel.value, 0) / s

    return KpiReport(
        n_hosts=n_hosts,
        fallback_delay_us=fallback_delay(records),
        flow_install_us=flow_install_time(records),
        trust_transition_us=trust_transition_time(records),
        loss_primary=loss(ChannelKind.PRIMARY),
        loss_fallback=loss(ChannelKind.FALLBACK),
        loss_core=loss(ChannelKind.CORE),
        routing_adaptability_us=routing_adaptability(records),
        sent=sent,
        delivered=delivered,
    )


CSV_HEADER = ("n_hosts,fallback_delay_us,flow_install_us,trust_transition_us,"
              "loss_primary,loss_fallback,routing_adaptability_us")


def _fmt_duration(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.3f}"


def emit_csv(reports: List[KpiReport], path: Optional[str] = None) -> str:
    """Render the per-size KPI table; one row per report, ordered by size."""
    if not reports:
        raise ValueError("no reports to emit")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for report in sorted(reports, key=lambda r: r.n_hosts):
        writer.writerow([
            report.n_hosts,
            _fmt_duration(report.fallback_delay_us),
            _fmt_duration(report.flow_install_us),
            _fmt_duration(report.trust_transition_us),
            f"{report.loss_primary:.6f}",
            f"{report.loss_fallback:.6f}",
            _fmt_duration(report.routing_adaptability_us),
        ])
    content = out.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(content)
    return content
