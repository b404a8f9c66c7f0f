"""Deterministic simulator of a dual-channel, trust-gated SDN network:
hosts are dual-homed onto a primary and a fallback aggregation switch, a
central controller admits flows by trust score, and a behavioral IDS
adjusts those scores at runtime.
"""

from .engine import Engine, Event, EventKind, RngStream, SimTime, Trace
from .controller import Controller, Decision, TrustTable, trust_gate
from .ids import Ids, IdsMode
from .metrics import KpiReport, compute_report, emit_csv
from .netmodel import ChannelKind, LinkState, Packet, Protocol
from .runner import RunResult, Simulation, run, sweep
from .scenario import (
    ParseError,
    ScenarioConfig,
    ValidationError,
    load_scenario,
    parse_scenario,
    serialize,
    validate_scenario,
)
from .topology import build, host_ip, validate

__version__ = "0.1.0"

__all__ = [
    "Engine", "Event", "EventKind", "RngStream", "SimTime", "Trace",
    "Controller", "Decision", "TrustTable", "trust_gate",
    "Ids", "IdsMode",
    "KpiReport", "compute_report", "emit_csv",
    "ChannelKind", "LinkState", "Packet", "Protocol",
    "RunResult", "Simulation", "run", "sweep",
    "ParseError", "ScenarioConfig", "ValidationError",
    "load_scenario", "parse_scenario", "serialize", "validate_scenario",
    "build", "host_ip", "validate",
    "__version__",
]
