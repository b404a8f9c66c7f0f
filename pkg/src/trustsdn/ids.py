"""Behavioral anomaly detection and trust dynamics.

Per-ip sliding windows catch rate anomalies; protocol and ACL checks
catch the other two finding kinds. Findings lower trust immediately;
consistent clean activity earns back points on the periodic recovery
tick. Threshold crossings are reported through a callback, exactly once
per crossing, in either direction.
"""

import socketserver
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, Dict, FrozenSet, List, Optional, Set, Tuple

from .engine import DomainError, SimTime
from .controller import TrustTable
from .netmodel import Protocol


class FindingKind(str, Enum):
    RATE_ANOMALY = "RateAnomaly"
    PROTOCOL_VIOLATION = "ProtocolViolation"
    UNAUTHORIZED_ACCESS = "UnauthorizedAccess"


# Severity-ordered defaults; one unauthorized access plus any other
# finding drags a fresh node from 100 below the threshold.
DEFAULT_PENALTIES: Dict[FindingKind, float] = {
    FindingKind.RATE_ANOMALY: 15.0,
    FindingKind.PROTOCOL_VIOLATION: 25.0,
    FindingKind.UNAUTHORIZED_ACCESS: 40.0,
}


class IdsMode(str, Enum):
    INLINE = "inline"  # crossings enforced synchronously with the observation
    ASYNC = "async"    # crossings delivered to the controller on the next tick


@dataclass(frozen=True)
class AnomalyFinding:
    ip: str
    kind: FindingKind
    at: SimTime
    penalty: float

    def __post_init__(self):
        if self.penalty <= 0:
            raise DomainError("penalty must be positive")


@dataclass
class BehaviorProfile:
    window: Deque[Tuple[SimTime, Protocol, str, int]] = field(default_factory=deque)


# (ip, old, new, direction "down"|"up", cause time)
CrossingCallback = Callable[[str, float, float, str, SimTime], None]


class Ids:
    def __init__(
        self,
        window_us: SimTime = 1_000_000,
        rate_limit: int = 200,
        allowed_protocols: FrozenSet[Protocol] = frozenset(Protocol),
        acl: Optional[FrozenSet[Tuple[str, str]]] = None,  # None = any
        penalties: Optional[Dict[FindingKind, float]] = None,
        recovery_points: float = 1.0,
    ):
        self.window_us = window_us
        self.rate_limit = rate_limit
        self.allowed_protocols = allowed_protocols
        self.acl = acl
        self.penalties = dict(penalties or DEFAULT_PENALTIES)
        self.recovery_points = recovery_points
        self.profiles: Dict[str, BehaviorProfile] = {}
        self.active_this_tick: Set[str] = set()
        self.flagged_this_tick: Set[str] = set()
        self.on_crossing: Optional[CrossingCallback] = None

    # -- observation ----------------------------------------------------------

    def observe(self, src_ip: str, dst_ip: str, protocol: Protocol,
                size: int, t: SimTime) -> List[AnomalyFinding]:
        profile = self.profiles.setdefault(src_ip, BehaviorProfile())
        window = profile.window
        while window and window[0][0] <= t - self.window_us:
            window.popleft()
        window.append((t, protocol, dst_ip, size))
        self.active_this_tick.add(src_ip)

        findings: List[AnomalyFinding] = []
        if len(window) > self.rate_limit:
            findings.append(self._finding(src_ip, FindingKind.RATE_ANOMALY, t))
        if protocol not in self.allowed_protocols:
            findings.append(self._finding(src_ip, FindingKind.PROTOCOL_VIOLATION, t))
        if self.acl is not None and (src_ip, dst_ip) not in self.acl:
            findings.append(self._finding(src_ip, FindingKind.UNAUTHORIZED_ACCESS, t))
        if findings:
            self.flagged_this_tick.add(src_ip)
        return findings

    def _finding(self, ip: str, kind: FindingKind, t: SimTime) -> AnomalyFinding:
        return AnomalyFinding(ip=ip, kind=kind, at=t, penalty=self.penalties[kind])

    # -- trust updates --------------------------------------------------------

    def _maybe_cross(self, trust: TrustTable, ip: str, old: float, new: float,
                     cause_t: SimTime) -> None:
        th = trust.threshold
        if old >= th and new < th:
            if self.on_crossing:
                self.on_crossing(ip, old, new, "down", cause_t)
        elif old < th and new >= th:
            if self.on_crossing:
                self.on_crossing(ip, old, new, "up", cause_t)

    def apply_findings(self, trust: TrustTable,
                       findings: List[AnomalyFinding]) -> List[Tuple[str, float, float]]:
        changes = []
        for finding in findings:
            old, new = trust.adjust(finding.ip, -finding.penalty)
            changes.append((finding.ip, old, new))
            self._maybe_cross(trust, finding.ip, old, new, finding.at)
        return changes

    def tick_recovery(self, trust: TrustTable, t: SimTime) -> List[Tuple[str, float, float]]:
        """Credit ips that were active and clean during the elapsed tick."""
        changes = []
        for ip in sorted(self.active_this_tick - self.flagged_this_tick):
            old, new = trust.adjust(ip, self.recovery_points)
            if old != new:
                changes.append((ip, old, new))
                self._maybe_cross(trust, ip, old, new, t)
        self.active_this_tick.clear()
        self.flagged_this_tick.clear()
        return changes

    def set_trust(self, trust: TrustTable, ip: str, score: float,
                  t: SimTime) -> Tuple[float, float]:
        if not 0.0 <= score <= 100.0:
            raise DomainError(f"trust score out of [0,100]: {score}")
        old, new = trust.set(ip, score)
        self._maybe_cross(trust, ip, old, new, t)
        return old, new


# --- optional line-oriented command interface -------------------------------

def handle_command(line: str, ids: Ids, trust: TrustTable,
                   t: SimTime = 0) -> str:
    """`SET <ip> <score>` / `GET <ip>` over a line protocol."""
    parts = line.strip().split()
    if not parts:
        return "ERR empty command"
    verb = parts[0].upper()
    if verb == "GET" and len(parts) == 2:
        return f"OK {trust.get(parts[1])}"
    if verb == "SET" and len(parts) == 3:
        try:
            score = float(parts[2])
        except ValueError:
            return f"ERR not a number: {parts[2]}"
        try:
            old, new = ids.set_trust(trust, parts[1], score, t)
        except DomainError as exc:
            return f"ERR {exc}"
        return f"OK {old} -> {new}"
    return f"ERR unknown command: {line.strip()}"


class TrustCommandServer:
    """TCP server for the command interface. Never started by simulation
    runs; intended for interactive poking only."""

    def __init__(self, ids: Ids, trust: TrustTable, host: str = "127.0.0.1",
                 port: int = 0):
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for raw in self.rfile:
                    reply = handle_command(raw.decode("utf-8", "replace"),
                                           outer.ids, outer.trust)
                    self.wfile.write((reply + "\n").encode())

        self.ids = ids
        self.trust = trust
        self._server = socketserver.ThreadingTCPServer((host, port), Handler)
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> Tuple[str, int]:
        return self._server.server_address

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
