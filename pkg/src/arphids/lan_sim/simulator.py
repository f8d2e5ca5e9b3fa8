"""Discrete-event run of a scenario against a protected host's detector.

The LAN is an ideal switch: broadcasts reach every up host, unicasts only
their destination, nothing is lost. Events at the same millisecond are
ordered frames first, then probe checks; frames keep the order in which they
were put on the wire, and replies caused by one frame are put on the wire in
ascending host-IP order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Tuple

from ..arp_model import OP_REQUEST, ArpFrame, is_gratuitous
from ..engine import Deferred, Engine, FrameIn, FrameOut, Mode, Verdict, VerdictKind
from ..state_tables import EngineConfig
from .scenario import Direction, Expectation, Scenario, SimHost

_FRAME, _CHECK = 0, 1

# origins of frames on the wire
SCRIPT, HOST_REPLY, PROBE, PROBE_REPLY = "script", "reply", "probe", "probe-reply"


@dataclass
class SimReport:
    verdicts: List[Verdict]
    frames_total: int
    frames_engine: int
    table_snapshot: List[str]
    probes_sent: int = 0
    probe_replies: int = 0
    wire: List[Tuple[int, str, ArpFrame]] = field(default_factory=list)

    def lines(self) -> List[str]:
        out = [v.line() for v in self.verdicts]
        out.append(f"TRAFFIC total={self.frames_total} engine={self.frames_engine} "
                   f"probes={self.probes_sent} probe_replies={self.probe_replies}")
        out += [f"TABLE {row}" for row in self.table_snapshot]
        return out

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"


@dataclass(frozen=True)
class _WireFrame:
    frame: ArpFrame
    origin: str
    sender: object  # IPv4Address of the sending host, or None
    direction: Optional[Direction] = None  # only for scripted frames


class _Simulation:
    def __init__(self, s: Scenario, cfg: EngineConfig, mode: Mode):
        self.s = s
        self.p = s.protected_host
        self.hosts = sorted(s.hosts, key=lambda h: int(h.ip))
        self.engine = Engine(replace(cfg, hids_ip=self.p.ip, hids_mac=self.p.mac),
                             transport=self, mode=mode)
        self.queue: list = []
        self.seq = 0
        self.verdicts: List[Verdict] = []
        self.wire: List[Tuple[int, str, ArpFrame]] = []
        self.frames_engine = 0
        self.probe_replies = 0

    def push(self, t: int, rank: int, item) -> None:
        heapq.heappush(self.queue, (t, rank, self.seq, item))
        self.seq += 1

    # ProbeTransport: a probe is on the wire as soon as it is emitted
    def emit(self, frame: ArpFrame, at: int) -> None:
        self.wire.append((at, PROBE, frame))
        self.frames_engine += 1
        self.react(_WireFrame(frame, PROBE, self.p.ip), at)

    def react(self, wf: _WireFrame, t: int) -> None:
        """Schedule host answers to a broadcast request seen at ``t``."""
        f = wf.frame
        if f.opcode != OP_REQUEST or not f.eth_dst.is_broadcast or is_gratuitous(f):
            return
        origin = PROBE_REPLY if wf.origin == PROBE else HOST_REPLY
        for h in self.hosts:
            if h.ip == wf.sender or not h.is_up(t):
                continue
            claimed = h.claims(f.tpa)
            if claimed is None:
                continue
            reply = ArpFrame.reply(claimed, f.tpa, f.sha, f.spa)
            self.push(t + self.s.latency_of(h), _FRAME, _WireFrame(reply, origin, h.ip))

    def deliver(self, wf: _WireFrame, t: int) -> None:
        self.wire.append((t, wf.origin, wf.frame))
        if wf.origin == PROBE_REPLY:
            self.frames_engine += 1
            self.probe_replies += 1
        if wf.direction is Direction.OUT or (wf.direction is None and wf.sender == self.p.ip):
            self.run_engine(FrameOut(wf.frame, t))
        elif wf.direction is Direction.IN or wf.frame.eth_dst.is_broadcast or wf.frame.eth_dst == self.p.mac:
            self.run_engine(FrameIn(wf.frame, t))
        self.react(wf, t)

    def run_engine(self, event) -> None:
        self.verdicts += self.engine.dispatch(event)
        for d in self.engine.take_scheduled():
            self.push(d.t, _CHECK, d)

    def run(self) -> SimReport:
        for inj in self.s.injections:
            self.push(inj.t, _FRAME, _WireFrame(inj.frame, SCRIPT, inj.source, inj.direction))
        while self.queue:
            t, _, _, item = heapq.heappop(self.queue)
            if isinstance(item, Deferred):
                self.run_engine(item)
            else:
                self.deliver(item, t)
        return SimReport(
            verdicts=self.verdicts,
            frames_total=len(self.wire),
            frames_engine=self.frames_engine,
            table_snapshot=self.engine.tables.snapshot(),
            probes_sent=self.engine.stats.probes_sent,
            probe_replies=self.probe_replies,
            wire=self.wire,
        )


def run_scenario(s: Scenario, cfg: Optional[EngineConfig] = None,
                 mode: Mode = Mode.WINDOW) -> SimReport:
    """Simulate ``s`` with the detector on its protected host.

    The engine's HIDS identity is taken from the protected host; every other
    config field comes from ``cfg``.
    """
    s.validate()
    return _Simulation(s, cfg or EngineConfig(), Mode(mode)).run()


def expectation_met(e: Expectation, verdicts: Iterable[Verdict]) -> bool:
    return any(v.kind is e.kind and v.ip == e.ip and v.mac == e.mac
               and (e.by is None or v.at <= e.by) for v in verdicts)


_OPPOSITE = {VerdictKind.GENUINE: VerdictKind.SPOOFED, VerdictKind.SPOOFED: VerdictKind.GENUINE}


def contradictions(expected: Iterable[Expectation], verdicts: Iterable[Verdict]) -> List[Verdict]:
    """Verdicts that give an expected Genuine/Spoofed pair the opposite kind."""
    verdicts = list(verdicts)
    bad = []
    for e in expected:
        other = _OPPOSITE.get(e.kind)
        if other is None:
            continue
        bad += [v for v in verdicts if v.kind is other and v.ip == e.ip and v.mac == e.mac]
    return bad


def check_expectations(s: Scenario, report: SimReport, strict: bool = False) -> bool:
    ok = all(expectation_met(e, report.verdicts) for e in s.expected)
    if strict:
        ok = ok and not contradictions(s.expected, report.verdicts)
    return ok
