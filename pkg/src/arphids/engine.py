"""Active ARP intrusion detector.

The engine is a single-threaded state machine. Drivers feed it a totally
ordered stream of events through :meth:`Engine.dispatch`: frames the host
received, requests the host itself sent, and the deferred probe checks the
engine asked for. Probes leave through an injected transport; the "wait for
a round trip" step is a ProbeCheck event the driver hands back once
``t_req`` has elapsed, so replies arriving in between are already in the
response table when the check runs.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Address
from typing import Callable, Iterable, List, Optional, Protocol, Union

from .arp_model import (
    OP_REPLY, OP_REQUEST, ArpFrame, MacAddr, ZERO_MAC,
    is_gratuitous, is_malformed, is_unicast_request,
)
from .state_tables import EngineConfig, SpoofRecord, StateTables

log = logging.getLogger(__name__)


class VerdictKind(str, Enum):
    GENUINE = "GENUINE"
    SPOOFED = "SPOOFED"
    MALFORMED = "MALFORMED"
    UNICAST = "UNICAST"
    GRATUITOUS = "GRATUITOUS"
    DOS = "DOS"


class Trigger(str, Enum):
    REQUEST = "request"
    RESPONSE = "response"
    PROBE_ANALYSIS = "probe-analysis"
    UNSOLICITED_FLOOD = "unsolicited-flood"


class Mode(str, Enum):
    """Which response-table rows the spoof check looks at."""

    WINDOW = "window"  # only replies received since the probe went out
    WHOLE_TABLE = "whole-table"  # every unexpired reply for the IP


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    ip: IPv4Address
    mac: MacAddr
    at: int
    trigger: Trigger

    def line(self) -> str:
        return f"VERDICT {self.at} {self.kind.value} {self.ip} {self.mac} {self.trigger.value}"


@dataclass(frozen=True)
class FrameIn:
    frame: ArpFrame
    t: int


@dataclass(frozen=True)
class FrameOut:
    frame: ArpFrame
    t: int


@dataclass(frozen=True)
class ProbeCheck:
    ip: IPv4Address
    mac: MacAddr
    issued_at: int
    fires_at: int


@dataclass(frozen=True)
class Deferred:
    check: ProbeCheck

    @property
    def t(self) -> int:
        return self.check.fires_at


EngineEvent = Union[FrameIn, FrameOut, Deferred]


class OutOfOrderEvent(ValueError):
    pass


class ProbeTransport(Protocol):
    def emit(self, frame: ArpFrame, at: int) -> None: ...


class ProbeLog:
    """Transport that only remembers what was sent."""

    def __init__(self):
        self.sent: List[tuple] = []

    def emit(self, frame: ArpFrame, at: int) -> None:
        self.sent.append((at, frame))


@dataclass
class EngineStats:
    frames_in: int = 0
    requests_in: int = 0
    replies_in: int = 0
    requests_out: int = 0
    probes_sent: int = 0


class Engine:
    def __init__(self, config: Optional[EngineConfig] = None,
                 transport: Optional[ProbeTransport] = None,
                 sink: Optional[Callable[[Verdict], None]] = None,
                 mode: Mode = Mode.WINDOW):
        self.config = config or EngineConfig()
        self.transport = transport if transport is not None else ProbeLog()
        self.sink = sink
        self.mode = Mode(mode)
        self.tables = StateTables.for_config(self.config)
        self.stats = EngineStats()
        self.now: Optional[int] = None
        self._scheduled: List[Deferred] = []

    # -- driver interface -------------------------------------------------

    def dispatch(self, event: EngineEvent) -> List[Verdict]:
        t = event.t
        if self.now is not None and t < self.now:
            raise OutOfOrderEvent(f"event at {t} ms after event at {self.now} ms")
        self.now = t
        self.tables.evict_expired(t)

        if isinstance(event, Deferred):
            c = event.check
            verdicts = self.spoof_detector(c.ip, c.mac, c.issued_at, t)
        elif isinstance(event, FrameOut):
            verdicts = []
            if event.frame.opcode == OP_REQUEST:
                self.on_outgoing_request(event.frame, t)
        elif isinstance(event, FrameIn):
            self.stats.frames_in += 1
            frame = event.frame
            if frame.opcode == OP_REQUEST:
                verdicts = self.handle_request(frame, t)
            elif frame.opcode == OP_REPLY:
                verdicts = self.handle_response(frame, t)
            else:
                verdicts = [self._verdict(VerdictKind.MALFORMED, frame.spa, frame.sha, t, Trigger.REQUEST)]
        else:
            raise TypeError(f"not an engine event: {event!r}")

        for v in verdicts:
            log.debug("%s", v.line())
            if self.sink is not None:
                self.sink(v)
        return verdicts

    def take_scheduled(self) -> List[Deferred]:
        """Hand over the probe checks requested since the last call."""
        out, self._scheduled = self._scheduled, []
        return out

    # -- handlers -----------------------------------------------------------

    def handle_request(self, frame: ArpFrame, t: int) -> List[Verdict]:
        self.stats.requests_in += 1
        ips, macs = frame.spa, frame.sha
        if is_malformed(frame):
            return [self._verdict(VerdictKind.MALFORMED, ips, macs, t, Trigger.REQUEST)]
        if is_unicast_request(frame):
            return [self._verdict(VerdictKind.UNICAST, ips, macs, t, Trigger.REQUEST)]
        if is_gratuitous(frame):
            out = [self._verdict(VerdictKind.GRATUITOUS, ips, macs, t, Trigger.REQUEST)]
            return out + self._maybe(self.verify_ip_mac(ips, macs, t, Trigger.REQUEST))
        bound = self.tables.autht.lookup(ips)
        if bound is not None:
            return [self._against_binding(bound, ips, macs, t, Trigger.REQUEST)]
        return self._maybe(self.verify_ip_mac(ips, macs, t, Trigger.REQUEST))

    def handle_response(self, frame: ArpFrame, t: int) -> List[Verdict]:
        self.stats.replies_in += 1
        ips, macs = frame.spa, frame.sha
        if is_malformed(frame):
            return [self._verdict(VerdictKind.MALFORMED, ips, macs, t, Trigger.RESPONSE)]
        self.tables.rst.record(ips, macs, t)
        if is_gratuitous(frame):
            out = [self._verdict(VerdictKind.GRATUITOUS, ips, macs, t, Trigger.RESPONSE)]
            return out + self._maybe(self.verify_ip_mac(ips, macs, t, Trigger.RESPONSE))
        if (frame.tpa == self.config.hids_ip and frame.tha == self.config.hids_mac
                and self.tables.vrft.pending(ips) is not None):
            # reply to our own probe; the pending check will read it from the RST
            return []
        if self.tables.rqt.contains(ips):
            bound = self.tables.autht.lookup(ips)
            if bound is not None:
                return [self._against_binding(bound, ips, macs, t, Trigger.RESPONSE)]
            return self._maybe(self.verify_ip_mac(ips, macs, t, Trigger.RESPONSE))
        return self._maybe(self.handle_unsolicited(t, ips, macs))

    def verify_ip_mac(self, ips: IPv4Address, macs: MacAddr, t: int,
                      trigger: Trigger = Trigger.RESPONSE) -> Optional[Verdict]:
        pending = self.tables.vrft.pending(ips)
        if pending is not None:
            if pending.macs == macs:
                return None
            return self._spoofed(ips, macs, t, trigger)
        self._send_probe(ips, t)
        self.tables.vrft.begin(ips, macs, t)
        self._scheduled.append(Deferred(ProbeCheck(ips, macs, t, t + self.config.t_req)))
        return None

    def spoof_detector(self, ips: IPv4Address, macs: MacAddr, issued_at: int, fired_at: int) -> List[Verdict]:
        pending = self.tables.vrft.pending(ips)
        if pending is None or pending.macs != macs or pending.t != issued_at:
            log.warning("probe check for %s %s at %d has no pending verification", ips, macs, fired_at)
            return []
        since = issued_at if self.mode is Mode.WINDOW else None
        seen = self.tables.rst.responses_for(ips, since)
        self.tables.vrft.settle(ips)
        if any(m != macs for m, rt in seen if rt <= fired_at):
            return [self._spoofed(ips, macs, fired_at, Trigger.PROBE_ANALYSIS)]
        bound = self.tables.autht.lookup(ips)
        if bound is None:
            self.tables.autht.bind(ips, macs)
        elif bound != macs:
            # an earlier binding always wins over a fresh probe result
            return [self._spoofed(ips, macs, fired_at, Trigger.PROBE_ANALYSIS)]
        return [self._verdict(VerdictKind.GENUINE, ips, macs, fired_at, Trigger.PROBE_ANALYSIS)]

    def handle_unsolicited(self, t: int, ip: Optional[IPv4Address] = None,
                           mac: Optional[MacAddr] = None) -> Optional[Verdict]:
        state = self.tables.unsolicited
        if state.last_t is not None and t - state.last_t < self.config.delta:
            state.counter += 1
            state.last_t = t
            if state.counter > self.config.dos_th:
                return self._verdict(VerdictKind.DOS, ip or IPv4Address(0), mac or ZERO_MAC,
                                     t, Trigger.UNSOLICITED_FLOOD)
        else:
            state.counter = 1
            state.last_t = t
        return None

    def on_outgoing_request(self, frame: ArpFrame, t: int) -> None:
        self.stats.requests_out += 1
        self.tables.rqt.record(frame.tpa, t)

    # -- helpers --------------------------------------------------------------

    def probe_frame(self, target: IPv4Address) -> ArpFrame:
        return ArpFrame.request(self.config.hids_mac, self.config.hids_ip, target)

    def _send_probe(self, target: IPv4Address, t: int) -> None:
        self.stats.probes_sent += 1
        self.transport.emit(self.probe_frame(target), t)

    def _against_binding(self, bound, ips, macs, t, trigger) -> Verdict:
        if bound == macs:
            return self._verdict(VerdictKind.GENUINE, ips, macs, t, trigger)
        return self._spoofed(ips, macs, t, trigger)

    def _spoofed(self, ips, macs, t, trigger) -> Verdict:
        self.tables.spoofed.append(SpoofRecord(ips, macs, t, trigger.value))
        return self._verdict(VerdictKind.SPOOFED, ips, macs, t, trigger)

    @staticmethod
    def _verdict(kind, ips, macs, t, trigger) -> Verdict:
        return Verdict(kind, ips, macs, t, trigger)

    @staticmethod
    def _maybe(v: Optional[Verdict]) -> List[Verdict]:
        return [] if v is None else [v]


def replay(engine: Engine, events: Iterable[EngineEvent]) -> List[Verdict]:
    """Run a headless engine over recorded events.

    Probe checks the engine schedules are interleaved by time; at equal
    timestamps recorded frames go first so a reply landing exactly at the
    end of a window still counts.
    """
    verdicts: List[Verdict] = []
    due: List[tuple] = []
    seq = 0

    def enqueue_scheduled():
        nonlocal seq
        for d in engine.take_scheduled():
            heapq.heappush(due, (d.t, seq, d))
            seq += 1

    for ev in events:
        while due and due[0][0] < ev.t:
            verdicts += engine.dispatch(heapq.heappop(due)[2])
            enqueue_scheduled()
        verdicts += engine.dispatch(ev)
        enqueue_scheduled()
    while due:
        verdicts += engine.dispatch(heapq.heappop(due)[2])
        enqueue_scheduled()
    return verdicts
