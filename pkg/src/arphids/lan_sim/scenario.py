"""Scenario model and the line-oriented scenario/trace file format.

::

    HOST   <ip> <mac> <up|down> <genuine|silent|spoof ip=mac[,ip=mac...]> [latency=<ms>]
    INJECT <t_ms> <IN|OUT> <REQ|REP> <eth_src> <eth_dst> <sha> <spa> <tha> <tpa>
    EXPECT <t_ms_max> <GENUINE|SPOOFED|MALFORMED|UNICAST|GRATUITOUS|DOS> <ip> <mac>

The first HOST line is the protected host running the detector. ``#``
starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from ipaddress import IPv4Address
from typing import Dict, List, Optional, Tuple

from ..arp_model import OP_REPLY, OP_REQUEST, ArpFrame, MacAddr
from ..engine import VerdictKind

DEFAULT_REPLY_LATENCY = 5


class InvalidScenario(ValueError):
    pass


class ScenarioParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.message = message


class HostPolicy(str, Enum):
    GENUINE = "genuine"
    SILENT = "silent"
    SPOOF = "spoof"


class Direction(str, Enum):
    IN = "IN"
    OUT = "OUT"


@dataclass(frozen=True)
class SimHost:
    """A LAN station.

    Genuine hosts answer broadcast requests for their own IP. A silent
    attacker never answers anything. A spoofing attacker answers requests
    for IPs in ``spoof_map`` with the mapped MAC and otherwise behaves like
    a genuine host for its own IP. ``wake_at`` brings a down host up.
    """

    ip: IPv4Address
    mac: MacAddr
    up: bool = True
    policy: HostPolicy = HostPolicy.GENUINE
    spoof_map: Tuple[Tuple[IPv4Address, MacAddr], ...] = ()
    latency: Optional[int] = None
    wake_at: Optional[int] = None
    name: str = ""

    def is_up(self, t: int) -> bool:
        return self.up or (self.wake_at is not None and t >= self.wake_at)

    def claims(self, target: IPv4Address) -> Optional[MacAddr]:
        """MAC this host answers with when asked for ``target``, or None."""
        if self.policy is HostPolicy.SILENT:
            return None
        if self.policy is HostPolicy.SPOOF:
            for spoofed_ip, spoofed_mac in self.spoof_map:
                if spoofed_ip == target:
                    return spoofed_mac
        return self.mac if target == self.ip else None

    @property
    def label(self) -> str:
        return self.name or str(self.ip)


@dataclass(frozen=True)
class Injection:
    t: int
    direction: Direction
    frame: ArpFrame
    source: Optional[IPv4Address] = None


@dataclass(frozen=True)
class Expectation:
    kind: VerdictKind
    ip: IPv4Address
    mac: MacAddr
    by: Optional[int] = None


@dataclass(frozen=True)
class Scenario:
    hosts: Tuple[SimHost, ...]
    protected: IPv4Address
    injections: Tuple[Injection, ...] = ()
    reply_latency: int = DEFAULT_REPLY_LATENCY
    expected: Tuple[Expectation, ...] = ()
    name: str = ""
    known_miss: bool = False

    def host(self, ip: IPv4Address) -> SimHost:
        for h in self.hosts:
            if h.ip == ip:
                return h
        raise KeyError(f"no host {ip}")

    def host_by_mac(self, mac: MacAddr) -> Optional[SimHost]:
        for h in self.hosts:
            if h.mac == mac:
                return h
        return None

    @property
    def protected_host(self) -> SimHost:
        return self.host(self.protected)

    def latency_of(self, host: SimHost) -> int:
        return self.reply_latency if host.latency is None else host.latency

    def with_injections(self, extra: List[Injection]) -> "Scenario":
        # sorted() is stable, so same-time injections keep their order
        merged = sorted(list(self.injections) + list(extra), key=lambda i: i.t)
        return replace(self, injections=tuple(merged))

    def validate(self) -> None:
        if not any(h.ip == self.protected for h in self.hosts):
            raise InvalidScenario(f"protected host {self.protected} is not in the host list")
        if len({h.ip for h in self.hosts}) != len(self.hosts):
            raise InvalidScenario("duplicate host IP")
        if self.reply_latency < 0 or any(h.latency is not None and h.latency < 0 for h in self.hosts):
            raise InvalidScenario("reply latency must be >= 0")
        last = None
        for inj in self.injections:
            if inj.t < 0:
                raise InvalidScenario(f"injection at negative time {inj.t}")
            if last is not None and inj.t < last:
                raise InvalidScenario(f"injection at {inj.t} ms follows one at {last} ms")
            last = inj.t


# -- text format ---------------------------------------------------------------

def _mac(tok: str, line_no: int) -> MacAddr:
    try:
        return MacAddr.parse(tok)
    except ValueError:
        raise ScenarioParseError(line_no, f"bad MAC address {tok!r}") from None


def _ip(tok: str, line_no: int) -> IPv4Address:
    try:
        return IPv4Address(tok)
    except ValueError:
        raise ScenarioParseError(line_no, f"bad IPv4 address {tok!r}") from None


def _int(tok: str, line_no: int, what: str) -> int:
    try:
        value = int(tok)
    except ValueError:
        raise ScenarioParseError(line_no, f"bad {what} {tok!r}") from None
    if value < 0:
        raise ScenarioParseError(line_no, f"{what} must be >= 0")
    return value


def _parse_host(toks: List[str], n: int) -> SimHost:
    if len(toks) < 4:
        raise ScenarioParseError(n, "HOST needs <ip> <mac> <up|down> <policy>")
    host_ip, host_mac = _ip(toks[0], n), _mac(toks[1], n)
    if toks[2] not in ("up", "down"):
        raise ScenarioParseError(n, f"expected up or down, got {toks[2]!r}")
    rest = toks[3:]
    try:
        policy = HostPolicy(rest.pop(0))
    except ValueError:
        raise ScenarioParseError(n, f"unknown host policy {toks[3]!r}") from None
    spoof_map = []
    if policy is HostPolicy.SPOOF:
        if not rest or "=" not in rest[0] or rest[0].startswith("latency="):
            raise ScenarioParseError(n, "spoof policy needs ip=mac[,ip=mac...]")
        for pair in rest.pop(0).split(","):
            a, _, b = pair.partition("=")
            spoof_map.append((_ip(a, n), _mac(b, n)))
    latency = None
    for tok in rest:
        key, _, value = tok.partition("=")
        if key != "latency" or not value:
            raise ScenarioParseError(n, f"unexpected field {tok!r}")
        latency = _int(value, n, "latency")
    return SimHost(host_ip, host_mac, up=toks[2] == "up", policy=policy,
                   spoof_map=tuple(spoof_map), latency=latency)


def _parse_inject(toks: List[str], n: int) -> Injection:
    if len(toks) != 9:
        raise ScenarioParseError(n, "INJECT needs <t_ms> <IN|OUT> <REQ|REP> "
                                    "<eth_src> <eth_dst> <sha> <spa> <tha> <tpa>")
    t = _int(toks[0], n, "time")
    try:
        direction = Direction(toks[1])
    except ValueError:
        raise ScenarioParseError(n, f"expected IN or OUT, got {toks[1]!r}") from None
    ops = {"REQ": OP_REQUEST, "REP": OP_REPLY}
    if toks[2] not in ops:
        raise ScenarioParseError(n, f"expected REQ or REP, got {toks[2]!r}")
    frame = ArpFrame(
        eth_src=_mac(toks[3], n), eth_dst=_mac(toks[4], n), opcode=ops[toks[2]],
        sha=_mac(toks[5], n), spa=_ip(toks[6], n), tha=_mac(toks[7], n), tpa=_ip(toks[8], n),
    )
    return Injection(t, direction, frame)


def _parse_expect(toks: List[str], n: int) -> Expectation:
    if len(toks) != 4:
        raise ScenarioParseError(n, "EXPECT needs <t_ms_max> <kind> <ip> <mac>")
    by = _int(toks[0], n, "time")
    try:
        kind = VerdictKind(toks[1])
    except ValueError:
        raise ScenarioParseError(n, f"unknown verdict kind {toks[1]!r}") from None
    return Expectation(kind, _ip(toks[2], n), _mac(toks[3], n), by)


def _records(text: str):
    for n, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split("#", 1)[0].split()
        if toks:
            yield n, toks[0], toks[1:]


def parse_scenario(text: str, name: str = "") -> Scenario:
    hosts: List[SimHost] = []
    injections: List[Injection] = []
    expected: List[Expectation] = []
    last_t = None
    for n, keyword, toks in _records(text):
        if keyword == "HOST":
            hosts.append(_parse_host(toks, n))
        elif keyword == "INJECT":
            inj = _parse_inject(toks, n)
            if last_t is not None and inj.t < last_t:
                raise ScenarioParseError(n, f"INJECT at {inj.t} ms is earlier than the previous one")
            last_t = inj.t
            injections.append(inj)
        elif keyword == "EXPECT":
            expected.append(_parse_expect(toks, n))
        else:
            raise ScenarioParseError(n, f"unknown record {keyword!r}")
    if not hosts:
        raise ScenarioParseError(0, "scenario declares no HOST")
    if len({h.ip for h in hosts}) != len(hosts):
        raise ScenarioParseError(0, "duplicate HOST address")
    protected = hosts[0]
    by_mac: Dict[MacAddr, IPv4Address] = {}
    for h in hosts:
        by_mac.setdefault(h.mac, h.ip)
    injections = [
        replace(i, source=protected.ip if i.direction is Direction.OUT else by_mac.get(i.frame.eth_src))
        for i in injections
    ]
    return Scenario(hosts=tuple(hosts), protected=protected.ip, injections=tuple(injections),
                    expected=tuple(expected), name=name)


def parse_trace(text: str) -> List[Injection]:
    """INJECT-only files, as used by replay."""
    out: List[Injection] = []
    for n, keyword, toks in _records(text):
        if keyword != "INJECT":
            raise ScenarioParseError(n, f"trace files may only contain INJECT records, got {keyword!r}")
        inj = _parse_inject(toks, n)
        if out and inj.t < out[-1].t:
            raise ScenarioParseError(n, f"INJECT at {inj.t} ms is earlier than the previous one")
        out.append(inj)
    return out


def format_injection(inj: Injection) -> str:
    f = inj.frame
    op = {OP_REQUEST: "REQ", OP_REPLY: "REP"}[f.opcode]
    return (f"INJECT {inj.t} {inj.direction.value} {op} {f.eth_src} {f.eth_dst} "
            f"{f.sha} {f.spa} {f.tha} {f.tpa}")


def dump_scenario(s: Scenario) -> str:
    """Inverse of parse_scenario for scenarios the file format can express.

    Host wake times are not representable; a woken host is written down and
    its announcement stays in the INJECT list.
    """
    hosts = sorted(s.hosts, key=lambda h: h.ip != s.protected)
    lines = []
    for h in hosts:
        policy = h.policy.value
        if h.policy is HostPolicy.SPOOF:
            policy += " " + ",".join(f"{a}={b}" for a, b in h.spoof_map)
        line = f"HOST {h.ip} {h.mac} {'up' if h.up else 'down'} {policy}"
        if h.latency is not None:
            line += f" latency={h.latency}"
        lines.append(line)
    lines += [format_injection(i) for i in s.injections]
    for e in s.expected:
        by = e.by if e.by is not None else 2 ** 31
        lines.append(f"EXPECT {by} {e.kind.value} {e.ip} {e.mac}")
    return "\n".join(lines) + "\n"
