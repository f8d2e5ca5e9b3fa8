"""Canned scenarios: the worked four-host example, the completeness case
matrices, host recovery, unsolicited floods and a quiet network."""

from __future__ import annotations

from dataclasses import dataclass, replace
from ipaddress import IPv4Address
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..arp_model import ArpFrame, MacAddr
from ..engine import Mode, VerdictKind
from ..state_tables import EngineConfig
from .simulator import SimReport, check_expectations, run_scenario
from .scenario import (
    DEFAULT_REPLY_LATENCY, Direction, Expectation, HostPolicy, Injection, Scenario, SimHost,
)


class UnknownCase(ValueError):
    pass


class HostAlreadyUp(ValueError):
    pass


def _host(n: int, name: str, **kw) -> SimHost:
    return SimHost(IPv4Address(f"10.0.0.{n}"), MacAddr(bytes([2, 0, 0, 0, 0, n])), name=name, **kw)


# -- worked example -------------------------------------------------------------

EXAMPLE_HOSTS = {name: SimHost(IPv4Address(f"10.0.0.{i}"), MacAddr(bytes([2, 0, 0, 0, 0, 0x0a + i - 1])),
                               name=name)
                 for i, name in enumerate("ABCD", start=1)}

# rows of the four tables after the example, as (IP owner, MAC owner) letters
GOLDEN_TABLES: Dict[str, List[Tuple[str, ...]]] = {
    "RQT": [],
    "RST": [("B", "B"), ("B", "B"), ("C", "D"), ("C", "D"), ("C", "C")],
    "VRFT": [("B", "B"), ("C", "D")],
    "AUTHT": [("B", "B")],
}

TABLE_TITLES = {
    "RQT": "Request-sent table",
    "RST": "Response-received table",
    "VRFT": "Verification table",
    "AUTHT": "Authenticated bindings table",
}


def example_scenario() -> Scenario:
    """A watches B answer genuinely, then D answer for C with its own MAC.

    A's requests are unicast cache refreshes (to B, and to D where A's cache
    already points C), so only the scripted replies answer them. D is
    quicker than C, which fixes the order of the last two response rows.
    """
    a, b, c, d = (EXAMPLE_HOSTS[x] for x in "ABCD")
    d = replace(d, policy=HostPolicy.SPOOF, spoof_map=((c.ip, d.mac),), latency=3)
    injections = (
        Injection(0, Direction.OUT, ArpFrame.request(a.mac, a.ip, b.ip, eth_dst=b.mac), a.ip),
        Injection(5, Direction.IN, ArpFrame.reply(b.mac, b.ip, a.mac, a.ip), b.ip),
        Injection(100, Direction.OUT, ArpFrame.request(a.mac, a.ip, c.ip, eth_dst=d.mac), a.ip),
        Injection(103, Direction.IN, ArpFrame.reply(d.mac, c.ip, a.mac, a.ip), d.ip),
    )
    expected = (
        Expectation(VerdictKind.GENUINE, b.ip, b.mac),
        Expectation(VerdictKind.SPOOFED, c.ip, d.mac),
    )
    return Scenario(hosts=(a, b, c, d), protected=a.ip, injections=injections,
                    expected=expected, name="worked example")


def golden_rows() -> Dict[str, List[Tuple[str, ...]]]:
    """GOLDEN_TABLES with host letters resolved to address text."""
    out = {}
    for table, rows in GOLDEN_TABLES.items():
        out[table] = [(str(EXAMPLE_HOSTS[i].ip), str(EXAMPLE_HOSTS[m].mac)) for i, m in rows]
    return out


def table_rows(snapshot: Sequence[str]) -> Dict[str, List[Tuple[str, ...]]]:
    """Address fields of each snapshot row, grouped by table."""
    out: Dict[str, List[Tuple[str, ...]]] = {t: [] for t in TABLE_TITLES}
    for line in snapshot:
        name, *fields = line.split()
        width = 1 if name == "RQT" else 2
        out[name].append(tuple(fields[:width]))
    return out


# -- completeness matrix ------------------------------------------------------------

# the protected host p, victim v, bystander k and malicious host m
CANON = {"p": _host(1, "p"), "v": _host(2, "v"), "k": _host(3, "k"), "m": _host(4, "m")}
EXTRA_ATTACKERS = [_host(5, "m2"), _host(6, "m3")]

SPOOF, GENUINE, MISS = "spoofed", "genuine", "known miss"

# label -> (IP owner, MAC owner, host that is down or None, outcome)
ALL_UP_CASES = {
    "A": ("m", "m", None, GENUINE),
    "B": ("v", "v", None, GENUINE),
    "C": ("v", "m", None, SPOOF),
    "D": ("m", "v", None, MISS),
    "E": ("v", "k", None, SPOOF),
}
SOME_DOWN_CASES = {
    "A": ("m", "m", "k", GENUINE),
    "B": ("v", "v", "k", GENUINE),
    "C": ("v", "v", "v", GENUINE),
    "D": ("v", "m", "k", SPOOF),
    "E": ("v", "m", "v", MISS),
    "F": ("m", "v", "k", MISS),
    "G": ("v", "k", "k", SPOOF),
    "H": ("v", "k", "v", MISS),
}

ATTACKERS = ("consistent", "silent")
ORDERS = ("victim-first", "attacker-first")
PACKETS = ("request", "reply")


def case_outcome(label: str, all_up: bool) -> str:
    table = ALL_UP_CASES if all_up else SOME_DOWN_CASES
    try:
        return table[label][3]
    except KeyError:
        raise UnknownCase(f"no case {label!r} with all_up={all_up}") from None


def completeness_case(label: str, all_up: bool, *, attacker: str = "consistent",
                 order: str = "victim-first", packet: str = "request",
                 extra_attackers: int = 0,
                 reply_latency: int = DEFAULT_REPLY_LATENCY) -> Scenario:
    """Canonical four-host scenario for one IP-MAC combination sent by m.

    ``attacker`` is ``consistent`` (m answers every query for the claimed IP
    with the claimed MAC) or ``silent``. ``order`` decides whether the
    victim's or the attacker's probe reply arrives first. ``packet`` picks a
    broadcast request or a reply that answers p's own query. Extra attackers
    answer for the claimed IP with their own MACs.
    """
    table = ALL_UP_CASES if all_up else SOME_DOWN_CASES
    if label not in table:
        raise UnknownCase(f"no case {label!r} with all_up={all_up}")
    if attacker not in ATTACKERS or order not in ORDERS or packet not in PACKETS:
        raise ValueError(f"bad variant {attacker}/{order}/{packet}")
    ip_owner, mac_owner, down, outcome = table[label]
    p, v, k, m = (CANON[x] for x in "pvkm")
    spa, sha = CANON[ip_owner].ip, CANON[mac_owner].mac

    fast, slow = max(reply_latency - 2, 0), reply_latency + 1
    if attacker == "consistent":
        m = replace(m, policy=HostPolicy.SPOOF, spoof_map=((spa, sha),))
    else:
        m = replace(m, policy=HostPolicy.SILENT)
    m = replace(m, latency=fast if order == "attacker-first" else slow)
    hosts = {"p": p, "v": v, "k": k, "m": m}
    if down is not None:
        hosts[down] = replace(hosts[down], up=False)
    extras = [replace(x, policy=HostPolicy.SPOOF, spoof_map=((spa, x.mac),), latency=m.latency)
              for x in EXTRA_ATTACKERS[:extra_attackers]]

    if packet == "request":
        frame = ArpFrame.request(sha, spa, p.ip)
        injections = (Injection(0, Direction.IN, frame, m.ip),)
    else:
        query = ArpFrame.request(p.mac, p.ip, spa)
        frame = ArpFrame.reply(sha, spa, p.mac, p.ip)
        injections = (Injection(0, Direction.OUT, query, p.ip),
                      Injection(1, Direction.IN, frame, m.ip))

    kind = VerdictKind.SPOOFED if outcome == SPOOF else VerdictKind.GENUINE
    regime = "up" if all_up else "down"
    name = f"{regime}.{label} {attacker} {order} {packet}"
    if extra_attackers:
        name = f"multi.{label} {attacker} {order} {packet} attackers={1 + extra_attackers}"
    return Scenario(hosts=tuple(hosts.values()) + tuple(extras), protected=p.ip,
                    injections=injections, reply_latency=reply_latency,
                    expected=(Expectation(kind, spa, sha),), name=name,
                    known_miss=outcome == MISS)


def wake_host(s: Scenario, host: Union[SimHost, IPv4Address], t: int) -> Scenario:
    """Bring a down host up at ``t``; it announces itself with a gratuitous request."""
    h = s.host(host.ip if isinstance(host, SimHost) else host)
    if h.is_up(t):
        raise HostAlreadyUp(f"{h.label} is already up")
    woken = replace(h, wake_at=t)
    hosts = tuple(woken if x.ip == h.ip else x for x in s.hosts)
    announce = Injection(t, Direction.IN, ArpFrame.request(h.mac, h.ip, h.ip), h.ip)
    return replace(s, hosts=hosts).with_injections([announce])


def wake_follow_up(label: str, *, attacker: str = "consistent", packet: str = "request",
                   t: int = 500) -> Tuple[Scenario, Tuple[IPv4Address, MacAddr]]:
    """A victim-down miss followed by the victim coming back.

    Returns the scenario and the falsified binding that must survive.
    """
    if SOME_DOWN_CASES.get(label, (None, None, None))[2] != "v":
        raise UnknownCase(f"case {label!r} does not take the victim down")
    s = completeness_case(label, all_up=False, attacker=attacker, packet=packet)
    v = s.host(CANON["v"].ip)
    s = wake_host(s, v, t)
    falsified = (s.expected[0].ip, s.expected[0].mac)
    expected = s.expected + (
        Expectation(VerdictKind.GRATUITOUS, v.ip, v.mac),
        Expectation(VerdictKind.SPOOFED, v.ip, v.mac),
    )
    name = f"down.{label} {attacker} {packet} + wake v"
    return replace(s, expected=expected, name=name, known_miss=False), falsified


def dos_flood(s: Scenario, attacker: Union[SimHost, IPv4Address], target: IPv4Address,
              n: int, gap: int, start: Optional[int] = None) -> Scenario:
    """Append ``n`` unsolicited replies from ``attacker`` to the protected host.

    Each reply claims ``target`` with the attacker's MAC. The flood starts
    after the last existing injection unless ``start`` is given.
    """
    if n < 1 or gap < 0:
        raise ValueError("need n >= 1 and gap >= 0")
    a = s.host(attacker.ip if isinstance(attacker, SimHost) else attacker)
    p = s.protected_host
    if start is None:
        start = s.injections[-1].t + 1 if s.injections else 0
    frame = ArpFrame.reply(a.mac, target, p.mac, p.ip)
    flood = [Injection(start + i * gap, Direction.IN, frame, a.ip) for i in range(n)]
    return s.with_injections(flood)


def quiet_lan(n_hosts: int = 3, rounds: int = 3, spacing: int = 1000) -> Scenario:
    """Genuine hosts only; p queries every host once per round."""
    p = CANON["p"]
    others = [_host(10 + i, f"h{i}") for i in range(n_hosts)]
    injections = []
    for r in range(rounds):
        for i, h in enumerate(others):
            injections.append(Injection(r * spacing + 10 * i, Direction.OUT,
                                        ArpFrame.request(p.mac, p.ip, h.ip), p.ip))
    expected = tuple(Expectation(VerdictKind.GENUINE, h.ip, h.mac) for h in others)
    return Scenario(hosts=(p, *others), protected=p.ip, injections=tuple(injections),
                    expected=expected, name=f"quiet lan x{n_hosts}")


def malformed_probe_scenario() -> Scenario:
    """m sends a request whose Ethernet source differs from its ARP sender."""
    p, v, k, m = (CANON[x] for x in "pvkm")
    frame = replace(ArpFrame.request(v.mac, v.ip, p.ip), eth_src=m.mac)
    return Scenario(hosts=(p, v, k, m), protected=p.ip,
                    injections=(Injection(0, Direction.IN, frame, m.ip),),
                    expected=(Expectation(VerdictKind.MALFORMED, v.ip, v.mac),),
                    name="malformed request")


@dataclass(frozen=True)
class MatrixCase:
    scenario: Scenario
    falsified_binding: Optional[Tuple[IPv4Address, MacAddr]] = None

    @property
    def name(self) -> str:
        return self.scenario.name


def matrix_cases() -> List[MatrixCase]:
    """Every completeness case in both regimes, the multi-attacker reruns of
    the detectable all-up cases, and the victim-recovery follow-ups."""
    out: List[MatrixCase] = []
    for all_up, table in ((True, ALL_UP_CASES), (False, SOME_DOWN_CASES)):
        for label in table:
            for attacker in ATTACKERS:
                for order in ORDERS:
                    for packet in PACKETS:
                        out.append(MatrixCase(completeness_case(label, all_up, attacker=attacker,
                                                           order=order, packet=packet)))
    for label, row in ALL_UP_CASES.items():
        if row[3] != SPOOF:
            continue
        for n_attackers in (2, 3):
            for order in ORDERS:
                for packet in PACKETS:
                    out.append(MatrixCase(completeness_case(label, True, order=order, packet=packet,
                                                       extra_attackers=n_attackers - 1)))
    for label in ("E", "H"):
        for attacker in ATTACKERS:
            for packet in PACKETS:
                s, falsified = wake_follow_up(label, attacker=attacker, packet=packet)
                out.append(MatrixCase(s, falsified))
    return out


@dataclass(frozen=True)
class MatrixRow:
    name: str
    expected: str
    observed: str
    passed: bool
    known_miss: bool


def _describe(kinds: Sequence[VerdictKind]) -> str:
    return ",".join(k.value for k in kinds) or "-"


def evaluate_case(case: MatrixCase, cfg: Optional[EngineConfig] = None,
                  mode: Mode = Mode.WINDOW) -> Tuple[MatrixRow, SimReport]:
    s = case.scenario
    report = run_scenario(s, cfg, mode)
    passed = check_expectations(s, report, strict=True)
    if case.falsified_binding is not None:
        ip, mac = case.falsified_binding
        passed = passed and f"AUTHT {ip} {mac}" in report.table_snapshot
    pairs = {(e.ip, e.mac) for e in s.expected}
    observed = [v.kind for v in report.verdicts if (v.ip, v.mac) in pairs]
    row = MatrixRow(s.name, _describe([e.kind for e in s.expected]), _describe(observed),
                    passed, s.known_miss)
    return row, report


def run_matrix(cfg: Optional[EngineConfig] = None, mode: Mode = Mode.WINDOW) -> List[MatrixRow]:
    return [evaluate_case(c, cfg, mode)[0] for c in matrix_cases()]
