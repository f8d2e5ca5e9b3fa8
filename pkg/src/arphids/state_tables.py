"""The detector's bookkeeping: request/response history, pending
verifications, authenticated bindings and the unsolicited-reply counter.

All times are integer milliseconds on the engine's virtual clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from ipaddress import IPv4Address
from typing import Iterator, List, Optional, Tuple

from .arp_model import MacAddr

DEFAULT_T_REQ = 50
DEFAULT_T_RESP = 60_000
DEFAULT_DELTA = 1000
DEFAULT_DOS_TH = 10
DEFAULT_HIDS_IP = IPv4Address("10.0.0.1")
DEFAULT_HIDS_MAC = MacAddr.parse("02:00:00:00:00:01")


@dataclass(frozen=True)
class EngineConfig:
    """Timing bounds and identity of the protected host.

    t_req bounds a request/reply round trip, t_resp is how long received
    replies are remembered, and more than dos_th unsolicited replies with
    consecutive gaps under delta raise a DoS verdict.
    """

    t_req: int = DEFAULT_T_REQ
    t_resp: int = DEFAULT_T_RESP
    delta: int = DEFAULT_DELTA
    dos_th: int = DEFAULT_DOS_TH
    hids_ip: IPv4Address = DEFAULT_HIDS_IP
    hids_mac: MacAddr = DEFAULT_HIDS_MAC

    def __post_init__(self):
        if self.t_req <= 0:
            raise ValueError(f"t_req must be > 0 ms, got {self.t_req}")
        if self.t_resp < self.t_req:
            raise ValueError(f"t_resp ({self.t_resp}) must be >= t_req ({self.t_req})")
        if self.delta <= 0:
            raise ValueError(f"delta must be > 0 ms, got {self.delta}")
        if self.dos_th < 1:
            raise ValueError(f"dos_th must be >= 1, got {self.dos_th}")


@dataclass(frozen=True)
class RequestRecord:
    ipd: IPv4Address
    t: int


@dataclass(frozen=True)
class ResponseRecord:
    ips: IPv4Address
    macs: MacAddr
    t: int


@dataclass(frozen=True)
class VerificationRecord:
    ips: IPv4Address
    macs: MacAddr
    t: int
    pending: bool = True


@dataclass(frozen=True)
class Binding:
    ip: IPv4Address
    mac: MacAddr


@dataclass(frozen=True)
class SpoofRecord:
    ip: IPv4Address
    mac: MacAddr
    t: int
    trigger: str


class RequestSentTable:
    def __init__(self):
        self._rows: List[RequestRecord] = []

    def record(self, ipd: IPv4Address, t: int) -> None:
        self._rows.append(RequestRecord(ipd, t))

    def evict(self, now: int, ttl: int) -> None:
        self._rows = [r for r in self._rows if now - r.t < ttl]

    def contains(self, ipd: IPv4Address) -> bool:
        return any(r.ipd == ipd for r in self._rows)

    def __iter__(self) -> Iterator[RequestRecord]:
        return iter(list(self._rows))

    def __len__(self) -> int:
        return len(self._rows)


class ResponseReceivedTable:
    """Every reply seen, in arrival order. One IP may appear with several
    MACs; that multiplicity is exactly what the spoof check looks for."""

    def __init__(self):
        self._rows: List[ResponseRecord] = []

    def record(self, ips: IPv4Address, macs: MacAddr, t: int) -> None:
        self._rows.append(ResponseRecord(ips, macs, t))

    def evict(self, now: int, ttl: int) -> None:
        self._rows = [r for r in self._rows if now - r.t < ttl]

    def responses_for(self, ips: IPv4Address, since: Optional[int] = None) -> List[Tuple[MacAddr, int]]:
        return [(r.macs, r.t) for r in self._rows
                if r.ips == ips and (since is None or r.t >= since)]

    def __iter__(self) -> Iterator[ResponseRecord]:
        return iter(list(self._rows))

    def __len__(self) -> int:
        return len(self._rows)


class VerificationTable:
    """Pairs the detector has probed for, one row per IP.

    A row is pending while its probe window is open. Once the spoof check
    has run the row is kept as settled: it still shows up in snapshots but
    no longer short-circuits probe replies or suppresses a new probe, and
    the next verification of that IP replaces it.
    """

    def __init__(self):
        self._rows: List[VerificationRecord] = []

    def pending(self, ips: IPv4Address) -> Optional[VerificationRecord]:
        for r in self._rows:
            if r.ips == ips and r.pending:
                return r
        return None

    def begin(self, ips: IPv4Address, macs: MacAddr, t: int) -> VerificationRecord:
        if self.pending(ips) is not None:
            raise ValueError(f"verification of {ips} already pending")
        row = VerificationRecord(ips, macs, t)
        self._rows = [r for r in self._rows if r.ips != ips]
        self._rows.append(row)
        return row

    def settle(self, ips: IPv4Address) -> None:
        self._rows = [VerificationRecord(r.ips, r.macs, r.t, pending=False) if r.ips == ips else r
                      for r in self._rows]

    def __iter__(self) -> Iterator[VerificationRecord]:
        return iter(list(self._rows))

    def __len__(self) -> int:
        return len(self._rows)


class AuthBindingsTable:
    def __init__(self):
        self._rows: List[Binding] = []

    def lookup(self, ip: IPv4Address) -> Optional[MacAddr]:
        for b in self._rows:
            if b.ip == ip:
                return b.mac
        return None

    def bind(self, ip: IPv4Address, mac: MacAddr) -> None:
        bound = self.lookup(ip)
        if bound is None:
            self._rows.append(Binding(ip, mac))
        elif bound != mac:
            raise ValueError(f"{ip} is already bound to {bound}")

    def __iter__(self) -> Iterator[Binding]:
        return iter(list(self._rows))

    def __len__(self) -> int:
        return len(self._rows)


@dataclass
class UnsolicitedState:
    counter: int = 0
    last_t: Optional[int] = None


@dataclass
class StateTables:
    t_req: int = DEFAULT_T_REQ
    t_resp: int = DEFAULT_T_RESP
    rqt: RequestSentTable = field(default_factory=RequestSentTable)
    rst: ResponseReceivedTable = field(default_factory=ResponseReceivedTable)
    vrft: VerificationTable = field(default_factory=VerificationTable)
    autht: AuthBindingsTable = field(default_factory=AuthBindingsTable)
    unsolicited: UnsolicitedState = field(default_factory=UnsolicitedState)
    spoofed: List[SpoofRecord] = field(default_factory=list)

    @classmethod
    def for_config(cls, config: EngineConfig) -> "StateTables":
        return cls(t_req=config.t_req, t_resp=config.t_resp)

    def evict_expired(self, now: int) -> None:
        # verification rows and bindings have no timeout
        self.rqt.evict(now, self.t_req)
        self.rst.evict(now, self.t_resp)

    def snapshot(self) -> List[str]:
        """One line per row: table name, then the row's fields."""
        lines = [f"RQT {r.ipd} {r.t}" for r in self.rqt]
        lines += [f"RST {r.ips} {r.macs} {r.t}" for r in self.rst]
        lines += [f"VRFT {r.ips} {r.macs} {'pending' if r.pending else 'settled'}" for r in self.vrft]
        lines += [f"AUTHT {b.ip} {b.mac}" for b in self.autht]
        return lines


# Function forms of the table operations, for callers that prefer them.

def record_request_sent(table: RequestSentTable, ipd: IPv4Address, t: int) -> RequestSentTable:
    table.record(ipd, t)
    return table


def evict_expired(tables: StateTables, now: int) -> StateTables:
    tables.evict_expired(now)
    return tables


def lookup_auth(table: AuthBindingsTable, ip: IPv4Address) -> Optional[MacAddr]:
    return table.lookup(ip)


def responses_for(table: ResponseReceivedTable, ip: IPv4Address, since: int) -> List[Tuple[MacAddr, int]]:
    return table.responses_for(ip, since)
