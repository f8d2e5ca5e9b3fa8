"""ARP-over-Ethernet frames: addresses, the wire codec and structural checks."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from ipaddress import IPv4Address

ETHERTYPE_ARP = 0x0806
HTYPE_ETHERNET = 1
PTYPE_IPV4 = 0x0800
HLEN_ETHERNET = 6
PLEN_IPV4 = 4

OP_REQUEST = 1
OP_REPLY = 2

ETH_HEADER_LEN = 14
FRAME_LEN = 42

_ETH = struct.Struct("!6s6sH")
_ARP = struct.Struct("!HHBBH6s4s6s4s")

IpV4Addr = IPv4Address


class ParseError(ValueError):
    """Raised when an octet sequence cannot be decoded as an ARP frame."""


class TooShort(ParseError):
    pass


class NotArp(ParseError):
    pass


@dataclass(frozen=True, order=True)
class MacAddr:
    octets: bytes

    def __post_init__(self):
        if len(self.octets) != 6:
            raise ValueError(f"MAC address needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> "MacAddr":
        parts = text.replace("-", ":").split(":")
        if len(parts) != 6 or not all(1 <= len(p) <= 2 for p in parts):
            raise ValueError(f"invalid MAC address: {text!r}")
        try:
            return cls(bytes(int(p, 16) for p in parts))
        except ValueError:
            raise ValueError(f"invalid MAC address: {text!r}") from None

    @property
    def is_broadcast(self) -> bool:
        return self.octets == b"\xff" * 6

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddr('{self}')"


BROADCAST = MacAddr(b"\xff" * 6)
ZERO_MAC = MacAddr(b"\x00" * 6)


def mac(text: str) -> MacAddr:
    return MacAddr.parse(text)


def ip(text: str) -> IPv4Address:
    return IPv4Address(text)


@dataclass(frozen=True)
class ArpFrame:
    """One ARP packet together with its Ethernet II header.

    ``sha``/``spa`` are the sender hardware/protocol addresses and
    ``tha``/``tpa`` the target ones. Header constants default to the
    Ethernet/IPv4 values so that well-formed frames only need addresses.
    """

    eth_dst: MacAddr
    eth_src: MacAddr
    opcode: int
    sha: MacAddr
    spa: IPv4Address
    tha: MacAddr
    tpa: IPv4Address
    htype: int = HTYPE_ETHERNET
    ptype: int = PTYPE_IPV4
    hlen: int = HLEN_ETHERNET
    plen: int = PLEN_IPV4

    @classmethod
    def request(cls, sha: MacAddr, spa: IPv4Address, tpa: IPv4Address, *,
                eth_dst: MacAddr = BROADCAST, tha: MacAddr = ZERO_MAC) -> "ArpFrame":
        return cls(eth_dst=eth_dst, eth_src=sha, opcode=OP_REQUEST,
                   sha=sha, spa=spa, tha=tha, tpa=tpa)

    @classmethod
    def reply(cls, sha: MacAddr, spa: IPv4Address, tha: MacAddr, tpa: IPv4Address) -> "ArpFrame":
        return cls(eth_dst=tha, eth_src=sha, opcode=OP_REPLY,
                   sha=sha, spa=spa, tha=tha, tpa=tpa)

    @property
    def is_request(self) -> bool:
        return self.opcode == OP_REQUEST

    @property
    def is_reply(self) -> bool:
        return self.opcode == OP_REPLY

    def to_bytes(self) -> bytes:
        return serialize_frame(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ArpFrame":
        return parse_frame(data)


def parse_frame(data: bytes) -> ArpFrame:
    """Decode one Ethernet frame carrying ARP.

    Octets past the 42-octet ARP frame (Ethernet padding, FCS) are ignored.
    Raises TooShort when fewer than 42 octets are given and NotArp when the
    EtherType is not 0x0806.
    """
    if len(data) < FRAME_LEN:
        raise TooShort(f"ARP frame needs {FRAME_LEN} octets, got {len(data)}")
    dst, src, ethertype = _ETH.unpack_from(data, 0)
    if ethertype != ETHERTYPE_ARP:
        raise NotArp(f"EtherType 0x{ethertype:04x} is not ARP")
    htype, ptype, hlen, plen, op, sha, spa, tha, tpa = _ARP.unpack_from(data, ETH_HEADER_LEN)
    return ArpFrame(
        eth_dst=MacAddr(dst), eth_src=MacAddr(src), opcode=op,
        sha=MacAddr(sha), spa=IPv4Address(spa), tha=MacAddr(tha), tpa=IPv4Address(tpa),
        htype=htype, ptype=ptype, hlen=hlen, plen=plen,
    )


def serialize_frame(frame: ArpFrame) -> bytes:
    return _ETH.pack(frame.eth_dst.octets, frame.eth_src.octets, ETHERTYPE_ARP) + _ARP.pack(
        frame.htype, frame.ptype, frame.hlen, frame.plen, frame.opcode,
        frame.sha.octets, frame.spa.packed, frame.tha.octets, frame.tpa.packed,
    )


def is_malformed(frame: ArpFrame) -> bool:
    """True if an immutable header field is off-standard or the Ethernet
    source disagrees with the ARP sender hardware address."""
    return (
        frame.htype != HTYPE_ETHERNET
        or frame.ptype != PTYPE_IPV4
        or frame.hlen != HLEN_ETHERNET
        or frame.plen != PLEN_IPV4
        or frame.opcode not in (OP_REQUEST, OP_REPLY)
        or frame.eth_src != frame.sha
    )


def is_unicast_request(frame: ArpFrame) -> bool:
    # only meaningful for requests; the engine never asks about replies
    return not frame.eth_dst.is_broadcast


def is_gratuitous(frame: ArpFrame) -> bool:
    return frame.spa == frame.tpa
