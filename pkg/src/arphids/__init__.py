"""Host-based active detection of ARP spoofing, ARP DoS and malformed ARP."""

from .arp_model import ArpFrame, MacAddr, NotArp, ParseError, TooShort, parse_frame, serialize_frame
from .engine import (
    Deferred, Engine, FrameIn, FrameOut, Mode, OutOfOrderEvent, ProbeCheck, Trigger,
    Verdict, VerdictKind, replay,
)
from .state_tables import EngineConfig, StateTables

__version__ = "0.1.0"
