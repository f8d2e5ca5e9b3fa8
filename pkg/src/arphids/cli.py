"""Command-line front end.

    arphids simulate SCENARIO   run a scenario file, check its EXPECT lines
    arphids matrix              run the built-in completeness case matrix
    arphids replay TRACE        feed recorded frames to a headless detector
    arphids example             rebuild the four tables of the worked example

Exit codes: 0 success, 1 failed expectation or golden mismatch, 2 bad input
or configuration.
"""

from __future__ import annotations

import argparse
import sys
from ipaddress import IPv4Address
from typing import List, Optional, TextIO

from .arp_model import MacAddr
from .engine import Engine, FrameIn, FrameOut, Mode, Verdict, replay
from .lan_sim.cases import (
    EXAMPLE_HOSTS, TABLE_TITLES, example_scenario, golden_rows, run_matrix, table_rows,
)
from .lan_sim.scenario import Direction, ScenarioParseError, parse_scenario, parse_trace
from .lan_sim.simulator import SimReport, expectation_met, run_scenario
from .state_tables import EngineConfig

REPLAY_NOTE = """\
Replay runs a detector with no simulated peers: probes are sent but nobody
answers them, so SPOOFED verdicts can only come from a conflicting pending
verification or from a mismatch with an authenticated binding."""


def _config(args) -> EngineConfig:
    return EngineConfig(t_req=args.t_req_ms, t_resp=args.t_resp_ms, delta=args.delta_ms,
                        dos_th=args.dos_th, hids_ip=args.hids_ip, hids_mac=args.hids_mac)


def format_verdict(v: Verdict, fmt: str) -> str:
    if fmt == "lines":
        return v.line()
    return f"{v.at:>8} ms  {v.kind.value:<10} {str(v.ip):<15} {v.mac}  ({v.trigger.value})"


def _print_report(report: SimReport, fmt: str, out: TextIO) -> None:
    if fmt == "lines":
        print("\n".join(report.lines()), file=out)
        return
    print("verdicts:", file=out)
    for v in report.verdicts:
        print("  " + format_verdict(v, fmt), file=out)
    if not report.verdicts:
        print("  (none)", file=out)
    print(f"traffic: {report.frames_total} ARP frames on the wire, {report.frames_engine} from "
          f"the detector ({report.probes_sent} probes, {report.probe_replies} probe replies)", file=out)
    print("tables:", file=out)
    for row in report.table_snapshot:
        print("  " + row, file=out)


def cmd_simulate(path: str, cfg: EngineConfig, mode: Mode = Mode.WINDOW,
                 fmt: str = "human", out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        with open(path) as fh:
            scenario = parse_scenario(fh.read(), name=path)
    except ScenarioParseError as e:
        print(f"{path}: {e}", file=err)
        return 2
    except OSError as e:
        print(f"{path}: {e.strerror}", file=err)
        return 2
    report = run_scenario(scenario, cfg, mode)
    _print_report(report, fmt, out)
    ok = True
    for e in scenario.expected:
        met = expectation_met(e, report.verdicts)
        ok = ok and met
        status = "ok" if met else "FAIL"
        if fmt == "lines":
            print(f"EXPECT {status} {e.by} {e.kind.value} {e.ip} {e.mac}", file=out)
        else:
            print(f"expect [{status:>4}] {e.kind.value} {e.ip} {e.mac} by {e.by} ms", file=out)
    return 0 if ok else 1


def cmd_matrix(cfg: EngineConfig, mode: Mode = Mode.WINDOW, fmt: str = "human",
               out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    rows = run_matrix(cfg, mode)
    width = max(len(r.name) for r in rows)
    for r in rows:
        status = "pass" if r.passed else "FAIL"
        note = "known miss" if r.known_miss else ""
        if fmt == "lines":
            name = r.name.replace(" ", "/")
            print(f"CASE {name} {r.expected} {r.observed} {status}" + (" known-miss" if note else ""),
                  file=out)
        else:
            print(f"{r.name:<{width}}  expect {r.expected:<26} got {r.observed:<26} {status}  {note}".rstrip(),
                  file=out)
    failed = sum(not r.passed for r in rows)
    summary = f"{len(rows) - failed}/{len(rows)} cases pass"
    print(f"SUMMARY {summary}" if fmt == "lines" else summary, file=out)
    return 0 if failed == 0 else 1


def cmd_replay(path: str, cfg: EngineConfig, mode: Mode = Mode.WINDOW, fmt: str = "human",
               out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        with open(path) as fh:
            trace = parse_trace(fh.read())
    except ScenarioParseError as e:
        print(f"{path}: {e}", file=err)
        return 2
    except OSError as e:
        print(f"{path}: {e.strerror}", file=err)
        return 2
    events = [FrameIn(i.frame, i.t) if i.direction is Direction.IN else FrameOut(i.frame, i.t)
              for i in trace]
    for v in replay(Engine(cfg, mode=mode), events):
        print(format_verdict(v, fmt), file=out)
    return 0


def _letter(address: str) -> str:
    for name, h in EXAMPLE_HOSTS.items():
        if address in (str(h.ip), str(h.mac)):
            return name
    return "?"


def cmd_example(cfg: Optional[EngineConfig] = None, mode: Mode = Mode.WINDOW, fmt: str = "human",
                out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    report = run_scenario(example_scenario(), cfg, mode)
    rows = table_rows(report.table_snapshot)
    match = rows == golden_rows()
    if fmt == "lines":
        for row in report.table_snapshot:
            print(f"TABLE {row}", file=out)
        print(f"GOLDEN {'match' if match else 'mismatch'}", file=out)
    else:
        headers = {"RQT": ("DST IP",), "RST": ("SRC IP", "SRC MAC"), "VRFT": ("IP", "MAC"),
                   "AUTHT": ("IP", "MAC")}
        for table, title in TABLE_TITLES.items():
            print(title, file=out)
            print("  " + "  ".join(f"{h:<8}" for h in headers[table]).rstrip(), file=out)
            if not rows[table]:
                print("  -", file=out)
            for r in rows[table]:
                kinds = ("IP", "MAC")
                cells = [f"{kinds[i]} {_letter(x)}" for i, x in enumerate(r)]
                print("  " + "  ".join(f"{c:<8}" for c in cells) + "  (" + " ".join(r) + ")", file=out)
            print(file=out)
        print("golden tables: " + ("match" if match else "MISMATCH"), file=out)
    return 0 if match else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    defaults = EngineConfig()
    common.add_argument("--t-req-ms", type=int, default=defaults.t_req,
                        help="request/reply round-trip bound and probe window (default %(default)s)")
    common.add_argument("--t-resp-ms", type=int, default=defaults.t_resp,
                        help="lifetime of response-table rows (default %(default)s)")
    common.add_argument("--delta-ms", type=int, default=defaults.delta,
                        help="unsolicited-reply window (default %(default)s)")
    common.add_argument("--dos-th", type=int, default=defaults.dos_th,
                        help="unsolicited replies tolerated inside the window (default %(default)s)")
    common.add_argument("--hids-ip", type=IPv4Address, default=defaults.hids_ip,
                        help="protected host IP for replay (simulate takes it from the first HOST)")
    common.add_argument("--hids-mac", type=MacAddr.parse, default=defaults.hids_mac,
                        help="protected host MAC for replay")
    common.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.WINDOW.value,
                        help="responses the spoof check considers (default %(default)s)")
    common.add_argument("--format", choices=["human", "lines"], default="human", dest="fmt")

    parser = argparse.ArgumentParser(prog="arphids", description="Active host-based ARP attack detector.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="run a scenario file")
    p.add_argument("path")
    sub.add_parser("matrix", parents=[common], help="run the completeness case matrix")
    p = sub.add_parser("replay", parents=[common], help="replay a trace of INJECT lines",
                       description=REPLAY_NOTE, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("path")
    sub.add_parser("example", parents=[common], help="rebuild the worked example's tables")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
    except ValueError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2
    mode = Mode(args.mode)
    if args.command == "simulate":
        return cmd_simulate(args.path, cfg, mode, args.fmt)
    if args.command == "matrix":
        return cmd_matrix(cfg, mode, args.fmt)
    if args.command == "replay":
        return cmd_replay(args.path, cfg, mode, args.fmt)
    return cmd_example(cfg, mode, args.fmt)


if __name__ == "__main__":
    sys.exit(main())
