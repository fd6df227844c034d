"""Command-line front end: analyze, simulate, check, bench.

Exit codes follow a scriptable contract: 0 success/certified, 1 input
errors, 2 analysis outcomes that do not certify (non-stable terminals,
condition violations, benchmark diffs), 3 resource limits exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import bounds as bounds_mod
from . import verify as verify_mod
from .corpus import default_corpus
from .protocol import ProtocolError, parse_protocol
from .stagegraph import StageLimitError, build_stage_graph, to_dot, to_json_dict


def _read_protocol(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_protocol(fh.read())
    except FileNotFoundError:
        print(f"error: no such file: {path}", file=sys.stderr)
        raise SystemExit(1)
    except ProtocolError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        raise SystemExit(1)


def _analysis_json(sg, report) -> str:
    payload = {"report": report.json_dict(), "stage_tree": to_json_dict(sg)}
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def cmd_analyze(args) -> int:
    p = _read_protocol(args.protocol)
    t0 = time.monotonic()
    try:
        sg = build_stage_graph(p, max_stages=args.max_stages, timeout=args.timeout)
    except StageLimitError as exc:
        print(f"analysis aborted: {exc}", file=sys.stderr)
        return 3
    report = bounds_mod.aggregate(sg, time.monotonic() - t0)
    print(report.human())
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(to_dot(sg))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(_analysis_json(sg, report))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(
                "protocol,states,transitions,stages,bound,claim,time\n"
                + report.csv_row()
                + "\n"
            )
    return 0 if report.certified else 2


def _parse_config(p, spec: str):
    counts: dict[str, int] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ProtocolError(f"bad configuration entry {part!r}")
        name, num = (x.strip() for x in part.split("=", 1))
        if name not in p.states:
            raise ProtocolError(f"unknown state name {name!r}")
        counts[name] = counts.get(name, 0) + int(num)
    vec = [0] * len(p.states)
    for name, k in counts.items():
        vec[p.states.index(name)] = k
    from .protocol import Configuration

    return Configuration(tuple(vec))


def cmd_simulate(args) -> int:
    p = _read_protocol(args.protocol)
    try:
        c0 = _parse_config(p, args.config)
    except (ProtocolError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.trials > 0 and c0.size < 2:
        print("error: configuration needs at least two agents", file=sys.stderr)
        return 1
    print(f"protocol: {p.name}; configuration: {c0.counts}; seed: {args.seed}")
    print("trials,mean_interactions,stderr,consensus0,consensus1")
    if args.trials == 0:
        return 0
    try:
        res = verify_mod.simulate(p, c0, args.trials, args.seed)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    h0 = sum(1 for x in res.consensus if x == 0)
    h1 = sum(1 for x in res.consensus if x == 1)
    print(f"{res.trials},{res.mean:.4f},{res.stderr:.4f},{h0},{h1}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("trial,interactions,consensus\n")
            for i, (s, c) in enumerate(zip(res.steps, res.consensus)):
                fh.write(f"{i},{s},{'' if c is None else c}\n")
    return 0


def cmd_check(args) -> int:
    p = _read_protocol(args.protocol)
    try:
        sg = build_stage_graph(p, max_stages=args.max_stages, timeout=args.timeout)
    except StageLimitError as exc:
        print(f"analysis aborted: {exc}", file=sys.stderr)
        return 3
    try:
        violations = verify_mod.check_stage_graph(p, sg, args.max_n)
    except verify_mod.ExplorationLimitError as exc:
        print(f"partial verification: {exc}", file=sys.stderr)
        return 3
    if args.max_n < 2:
        print("0 violations (vacuous)")
        return 0
    if not violations:
        print(f"0 violations (sizes 2..{args.max_n})")
        return 0
    print(f"{len(violations)} violations (sizes 2..{args.max_n})")
    for v in violations:
        print(f"  {v}")
    return 2


def _bench_row(entry, timeout: float):
    p = entry.protocol()
    t0 = time.monotonic()
    try:
        sg = build_stage_graph(p, timeout=timeout)
    except StageLimitError:
        return entry, None, None, time.monotonic() - t0
    dt = time.monotonic() - t0
    report = bounds_mod.aggregate(sg, dt)
    return entry, sg, report, dt


def cmd_bench(args) -> int:
    entries = default_corpus()
    threads = max(1, int(os.environ.get("STAGEBOUND_THREADS", "1")))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda e: _bench_row(e, args.timeout), entries))
    else:
        rows = [_bench_row(e, args.timeout) for e in entries]

    header = "protocol,states,transitions,stages,bound,claim,time"
    out_lines = [header]
    diff_failures = 0
    for entry, sg, report, dt in rows:
        if report is None:
            out_lines.append(f"{entry.name},,,,T/O,,{dt:.3f}")
            continue
        out_lines.append(report.csv_row())
        if args.diff:
            expect_stages = entry.known_stage_deviation or entry.expected_stages
            bad = []
            if report.overall != entry.expected_bound:
                bad.append(
                    f"bound {report.overall.label} != {entry.expected_bound.label}"
                )
            if report.stage_count != expect_stages:
                bad.append(f"stages {report.stage_count} != {expect_stages}")
            if entry.known_stage_deviation is not None:
                out_lines.append(
                    f"# note: {entry.name} reconstruction yields "
                    f"{entry.known_stage_deviation} stages; reference table says "
                    f"{entry.expected_stages}"
                )
            if bad:
                diff_failures += 1
                out_lines.append(f"# DIFF {entry.name}: " + "; ".join(bad))
    text = "\n".join(out_lines) + "\n"
    print(text, end="")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 2 if diff_failures else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stagebound",
        description=(
            "Stage-graph analysis of population protocols: parametric bounds "
            "on the expected number of interactions to stable consensus."
        ),
    )
    sub = ap.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="build the stage tree and report a bound")
    pa.add_argument("protocol")
    pa.add_argument("--dot", metavar="PATH")
    pa.add_argument("--json", metavar="PATH")
    pa.add_argument("--csv", metavar="PATH")
    pa.add_argument("--max-stages", type=int, default=100_000)
    pa.add_argument("--timeout", type=float, default=1000.0)
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", help="Monte Carlo runs to stable consensus")
    ps.add_argument("protocol")
    ps.add_argument("--config", required=True, metavar="SPEC", help="e.g. A=5,B=3")
    ps.add_argument("--trials", type=int, default=1000)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--csv", metavar="PATH")
    ps.set_defaults(func=cmd_simulate)

    pc = sub.add_parser("check", help="validate stage conditions on small sizes")
    pc.add_argument("protocol")
    pc.add_argument("--max-n", type=int, default=6)
    pc.add_argument("--max-stages", type=int, default=100_000)
    pc.add_argument("--timeout", type=float, default=1000.0)
    pc.set_defaults(func=cmd_check)

    pb = sub.add_parser("bench", help="run the bundled benchmark corpus")
    pb.add_argument("--csv", metavar="PATH")
    pb.add_argument("--diff", action="store_true")
    pb.add_argument("--timeout", type=float, default=1000.0)
    pb.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
