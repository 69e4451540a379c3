"""Command line: run scenarios, audit traces, canonicalize laws."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .law import load_law, pretty_print
from .simnet.checks import CHECKS, check_trace
from .simnet.network import ScenarioError
from .simnet.scenario import load_scenario, run_scenario
from .simnet.trace import Trace
from .search import SearchError
from .support import SupportError
from .terms import TermError


def _suite(text: str):
    if text == "all":
        return "all"
    names = [n.strip() for n in text.split(",") if n.strip()]
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown checks: {', '.join(unknown)} (known: {', '.join(CHECKS)})")
    return names


def _emit(report, trace, args) -> int:
    sys.stdout.write(report.to_tsv())
    if getattr(args, "details", False) and not report.ok:
        sys.stderr.write(report.details())
    if getattr(args, "figures", None):
        from .report import write_report

        for p in write_report(report, trace, args.figures):
            print(f"wrote {p}", file=sys.stderr)
    return 0 if report.ok else 1


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    trace = run_scenario(scenario, seed=args.seed, transport=args.transport)
    if args.trace:
        trace.save(args.trace)
        print(f"trace: {len(trace)} entries -> {args.trace}", file=sys.stderr)
    else:
        sys.stdout.write(trace.dumps())
        return 0
    return _emit(check_trace(trace, args.suite), trace, args)


def cmd_check(args) -> int:
    trace = Trace.load(args.trace)
    return _emit(check_trace(trace, args.suite), trace, args)


def cmd_fmt(args) -> int:
    path = Path(args.law)
    law = load_law(path)
    text = pretty_print(law)
    if args.write:
        path.write_text(text, encoding="utf-8")
    elif args.check:
        if path.read_text(encoding="utf-8") != text:
            print(f"{path}: not in canonical form", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    print(f"{law.name}: {len(law.rules)} rules, hash {law.hash}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lgiosc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log law diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a scenario file")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--trace", help="write the trace here and print the check report")
    r.add_argument("--transport", choices=("sim", "socket"), default="sim")
    r.add_argument("--suite", type=_suite, default="all")
    r.add_argument("--figures", metavar="DIR", help="also write report files and figures")
    r.add_argument("--details", action="store_true", help="list offending entries on stderr")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="audit a trace file")
    c.add_argument("trace")
    c.add_argument("--suite", type=_suite, default="all", help="all, or a comma-separated list of checks")
    c.add_argument("--figures", metavar="DIR", help="write report.tsv, violations.tsv and PNG figures")
    c.add_argument("--details", action="store_true", help="list offending entries on stderr")
    c.set_defaults(func=cmd_check)

    f = sub.add_parser("fmt", help="validate and canonicalize a law file")
    f.add_argument("law")
    g = f.add_mutually_exclusive_group()
    g.add_argument("--write", action="store_true", help="rewrite the file in place")
    g.add_argument("--check", action="store_true", help="exit 1 if the file is not canonical")
    f.set_defaults(func=cmd_fmt)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, TermError, SearchError, SupportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
