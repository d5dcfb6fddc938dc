"""Command-line entry point: ``gradterm <subcommand> [options]``.

Writes a JSON report (stable key order) to standard output or ``--out`` and
exits 0 iff every check passed or was marked hypothesis-not-met.  With
``--resolution-study`` the ratio rows go into the report data and, when
``--out`` is given, also to ``<out>.refinement.csv``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import __version__
from .suites import DEFAULTS, SUITES, ConfigError, resolution_rows, run_full, validate

SUBCOMMANDS = list(SUITES) + ["full-suite"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradterm", description="Verification suites for the gradient-term estimates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} suite")
        p.add_argument("--config", help="JSON file with suite parameters")
        p.add_argument("--out", help="write the report here instead of standard output")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--spacing", type=float, help="override the suite's grid spacing")
        p.add_argument("--resolution-study", action="store_true",
                       help="also run at half the spacing and write a CSV ratio table")
        p.add_argument("--no-time", action="store_true", help="omit the wall-time field")
    return parser


def _load_config(path):
    if path is None:
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from None


def _csv(rows) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _load_config(args.config)
        if args.command == "full-suite":
            report = run_full(raw, args.seed, args.spacing)
            rows = []
            if args.resolution_study:
                for name in SUITES:
                    cfg = validate(name, (raw or {}).get(name), f"config.{name}")
                    if "spacing" in cfg:
                        if args.spacing is not None:
                            cfg["spacing"] = args.spacing
                        rows += resolution_rows(name, cfg, args.seed)
        else:
            cfg = validate(args.command, raw)
            if args.spacing is not None:
                if "spacing" not in DEFAULTS[args.command]:
                    raise ConfigError(f"--spacing: {args.command} has no grid spacing")
                cfg["spacing"] = args.spacing
            report = SUITES[args.command](cfg, args.seed)
            rows = []
            if args.resolution_study:
                if "spacing" not in cfg:
                    raise ConfigError(f"--resolution-study: {args.command} has no grid spacing")
                rows = resolution_rows(args.command, cfg, args.seed)
    except ConfigError as exc:
        print(f"gradterm: malformed config: {exc}", file=sys.stderr)
        return 2
    if rows:
        report.data["refinement"] = rows
    text = report.to_json(include_time=not args.no_time) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        if rows:
            with open(args.out + ".refinement.csv", "w") as fh:
                fh.write(_csv(rows))
    else:
        sys.stdout.write(text)
    return 0 if report.passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
