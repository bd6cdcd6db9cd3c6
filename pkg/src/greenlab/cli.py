"""Command line entry point: ``greenlab run|catalog|check``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import report
from .errors import ConfigError
from .manifold import catalog

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def parse_inline_manifold(text: str) -> dict:
    """Inline JSON, or the short form ``type:key=value,key=value``."""
    text = text.strip()
    if text.startswith("{"):
        try:
            value = json.loads(text)
        except json.JSONDecodeError as exc:
            raise report.ParseError(f"--manifold: {exc.msg} at column {exc.colno}") from None
        if not isinstance(value, dict):
            raise report.ParseError("--manifold: expected a JSON object")
        return value
    kind, _, rest = text.partition(":")
    cfg: dict = {"type": kind}
    for item in filter(None, rest.split(",")):
        key, sep, raw = item.partition("=")
        if not sep:
            raise report.ParseError(f"--manifold: expected key=value, got {item!r}")
        try:
            cfg[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            cfg[key.strip()] = raw
    return cfg


def _print_summary(summary: report.RunSummary) -> None:
    for m in summary.manifolds:
        print(m["label"])
        for rep in m["reports"]:
            mark = "PASS" if rep.verdict else "FAIL"
            print(f"  {mark}  {rep.name:22s} max_violation={rep.max_violation:.3e} tol={rep.tolerance_used:.1e}")
            for note in rep.notes:
                print(f"        {note}")
    print(f"wall time {summary.wall_time:.2f}s, exit {summary.exit_code}")


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = report.parse_config(text)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = report.run(cfg, out_dir=args.out, fmt=args.format, jobs=args.jobs)
    if not args.quiet:
        _print_summary(summary)
    return summary.exit_code


def cmd_catalog(args) -> int:
    print(json.dumps(catalog(), indent=2))
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        mcfg = parse_inline_manifold(args.manifold)
        # reuse the config validator for the manifold and the check id
        report.parse_config(json.dumps({"manifold": mcfg, "checks": [args.id]}))
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep = report.run_single(args.id, mcfg)
    print(report.dumps(rep.to_dict()), end="")
    return EXIT_OK if rep.verdict else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greenlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the checks listed in a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    p.add_argument("--format", choices=report.FORMATS, default=None)
    p.add_argument("--jobs", type=int, default=1, help="worker processes across manifolds")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("catalog", help="list catalog entries")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("check", help="run one check on one manifold")
    p.add_argument("id", help="check id, e.g. assumption")
    p.add_argument("--manifold", required=True, help='JSON object or short form, e.g. "cone:n=4,a=0.5"')
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    if "GREENLAB_SEED" in os.environ:
        print("error: GREENLAB_SEED is set, but greenlab uses no randomness; unset it", file=sys.stderr)
        return EXIT_CONFIG
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
