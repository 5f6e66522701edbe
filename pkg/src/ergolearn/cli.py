"""Command line entry point: ``ergolearn <subcommand> --config cfg.json --out dir``.

Exit status is 0 on success.  Failures print one JSON object to stderr:
2 for an invalid config, 3 for filesystem errors, 4 for other errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, DomainError, InconsistentObservation
from .harness import (
    SchemaMismatch,
    atomic_write,
    load_config,
    load_summaries,
    report_csv,
    run,
    validate_config,
)

# subcommand -> experiment kinds it accepts (None: whatever the config says)
SUBCOMMANDS = {
    "run": None,
    "simulate": ("simulate",),
    "merge-report": ("merge", "dirac-witness"),
    "calibrate": ("calibrate",),
    "freq": ("freq",),
    "decide": ("decide",),
}

EXIT_CONFIG, EXIT_IO, EXIT_OTHER = 2, 3, 4


def parse_seeds(text: str) -> list[int]:
    """``"1-5,9"`` -> ``[1, 2, 3, 4, 5, 9]``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def _fail(kind: str, message: str, code: int, fields=None) -> int:
    payload = {"error": kind, "message": message}
    if fields is not None:
        payload["fields"] = [{"field": f, "message": m} for f, m in fields]
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergolearn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config_path", nargs="?", help="experiment config (same as --config)")
        p.add_argument("--config", dest="config", help="experiment config JSON")
        p.add_argument("--out", help="output directory (default: config 'output' or ./out)")
        p.add_argument("--seeds", help="seed list overriding the config, e.g. 1-20 or 1,4,9")
        p.add_argument("--quiet", action="store_true")
    p = sub.add_parser("report", help="consolidate summary.json files into one CSV table")
    p.add_argument("summaries", nargs="*")
    p.add_argument("--out", help="directory for report.csv (default: stdout)")
    p.add_argument("--quiet", action="store_true")
    return parser


def _run_experiment(args) -> int:
    path = args.config or args.config_path
    if not path:
        return _fail("usage", "a config path is required (--config)", EXIT_CONFIG, [("config", "is required")])
    try:
        cfg = load_config(path)
        if args.seeds:
            try:
                seeds = parse_seeds(args.seeds)
            except ValueError:
                raise ConfigError([("seeds", f"cannot parse --seeds {args.seeds!r}")]) from None
            raw = dict(cfg.raw, seeds=seeds)
            cfg = validate_config(raw)
        allowed = SUBCOMMANDS[args.command]
        if allowed is not None and cfg.kind not in allowed:
            raise ConfigError([("kind", f"{args.command} runs kinds {list(allowed)}, config has {cfg.kind!r}")])
    except ConfigError as exc:
        return _fail("validation", str(exc), EXIT_CONFIG, exc.errors)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)

    out = Path(args.out or cfg.output or "out")
    try:
        written = run(cfg, out)
    except ConfigError as exc:
        return _fail("validation", str(exc), EXIT_CONFIG, exc.errors)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except (DomainError, InconsistentObservation) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_OTHER)
    if not args.quiet:
        print(f"{cfg.kind}: wrote {len(written)} files to {out}", file=sys.stderr)
    return 0


def _report(args) -> int:
    try:
        text = report_csv(load_summaries(args.summaries))
    except SchemaMismatch as exc:
        return _fail("schema", str(exc), EXIT_CONFIG)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("io", str(exc), EXIT_IO)
    if args.out:
        try:
            atomic_write(Path(args.out) / "report.csv", text)
        except OSError as exc:
            return _fail("io", str(exc), EXIT_IO)
        if not args.quiet:
            print(f"report: {len(args.summaries)} summaries -> {Path(args.out) / 'report.csv'}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return _report(args)
    return _run_experiment(args)


if __name__ == "__main__":
    sys.exit(main())
