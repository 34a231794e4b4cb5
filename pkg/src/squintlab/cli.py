"""``squintlab`` command line: one subcommand per experiment family.

Exit status is 0 on success, 2 for configuration problems and 1 for any
other failure.  A one-line JSON summary goes to stdout in every case.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .config import SCHEMES, load_config, shipped_config
from .exceptions import ConfigurationError

EXPERIMENTS = {
    "convergence": lambda cfg, out, threads: harness.run_convergence(cfg, out),
    "gain-vs-freq": lambda cfg, out, threads: harness.run_gain_vs_frequency(cfg, out),
    "rate-vs-snr": harness.run_rate_vs_snr,
    "rate-vs-bw": harness.run_rate_vs_bandwidth,
    "optimize-layout": lambda cfg, out, threads: harness.run_optimize_layout(cfg, out),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _schemes(text: str):
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in items if s not in SCHEMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown schemes {bad}; choose from {list(SCHEMES)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="squintlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("validate-config", *EXPERIMENTS):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON or TOML scenario file (default: shipped default)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--schemes", type=_schemes, help="comma separated subset of " + ",".join(SCHEMES))
        p.add_argument("--threads", type=int, default=1, help="worker processes (SQUINTLAB_THREADS wins)")
    return parser


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True, default=str))


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    command = argv[0] if argv else None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        if args.seed is not None and args.seed < 0:
            raise ConfigurationError("--seed must be nonnegative")
        path = Path(args.config) if args.config else shipped_config("default")
        cfg = load_config(path).with_overrides(seed=args.seed, schemes=args.schemes)
        threads = harness.resolve_threads(args.threads)
    except ConfigurationError as exc:
        print(f"squintlab: config error: {exc}", file=sys.stderr)
        _emit({"command": command, "status": "config_error", "error": str(exc)})
        return 2
    except ValueError as exc:  # e.g. a non-integer SQUINTLAB_THREADS
        print(f"squintlab: config error: {exc}", file=sys.stderr)
        _emit({"command": command, "status": "config_error", "error": str(exc)})
        return 2

    if command == "validate-config":
        _emit({"command": command, "status": "ok", "config": str(path), "seed": cfg.seeds.base})
        return 0
    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = EXPERIMENTS[command](cfg, out, threads)
    except ConfigurationError as exc:
        print(f"squintlab: config error: {exc}", file=sys.stderr)
        _emit({"command": command, "status": "config_error", "error": str(exc)})
        return 2
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        print(f"squintlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        _emit({"command": command, "status": "error", "error": f"{type(exc).__name__}: {exc}"})
        return 1
    _emit({"command": command, "status": "ok", "seed": cfg.seeds.base, "threads": threads, **result})
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
