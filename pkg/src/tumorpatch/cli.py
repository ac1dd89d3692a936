"""Command line entry point ``sim``.

    sim run <config.toml> [--out DIR] [--threads N]
    sim preset <name> [--out DIR] [--threads N]
    sim check <mode> [--out DIR] [--threads N]

Each command prints one JSON line per assertion and exits with 0 when all
pass, 1 when any fails, 2 on usage or configuration errors. ``SIM_OUT``
replaces the default output directory (an explicit ``--out`` still wins).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _limit_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise ValueError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _out_dir(arg: str | None, default: str) -> Path:
    if arg:
        return Path(arg)
    env = os.environ.get("SIM_OUT")
    return Path(env) if env else Path(default)


def build_parser() -> argparse.ArgumentParser:
    from .presets import CHECKS, PRESETS

    ap = argparse.ArgumentParser(prog="sim", description="Tumor patch growth simulations and checks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (default: SIM_OUT or out/<name>)")
        p.add_argument("--threads", type=int, help="cap on worker threads")

    p = sub.add_parser("run", help="run a TOML configuration")
    p.add_argument("config")
    common(p)
    p = sub.add_parser("preset", help=f"run a named scenario: {', '.join(PRESETS)}")
    p.add_argument("name")
    common(p)
    p = sub.add_parser("check", help=f"run a standalone check: {', '.join(CHECKS)}")
    p.add_argument("mode")
    common(p)
    return ap


def _report(asserts) -> int:
    for a in asserts:
        print(json.dumps(a.as_dict()))
    return EXIT_PASS if all(a.passed for a in asserts) else EXIT_FAIL


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from . import presets
    from .config import load_config
    from .errors import SchemaError

    try:
        _limit_threads(args.threads)
    except ValueError as exc:
        print(f"sim: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "run":
        try:
            cfg = load_config(args.config)
        except FileNotFoundError:
            print(f"sim: no such config file: {args.config}", file=sys.stderr)
            return EXIT_USAGE
        except SchemaError as exc:
            print(f"sim: config error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        out = Path(args.out) if args.out else Path(os.environ.get("SIM_OUT") or cfg.out_dir)
        return _report(presets.run_config(cfg, out))

    if args.command == "preset":
        if args.name not in presets.PRESETS:
            print(f"sim: unknown preset {args.name!r}; available: {', '.join(presets.PRESETS)}", file=sys.stderr)
            return EXIT_USAGE
        return _report(presets.run_preset(args.name, _out_dir(args.out, f"out/{args.name}")))

    if args.mode not in presets.CHECKS:
        print(f"sim: unknown check {args.mode!r}; available: {', '.join(presets.CHECKS)}", file=sys.stderr)
        return EXIT_USAGE
    return _report(presets.run_check(args.mode, _out_dir(args.out, f"out/check-{args.mode}")))


if __name__ == "__main__":
    sys.exit(main())
