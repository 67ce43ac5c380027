"""Command line interface.

    eigenflow <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--threads <k>]

Subcommands: converge, residual, holder, collisions, dyson, limit.
``--config`` accepts either a config file or a previously written
``run_manifest.json`` (the embedded canonical config is replayed).
``--seed`` overrides the config seed; the EIGENFLOW_OUT environment
variable overrides the configured output directory and is itself
overridden by ``--out``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, parse_config
from .eigensolvers import EigenConvergenceError
from .limitlaw import BurgersError
from .runner import SUBCOMMANDS, RunUsageError, run
from .sampling import FactorizationError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

OUTPUT_ENV_VAR = "EIGENFLOW_OUT"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigenflow",
        description="Spectral-measure flows of Gaussian matrix processes: "
                    "simulation, limit laws and verification experiments.")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="config file (or run_manifest.json to replay)")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    return parser


def _load_config_text(path: str) -> str:
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if path.endswith(".json") or stripped.startswith("{"):
        manifest = json.loads(text)
        try:
            return manifest["canonical_config"]
        except (TypeError, KeyError):
            raise ConfigError([f"{path}: JSON file is not a run manifest "
                               "(missing 'canonical_config')"]) from None
    return text


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK

    try:
        text = _load_config_text(args.config)
        cfg = parse_config(text)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out_dir = args.out or os.environ.get(OUTPUT_ENV_VAR)
        written = run(cfg, args.subcommand, out_dir=out_dir, threads=max(1, args.threads))
    except (ConfigError, RunUsageError, json.JSONDecodeError) as exc:
        print(f"eigenflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EigenConvergenceError, BurgersError, FactorizationError,
            FloatingPointError) as exc:
        print(f"eigenflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"eigenflow: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    for name in written:
        print(name)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
