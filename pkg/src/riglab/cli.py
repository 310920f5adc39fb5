"""Command-line entry point ``rig-lab``.

    rig-lab complexity|coverage|rates --config PATH [--out PATH] [--seed U64] [--threads K]

Exit codes: 0 success, 1 configuration error, 2 I/O failure, 3 numeric failure.
CSV goes to ``--out``, else the config's ``output_path``, else stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from riglab.errors import InvalidInputError, NumericError
from riglab.experiments import EXPERIMENTS, load_config, run_experiment, to_csv, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("riglab")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def _check_no_nan(result) -> None:
    for row in result.rows:
        if any(isinstance(v, float) and v != v for v in row):
            raise NumericError(f"NaN in output row {row}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rig-lab", description="Relative information gain experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", help="CSV output path (default: config output_path, else stdout)")
    p.add_argument("--seed", type=_u64, help="override master_seed")
    p.add_argument("--threads", type=_positive, help="worker threads (default: CPU count)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="rig-lab: %(message)s")
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    except InvalidInputError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    if cfg.experiment != args.experiment:
        log.error("config is for %r, not %r", cfg.experiment, args.experiment)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed,
                                  noise=dataclasses.replace(cfg.noise, seed=args.seed))
    threads = args.threads or os.cpu_count() or 1

    try:
        result = run_experiment(cfg, threads)
        _check_no_nan(result)
    except (NumericError, np.linalg.LinAlgError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except InvalidInputError as exc:
        log.error("invalid parameters: %s", exc)
        return EXIT_CONFIG

    for key, value in result.summary.items():
        log.info("%s: %s", key, value)
    out = args.out or cfg.output_path
    try:
        if out:
            write_csv(result, out)
        else:
            sys.stdout.write(to_csv(result))
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
