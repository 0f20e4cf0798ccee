"""
`sweep`: eta initialisation sensitivity.

One training run per --etas value with the same seed and data; sweep.csv holds
test accuracy, mean final eta and the final eta histogram of each run.
"""
import argparse
from pathlib import Path
from typing import List

import numpy as np

from viraliency.commands.common import add_run_config_flags, ensure_dir, resolve_run_config, resolve_threads
from viraliency.commands.train import load_pairs
from viraliency.core.exceptions import ConfigError
from viraliency.core.logging import get_run_logger
from viraliency.services.csv_io import format_float, write_sweep_csv
from viraliency.services.trainer import DEFAULT_SWEEP, eta_sensitivity_sweep

logger = get_run_logger(__name__)

SWEEP_FILE = "sweep.csv"


def _eta_list(raw: str) -> List[float]:
    try:
        values = [float(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}")
    if not values or any(not 0.0 <= v <= 1.0 for v in values):
        raise argparse.ArgumentTypeError(f"eta values must lie in [0, 1], got {raw!r}")
    return values


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "sweep",
        help="Train once per initial eta and compare",
        description="Write sweep.csv: eta_init, accuracy, eta_mean and final eta histogram bins.",
    )
    add_run_config_flags(parser)
    parser.add_argument(
        "--etas",
        type=_eta_list,
        default=list(DEFAULT_SWEEP),
        help="Comma-separated initial eta values (default: 0.0,0.1,...,1.0)",
    )
    parser.add_argument("--bins", type=int, default=10, help="Histogram bins (default: 10)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.bins < 1:
        raise ConfigError(f"--bins must be >= 1, got {args.bins}")
    config = resolve_run_config(args)
    threads = resolve_threads(config.threads)
    train_set = load_pairs(config, config.paths.train_pairs)
    test_set = load_pairs(config, config.paths.test_pairs)

    rows = eta_sensitivity_sweep(
        train_set,
        test_set,
        config.model,
        config.train,
        eta_inits=args.etas,
        threads=threads,
        bins=args.bins,
    )
    out_dir = ensure_dir(Path(config.paths.output_dir))
    out = write_sweep_csv(
        out_dir / SWEEP_FILE,
        (
            [format_float(r.eta_init), format_float(r.accuracy), format_float(float(np.mean(r.final_etas)))]
            + [int(c) for c in r.histogram]
            for r in rows
        ),
        args.bins,
    )
    best = max(rows, key=lambda r: r.accuracy)
    logger.info("Sweep written", out=str(out), runs=len(rows), best_eta_init=best.eta_init, best_accuracy=best.accuracy)
    return 0
