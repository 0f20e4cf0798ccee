"""
`eta-hist`: histogram of one eta snapshot (default: the last row of eta.csv).
"""
import argparse
from pathlib import Path

from viraliency.core.exceptions import ConfigError
from viraliency.core.logging import get_run_logger
from viraliency.services.csv_io import load_eta_csv, write_histogram_csv
from viraliency.services.trainer import eta_histogram, extreme_vs_middle_mass

logger = get_run_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "eta-hist",
        help="Histogram of learned eta values",
        description="Write bin_lo,bin_hi,count,mass over equal bins of [0, 1].",
    )
    parser.add_argument("--eta-csv", required=True, help="eta.csv written by train")
    parser.add_argument("--bins", type=int, default=10, help="Number of bins (default: 10)")
    parser.add_argument(
        "--row",
        type=int,
        default=-1,
        help="Snapshot row, Python-style index (default: -1, the final snapshot)",
    )
    parser.add_argument("--out", required=True, help="Histogram CSV path")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.bins < 1:
        raise ConfigError(f"--bins must be >= 1, got {args.bins}")
    snapshots = load_eta_csv(args.eta_csv)
    try:
        etas = snapshots[args.row]
    except IndexError:
        raise ConfigError(f"--row {args.row} out of range for {len(snapshots)} snapshots")

    edges, counts = eta_histogram(etas, args.bins)
    out = write_histogram_csv(Path(args.out), edges, counts)
    extreme, middle = extreme_vs_middle_mass(etas)
    logger.info(
        "eta histogram written",
        out=str(out),
        channels=len(etas),
        extreme_mass=extreme,
        middle_mass=middle,
    )
    return 0
