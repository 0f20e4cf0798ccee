"""
`bench`: forward + backward wall time of each pooling mode.
"""
import argparse
from pathlib import Path
from typing import List

from viraliency.core.logging import get_run_logger
from viraliency.schemas.model import PoolingMode
from viraliency.services.bench import DEFAULT_CHANNELS, DEFAULT_SIZE, benchmark_pooling, overhead_ratio
from viraliency.services.csv_io import format_float, write_bench_csv

logger = get_run_logger(__name__)


def _int_list(raw: str) -> List[int]:
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {raw!r}")
    return values


def _mode_list(raw: str) -> List[PoolingMode]:
    try:
        return [PoolingMode(part.strip().upper()) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected modes among GAP,GMP,GNAP,LENA, got {raw!r}")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "bench",
        help="Time pooling forward + backward per mode",
        description="Write mode,channels,height,width,repeats,mean_ms rows.",
    )
    parser.add_argument(
        "--channels",
        type=_int_list,
        default=list(DEFAULT_CHANNELS),
        help="Comma-separated channel counts (default: 64,128,256,512)",
    )
    parser.add_argument("--size", type=int, default=DEFAULT_SIZE, help=f"Map height and width (default: {DEFAULT_SIZE})")
    parser.add_argument("--repeats", type=int, default=20, help="Timed repeats per row (default: 20)")
    parser.add_argument(
        "--modes",
        type=_mode_list,
        default=list(PoolingMode),
        help="Comma-separated pooling modes (default: all)",
    )
    parser.add_argument("--seed", type=int, default=0, help="Feature generator seed (default: 0)")
    parser.add_argument("--out", required=True, help="Bench CSV path")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    rows = benchmark_pooling(
        channels=args.channels,
        height=args.size,
        width=args.size,
        modes=args.modes,
        repeats=max(args.repeats, 1),
        seed=args.seed,
    )
    out = write_bench_csv(
        Path(args.out),
        ([r.mode, r.channels, r.height, r.width, r.repeats, format_float(r.mean_ms)] for r in rows),
    )
    for channels, ratio in sorted(overhead_ratio(rows).items()):
        logger.info("LENA overhead over GMP", channels=channels, ratio=ratio)
    logger.info("Benchmark written", out=str(out), rows=len(rows))
    return 0
