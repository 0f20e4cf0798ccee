"""
`gradcheck`: compare analytic gradients with their oracles on a seeded sample.

Exits with GRADCHECK_FAILED (status 4) when any group exceeds its tolerance;
gradcheck.csv is written either way.
"""
import argparse
from pathlib import Path

from viraliency.commands.common import add_run_config_flags, ensure_dir, resolve_run_config
from viraliency.core.exceptions import ConfigError, GradCheckFailedError
from viraliency.core.logging import get_run_logger
from viraliency.services.csv_io import write_gradcheck_csv
from viraliency.services.gradcheck import (
    DEFAULT_STEP,
    DEFAULT_TOLERANCE,
    ETA_TOLERANCE,
    grad_check,
    jitter_off_kinks,
    random_pair_batch,
)
from viraliency.services.siamese import ViralityNet

logger = get_run_logger(__name__)

GRADCHECK_FILE = "gradcheck.csv"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "gradcheck",
        help="Check analytic gradients against finite differences",
        description="Seeded random pairs through a freshly initialised model; writes gradcheck.csv.",
    )
    add_run_config_flags(parser)
    parser.add_argument("--pairs", type=int, default=2, help="Random pairs in the sample (default: 2)")
    parser.add_argument(
        "--tolerance",
        type=float,
        default=DEFAULT_TOLERANCE,
        help=f"Max relative error for weights and biases (default: {DEFAULT_TOLERANCE})",
    )
    parser.add_argument(
        "--eta-tolerance",
        type=float,
        default=ETA_TOLERANCE,
        help=f"Max error of eta against its estimator (default: {ETA_TOLERANCE})",
    )
    parser.add_argument(
        "--step",
        type=float,
        default=DEFAULT_STEP,
        help=f"Central difference step (default: {DEFAULT_STEP})",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    for flag, value in (("--tolerance", args.tolerance), ("--eta-tolerance", args.eta_tolerance)):
        if not value >= 0.0:
            raise ConfigError(f"{flag} must be >= 0, got {value}")
    if not args.step > 0.0:
        raise ConfigError(f"--step must be > 0, got {args.step}")
    config = resolve_run_config(args)
    seed = config.train.seed
    model = ViralityNet.initialize(config.model, seed=seed)
    sample = jitter_off_kinks(model, random_pair_batch(config.model, args.pairs, seed), seed=seed)

    report = grad_check(
        model,
        sample,
        tolerance=args.tolerance,
        step=args.step,
        eta_tolerance=args.eta_tolerance,
    )
    out_dir = ensure_dir(Path(config.paths.output_dir))
    write_gradcheck_csv(out_dir / GRADCHECK_FILE, report.entries)

    worst = report.worst
    logger.info(
        "Gradient check finished",
        groups=len(report.entries),
        parameters=model.num_parameters,
        passed=report.passed,
        worst_group=worst.group if worst else None,
    )
    if not report.passed:
        raise GradCheckFailedError(worst.group, worst.max_rel_error, worst.tolerance)
    return 0
