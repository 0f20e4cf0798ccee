"""
`synth`: generate the planted-signal dataset on disk.
"""
import argparse
from pathlib import Path

from viraliency.commands.common import add_model_flags, overrides_from_args
from viraliency.core.logging import get_run_logger
from viraliency.schemas.data import SynthSpec
from viraliency.services.synthetic import generate_synthetic, write_dataset

logger = get_run_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "synth",
        help="Generate a synthetic planted-signal dataset",
        description="Write images/, masks/, metadata.csv and train/test pair CSVs.",
    )
    parser.add_argument("--out", required=True, help="Output dataset directory")
    add_model_flags(parser, SynthSpec)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    spec = SynthSpec.model_validate(overrides_from_args(args, SynthSpec))
    dataset = generate_synthetic(spec)
    out_dir = write_dataset(dataset, Path(args.out))
    logger.info(
        "Synthetic dataset written",
        out=str(out_dir),
        images=len(dataset.ids),
        viral=int(dataset.viral.sum()),
        train_pairs=len(dataset.pairs.train),
        test_pairs=len(dataset.pairs.test),
    )
    return 0
