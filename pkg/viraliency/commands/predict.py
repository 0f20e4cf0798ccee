"""
`predict`: score labelled pairs with a trained checkpoint.
"""
import argparse
from pathlib import Path

from viraliency.commands.common import ensure_dir
from viraliency.core.logging import get_run_logger
from viraliency.services.checkpoint import load_checkpoint
from viraliency.services.csv_io import format_float, write_accuracy_csv, write_predictions_csv
from viraliency.services.dataset import PairDataset
from viraliency.services.siamese import correct_mask
from viraliency.services.trainer import evaluate_pairs

logger = get_run_logger(__name__)

PREDICTIONS_FILE = "predictions.csv"
ACCURACY_FILE = "accuracy.csv"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "predict",
        help="Per-pair logits and pairwise accuracy",
        description="Write predictions.csv (one row per pair) and accuracy.csv.",
    )
    parser.add_argument("--checkpoint", required=True, help="Trained checkpoint")
    parser.add_argument("--pairs", required=True, help="Pairs CSV (id_a,id_b,label)")
    parser.add_argument("--dataset-dir", required=True, help="Directory holding images/")
    parser.add_argument("--side-maps-dir", default=None, help="Directory of <id>.npy side maps")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    config = model.config
    dataset = PairDataset.from_csv(
        args.pairs,
        args.dataset_dir,
        args.side_maps_dir,
        expected_shape=(config.input_channels, config.input_height, config.input_width),
    )
    evaluation = evaluate_pairs(model, dataset)
    correct = correct_mask(evaluation.logits, evaluation.targets)

    out_dir = ensure_dir(Path(args.out))
    write_predictions_csv(
        out_dir / PREDICTIONS_FILE,
        (
            [pair.id_a, pair.id_b, pair.label.value, format_float(logit), int(ok)]
            for pair, logit, ok in zip(dataset.pairs, evaluation.logits, correct)
        ),
    )
    write_accuracy_csv(out_dir / ACCURACY_FILE, len(dataset), evaluation.correct, evaluation.accuracy)
    logger.info(
        "Predictions written",
        pairs=len(dataset),
        correct=evaluation.correct,
        accuracy=evaluation.accuracy,
        out=str(out_dir),
    )
    return 0
