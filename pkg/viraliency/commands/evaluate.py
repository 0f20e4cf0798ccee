"""
`eval-local`: localization precision/recall of viraliency maps.

The images of the given pairs file are ranked by their virality score
(metadata.csv in the dataset directory); the --top most viral ones are mapped,
normalised, thresholded and compared with masks/<id>.png.
"""
import argparse
from pathlib import Path
from typing import Dict, List

from viraliency.commands.common import ensure_dir
from viraliency.core.exceptions import InsufficientDataError
from viraliency.core.logging import get_run_logger
from viraliency.schemas.evaluation import LocalizationScore
from viraliency.schemas.model import PoolingMode
from viraliency.services import image_io
from viraliency.services.activation_maps import activation_map, normalize_map
from viraliency.services.checkpoint import load_checkpoint
from viraliency.services.csv_io import (
    format_float,
    load_metadata_csv,
    load_pairs_csv,
    write_localization_csv,
)
from viraliency.services.dataset import ImageStore
from viraliency.services.localization import DEFAULT_THRESHOLD, localization_pr, mean_precision_recall
from viraliency.services.pooling import EtaVector
from viraliency.services.siamese import ETA_KEY, ViralityNet
from viraliency.services.synthetic import MASKS_DIR, METADATA_FILE
from viraliency.services.virality import score_records

logger = get_run_logger(__name__)

LOCALIZATION_FILE = "localization.csv"
DEFAULT_TOP = 50


def most_viral_ids(pairs_csv: Path, metadata_csv: Path, top: int) -> List[str]:
    """Distinct ids of the pairs file, highest virality first (ties by id)."""
    pair_ids = set()
    for pair in load_pairs_csv(pairs_csv):
        pair_ids.update((pair.id_a, pair.id_b))
    scores: Dict[str, float] = {s.id: s.virality for s in score_records(load_metadata_csv(metadata_csv))}
    missing = sorted(pair_ids - scores.keys())
    if missing:
        raise InsufficientDataError(f"{len(missing)} pair images have no metadata row (first: {missing[0]})")
    ranked = sorted(pair_ids, key=lambda image_id: (-scores[image_id], image_id))
    return ranked[:top]


def localize(
    model: ViralityNet,
    store: ImageStore,
    masks_dir: Path,
    image_id: str,
    mode: PoolingMode,
    threshold: float,
) -> LocalizationScore:
    features = model.features(store.image(image_id), store.side_maps(image_id))[0]
    vmap = activation_map(features, model.head_params(), 0, etas=EtaVector(model.params[ETA_KEY]), mode=mode)
    mask = image_io.load_mask(image_io.find_file(masks_dir, image_id, image_io.MASK_EXTENSIONS))
    return localization_pr(normalize_map(vmap), mask, threshold)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "eval-local",
        help="Localization precision/recall on the most viral images",
        description="Write localization.csv with one row per image and a final mean row.",
    )
    parser.add_argument("--checkpoint", required=True, help="Trained checkpoint")
    parser.add_argument("--dataset-dir", required=True, help="Directory holding images/, masks/, metadata.csv")
    parser.add_argument("--pairs", required=True, help="Pairs CSV whose images are evaluated")
    parser.add_argument("--side-maps-dir", default=None, help="Directory of <id>.npy side maps")
    parser.add_argument("--top", type=int, default=DEFAULT_TOP, help=f"Images evaluated (default: {DEFAULT_TOP})")
    parser.add_argument(
        "--threshold",
        type=float,
        default=DEFAULT_THRESHOLD,
        help=f"Threshold on the normalised map (default: {DEFAULT_THRESHOLD})",
    )
    parser.add_argument(
        "--mode",
        choices=[mode.value for mode in PoolingMode],
        default=None,
        help="Support sets to use (default: the checkpoint's pooling mode)",
    )
    parser.add_argument("--out", required=True, help="Output directory")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.top < 1:
        raise InsufficientDataError(f"--top must be >= 1, got {args.top}")
    model = load_checkpoint(args.checkpoint)
    mode = PoolingMode(args.mode) if args.mode else model.config.pooling_mode
    dataset_dir = Path(args.dataset_dir)
    config = model.config
    store = ImageStore(
        dataset_dir,
        args.side_maps_dir,
        expected_shape=(config.input_channels, config.input_height, config.input_width),
    )

    ids = most_viral_ids(Path(args.pairs), dataset_dir / METADATA_FILE, args.top)
    scores = [localize(model, store, dataset_dir / MASKS_DIR, image_id, mode, args.threshold) for image_id in ids]
    mean_p, mean_r = mean_precision_recall(scores)

    rows = [
        [image_id, format_float(s.precision), format_float(s.recall), s.outcome.value,
         format_float(s.threshold), s.pixels_evaluated]
        for image_id, s in zip(ids, scores)
    ]
    rows.append(["mean", format_float(mean_p), format_float(mean_r), "", format_float(args.threshold), ""])
    out_dir = ensure_dir(Path(args.out))
    write_localization_csv(out_dir / LOCALIZATION_FILE, rows)

    logger.info(
        "Localization evaluated",
        images=len(ids),
        mode=mode.value,
        threshold=args.threshold,
        mean_precision=mean_p,
        mean_recall=mean_r,
    )
    return 0
