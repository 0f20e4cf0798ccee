"""
Planted-signal dataset generator.

Viral images carry a coloured disc on a noisy grey background; non-viral images
are background only. Engagement metadata is drawn so that viral images score
high on V_i, and the truth mask of every image is its disc footprint (empty for
non-viral images). Everything is a pure function of SynthSpec.seed.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from viraliency.core.logging import get_run_logger
from viraliency.schemas.data import EngagementRecord, SynthSpec
from viraliency.services import csv_io, image_io
from viraliency.services.pairs import PairSplit, split_train_test
from viraliency.services.tensor import DTYPE
from viraliency.services.virality import score_records

logger = get_run_logger(__name__)

BACKGROUND_LEVEL = 0.35
SIDE_MAP_NOISE = 0.1

_BLOB_COLORS = {
    "white": (1.0, 1.0, 1.0),
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
}

# (low, high) inclusive integer ranges
_VIRAL_LIKES = (40, 80)
_VIRAL_RESUB = (40, 60)
_PLAIN_LIKES = (2, 10)
_PLAIN_RESUB = (1, 3)


@dataclass(frozen=True)
class Blob:
    center_y: float
    center_x: float
    radius: float


@dataclass(frozen=True)
class SyntheticDataset:
    """In-memory dataset; arrays are indexed like `ids`."""
    spec: SynthSpec
    ids: List[str]
    images: np.ndarray
    masks: np.ndarray
    viral: np.ndarray
    blobs: List[Optional[Blob]]
    records: List[EngagementRecord]
    pairs: PairSplit
    side_maps: Optional[np.ndarray] = None


def image_id(index: int) -> str:
    return f"img{index:05d}"


def disc_mask(height: int, width: int, blob: Blob) -> np.ndarray:
    """Pixels whose centre lies within the blob radius."""
    yy, xx = np.mgrid[0:height, 0:width]
    return (yy - blob.center_y) ** 2 + (xx - blob.center_x) ** 2 <= blob.radius ** 2


def _gaussian(height: int, width: int, center_y: float, center_x: float, sigma: float) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(DTYPE)
    return np.exp(-((yy - center_y) ** 2 + (xx - center_x) ** 2) / (2.0 * sigma ** 2))


def _draw_blob(rng: np.random.Generator, spec: SynthSpec) -> Blob:
    radius = rng.uniform(spec.blob_radius_min, spec.blob_radius_max)
    cy = rng.uniform(radius, max(radius, spec.image_height - 1 - radius))
    cx = rng.uniform(radius, max(radius, spec.image_width - 1 - radius))
    return Blob(center_y=float(cy), center_x=float(cx), radius=float(radius))


def _side_maps(
    rng: np.random.Generator,
    spec: SynthSpec,
    blob: Optional[Blob],
) -> np.ndarray:
    """
    Half-resolution objectness stand-in: map 0 peaks on the object (or on a
    decoy location for non-viral images), the others are low-level noise.
    """
    height = max(spec.image_height // 2, 1)
    width = max(spec.image_width // 2, 1)
    scale_y = (height - 1) / max(spec.image_height - 1, 1)
    scale_x = (width - 1) / max(spec.image_width - 1, 1)
    target = blob if blob is not None else _draw_blob(rng, spec)
    maps = rng.uniform(0.0, SIDE_MAP_NOISE, size=(spec.side_maps, height, width))
    maps[0] = _gaussian(
        height,
        width,
        target.center_y * scale_y,
        target.center_x * scale_x,
        max(target.radius * scale_y / 2.0, 0.5),
    )
    return maps


def generate_synthetic(spec: SynthSpec) -> SyntheticDataset:
    """
    Build images, masks, metadata and the train/test pair split.

    Raises:
        InsufficientDataError: the spec's pair counts cannot be met
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.num_images
    height, width = spec.image_size

    n_viral = min(max(int(round(spec.viral_fraction * n)), 1), n - 1)
    viral = np.zeros(n, dtype=bool)
    viral[rng.permutation(n)[:n_viral]] = True

    color = np.asarray(_BLOB_COLORS[spec.blob_color], dtype=DTYPE)[:, np.newaxis, np.newaxis]
    images = np.empty((n, 3, height, width), dtype=DTYPE)
    masks = np.zeros((n, height, width), dtype=bool)
    side_maps = np.empty((n, spec.side_maps, max(height // 2, 1), max(width // 2, 1))) if spec.side_maps else None
    blobs: List[Optional[Blob]] = []
    records: List[EngagementRecord] = []
    ids = [image_id(i) for i in range(n)]

    for i in range(n):
        background = BACKGROUND_LEVEL + rng.normal(0.0, spec.noise_level, size=(3, height, width))
        blob = _draw_blob(rng, spec) if viral[i] else None
        if blob is not None:
            masks[i] = disc_mask(height, width, blob)
            background = background + spec.blob_intensity * color * masks[i]
        images[i] = np.clip(background, 0.0, 1.0)
        blobs.append(blob)

        likes_range, resub_range = (_VIRAL_LIKES, _VIRAL_RESUB) if viral[i] else (_PLAIN_LIKES, _PLAIN_RESUB)
        records.append(EngagementRecord(
            id=ids[i],
            likes=float(rng.integers(likes_range[0], likes_range[1] + 1)),
            resubmissions=float(rng.integers(resub_range[0], resub_range[1] + 1)),
        ))
        if side_maps is not None:
            side_maps[i] = _side_maps(rng, spec, blob)

    scored = score_records(records)
    pairs = split_train_test(
        scored,
        train_count=spec.train_pairs,
        test_count=spec.test_pairs,
        extremes_k=spec.extremes_k,
        seed=spec.seed,
    )
    logger.info(
        "Synthetic dataset generated",
        images=n,
        viral=n_viral,
        train_pairs=len(pairs.train),
        test_pairs=len(pairs.test),
        side_maps=spec.side_maps,
    )
    return SyntheticDataset(
        spec=spec,
        ids=ids,
        images=images,
        masks=masks,
        viral=viral,
        blobs=blobs,
        records=records,
        pairs=pairs,
        side_maps=side_maps,
    )


IMAGES_DIR = "images"
MASKS_DIR = "masks"
SIDE_MAPS_DIR = "side_maps"
METADATA_FILE = "metadata.csv"
TRAIN_PAIRS_FILE = "pairs_train.csv"
TEST_PAIRS_FILE = "pairs_test.csv"
SPEC_FILE = "synth_spec.json"


def write_dataset(dataset: SyntheticDataset, out_dir: Union[str, Path]) -> Path:
    """
    Layout:
        images/<id>.png, masks/<id>.png, side_maps/<id>.npy (when present),
        metadata.csv, pairs_train.csv, pairs_test.csv, synth_spec.json
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, image_name in enumerate(dataset.ids):
        image_io.save_image(out / IMAGES_DIR / f"{image_name}.png", dataset.images[i])
        image_io.save_mask(out / MASKS_DIR / f"{image_name}.png", dataset.masks[i])
        if dataset.side_maps is not None:
            image_io.save_side_maps(out / SIDE_MAPS_DIR / f"{image_name}.npy", dataset.side_maps[i])
    csv_io.write_metadata_csv(out / METADATA_FILE, dataset.records)
    csv_io.write_pairs_csv(out / TRAIN_PAIRS_FILE, dataset.pairs.train)
    csv_io.write_pairs_csv(out / TEST_PAIRS_FILE, dataset.pairs.test)
    (out / SPEC_FILE).write_text(
        json.dumps(dataset.spec.model_dump(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return out
