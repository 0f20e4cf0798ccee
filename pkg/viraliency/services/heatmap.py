"""
Heatmap rendering of normalised viraliency maps.

Colormap resolution priority:
1. LENA_COLORMAP_PATH (if set and the file exists)
2. Packaged resource viraliency/resources/colormaps/blue_red.json

The colormap is committed data, so renders are byte-reproducible.
"""
import hashlib
import json
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from viraliency.core.config import get_settings
from viraliency.core.exceptions import ParseError, ShapeMismatchError
from viraliency.core.logging import get_run_logger
from viraliency.services.tensor import DTYPE, bilinear_resize, check_finite

logger = get_run_logger(__name__)

_COLORMAP_FILENAME = "blue_red.json"
COLORMAP_ENTRIES = 256


def _get_packaged_colormap_path() -> Path:
    # viraliency/services/heatmap.py -> viraliency/resources/colormaps/
    package_dir = Path(__file__).resolve().parent.parent
    return package_dir / "resources" / "colormaps" / _COLORMAP_FILENAME


def resolve_colormap_path() -> Path:
    """Env override first, packaged resource otherwise."""
    override = get_settings().colormap_path
    if override:
        path = Path(override)
        if path.exists():
            return path
        logger.warning("LENA_COLORMAP_PATH set but file not found", path=override)
    return _get_packaged_colormap_path()


@lru_cache()
def load_colormap() -> np.ndarray:
    """
    Load the 256 x 3 uint8 colormap.

    Raises:
        ParseError: missing file, wrong entry count or out-of-range channel values
    """
    path = resolve_colormap_path()
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        entries = np.asarray(payload["entries"], dtype=np.int64)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ParseError(str(path), f"unreadable colormap ({type(e).__name__})")
    if entries.shape != (COLORMAP_ENTRIES, 3):
        raise ParseError(str(path), f"expected {COLORMAP_ENTRIES} RGB entries, got shape {entries.shape}")
    if entries.min() < 0 or entries.max() > 255:
        raise ParseError(str(path), "colormap values must lie in 0..255")
    logger.debug("Colormap loaded", path=str(path), sha256=colormap_hash(entries))
    return entries.astype(np.uint8)


def colormap_hash(entries: Optional[np.ndarray] = None) -> str:
    """SHA256 of the colormap bytes, for render provenance."""
    table = load_colormap() if entries is None else entries
    return hashlib.sha256(np.ascontiguousarray(table, dtype=np.uint8).tobytes()).hexdigest()


def colormap_indices(map01: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to colormap rows 0..255."""
    return np.rint(np.clip(map01, 0.0, 1.0) * (COLORMAP_ENTRIES - 1)).astype(np.intp)


def render_heatmap(
    map01: np.ndarray,
    image: Optional[np.ndarray] = None,
    target_size: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """
    Colour a normalised map, optionally blended 0.5/0.5 over an RGB image.

    Args:
        map01: (h, w) values in [0, 1]
        image: optional (3, H, W) float image in [0, 1]
        target_size: (H, W) of the output; defaults to the image size, then the map size

    Returns:
        (H, W, 3) uint8 array

    Raises:
        ShapeMismatchError: target size differs from the provided image
    """
    map01 = np.asarray(map01, dtype=DTYPE)
    if map01.ndim != 2:
        raise ShapeMismatchError("heatmap input rank", 2, map01.ndim)
    check_finite(map01, "normalised map")

    if image is not None:
        image = np.asarray(image, dtype=DTYPE)
        if image.ndim != 3 or image.shape[0] != 3:
            raise ShapeMismatchError("overlay image shape", "(3, H, W)", image.shape)
        image_size = image.shape[1:]
        if target_size is not None and tuple(target_size) != tuple(image_size):
            raise ShapeMismatchError("heatmap target size", tuple(image_size), tuple(target_size))
        target_size = image_size
    if target_size is None:
        target_size = map01.shape

    resized = bilinear_resize(map01, target_size[0], target_size[1])
    colors = load_colormap()[colormap_indices(resized)]
    if image is None:
        return colors

    base = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint16).transpose(1, 2, 0)
    return ((colors.astype(np.uint16) + base + 1) // 2).astype(np.uint8)
