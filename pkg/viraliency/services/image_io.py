"""
Image, mask and side-map I/O.

Images: PNG/PPM, 8-bit RGB <-> float64 (3, H, W) in [0, 1].
Masks: PNG/PGM single channel, pixel > 127 means viral.
Side maps: <id>.npy float64 stacks (K', h, w).
"""
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from viraliency.core.exceptions import ParseError, ShapeMismatchError
from viraliency.services.tensor import DTYPE, check_finite

PathLike = Union[str, Path]

MASK_THRESHOLD = 127
IMAGE_EXTENSIONS = (".png", ".ppm")
MASK_EXTENSIONS = (".png", ".pgm")


def _open(path: PathLike) -> Image.Image:
    try:
        with Image.open(path) as img:
            img.load()
            return img.copy()
    except FileNotFoundError:
        raise ParseError(str(path), "file not found")
    except (UnidentifiedImageError, OSError) as e:
        raise ParseError(str(path), f"not a readable image ({e.__class__.__name__})")


def load_image(path: PathLike) -> np.ndarray:
    """Load an 8-bit image as float64 (3, H, W) with values in [0, 1]."""
    img = _open(path)
    rgb = np.asarray(img.convert("RGB"), dtype=DTYPE) / 255.0
    return np.ascontiguousarray(rgb.transpose(2, 0, 1))


def to_uint8_rgb(image: np.ndarray) -> np.ndarray:
    """(3, H, W) floats in [0, 1] -> (H, W, 3) uint8, rounding to nearest."""
    image = np.asarray(image, dtype=DTYPE)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeMismatchError("image shape", "(3, H, W)", image.shape)
    check_finite(image, "image")
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)


def save_image(path: PathLike, image: np.ndarray) -> Path:
    """Write a (3, H, W) float image; format follows the extension (.png or .ppm)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8_rgb(image)).save(path)
    return path


def save_rgb(path: PathLike, pixels: np.ndarray) -> Path:
    """Write an (H, W, 3) uint8 array (heatmaps)."""
    path = Path(path)
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ShapeMismatchError("rgb pixels", "(H, W, 3) uint8", f"{pixels.shape} {pixels.dtype}")
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(pixels)).save(path)
    return path


def load_mask(path: PathLike) -> np.ndarray:
    """Load a single-channel mask as a boolean (H, W) array."""
    img = _open(path)
    values = np.asarray(img.convert("L"))
    return values > MASK_THRESHOLD


def save_mask(path: PathLike, mask: np.ndarray) -> Path:
    """Write a boolean (H, W) mask as 0/255 (.png or .pgm)."""
    path = Path(path)
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeMismatchError("mask rank", 2, mask.ndim)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(mask.astype(bool), 255, 0).astype(np.uint8)).save(path)
    return path


def load_side_maps(path: PathLike) -> np.ndarray:
    """Load a (K', h, w) float64 side-map stack."""
    try:
        maps = np.load(path, allow_pickle=False)
    except FileNotFoundError:
        raise ParseError(str(path), "file not found")
    except (OSError, ValueError) as e:
        raise ParseError(str(path), f"not a readable .npy array ({e.__class__.__name__})")
    if maps.ndim != 3:
        raise ParseError(str(path), f"side maps must have shape (K, h, w), got {maps.shape}")
    maps = maps.astype(DTYPE)
    check_finite(maps, f"side maps {path}", stage="load")
    return maps


def save_side_maps(path: PathLike, maps: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, np.asarray(maps, dtype=DTYPE), allow_pickle=False)
    return path


def find_file(directory: PathLike, stem: str, extensions: tuple) -> Path:
    """First existing <directory>/<stem><ext> for the given extensions."""
    directory = Path(directory)
    for ext in extensions:
        candidate = directory / f"{stem}{ext}"
        if candidate.exists():
            return candidate
    raise ParseError(str(directory / stem), f"no file with extension in {list(extensions)}")
