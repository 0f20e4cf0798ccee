"""
On-disk pair datasets: image (and side-map) lookup by id plus batch assembly.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from viraliency.core.exceptions import InsufficientDataError, ShapeMismatchError
from viraliency.schemas.data import PairRecord
from viraliency.services import image_io
from viraliency.services.csv_io import load_pairs_csv
from viraliency.services.synthetic import IMAGES_DIR, SyntheticDataset


class ImageStore:
    """
    Loads images by id from `<dataset_dir>/images`, and side maps from an
    optional directory of `<id>.npy` files. Loaded arrays are cached.
    """

    def __init__(
        self,
        dataset_dir: Union[str, Path],
        side_maps_dir: Optional[Union[str, Path]] = None,
        expected_shape: Optional[Tuple[int, int, int]] = None,
    ):
        self.images_dir = Path(dataset_dir) / IMAGES_DIR
        self.side_maps_dir = Path(side_maps_dir) if side_maps_dir else None
        self.expected_shape = expected_shape
        self._images: Dict[str, np.ndarray] = {}
        self._side: Dict[str, np.ndarray] = {}

    @property
    def has_side_maps(self) -> bool:
        return self.side_maps_dir is not None

    def image(self, image_id: str) -> np.ndarray:
        if image_id not in self._images:
            path = image_io.find_file(self.images_dir, image_id, image_io.IMAGE_EXTENSIONS)
            image = image_io.load_image(path)
            if self.expected_shape is not None and image.shape != tuple(self.expected_shape):
                raise ShapeMismatchError(f"image {image_id} shape", tuple(self.expected_shape), image.shape)
            image.setflags(write=False)
            self._images[image_id] = image
        return self._images[image_id]

    def side_maps(self, image_id: str) -> Optional[np.ndarray]:
        if self.side_maps_dir is None:
            return None
        if image_id not in self._side:
            maps = image_io.load_side_maps(self.side_maps_dir / f"{image_id}.npy")
            maps.setflags(write=False)
            self._side[image_id] = maps
        return self._side[image_id]


@dataclass(frozen=True)
class PairBatch:
    """Stacked pair tensors: a/b images (B, C, H, W), targets (B,)."""
    images_a: np.ndarray
    images_b: np.ndarray
    targets: np.ndarray
    side_a: Optional[np.ndarray] = None
    side_b: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.targets.shape[0]

    def slice(self, start: int, stop: int) -> "PairBatch":
        return PairBatch(
            images_a=self.images_a[start:stop],
            images_b=self.images_b[start:stop],
            targets=self.targets[start:stop],
            side_a=None if self.side_a is None else self.side_a[start:stop],
            side_b=None if self.side_b is None else self.side_b[start:stop],
        )


class PairDataset:
    """
    A list of labelled pairs backed by an ImageStore or in-memory arrays.
    """

    def __init__(self, pairs: Sequence[PairRecord], store: Union["ImageStore", "ArrayStore"]):
        if not pairs:
            raise InsufficientDataError("pair dataset is empty")
        self.pairs = list(pairs)
        self.store = store

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_csv(
        cls,
        pairs_csv: Union[str, Path],
        dataset_dir: Union[str, Path],
        side_maps_dir: Optional[Union[str, Path]] = None,
        expected_shape: Optional[Tuple[int, int, int]] = None,
    ) -> "PairDataset":
        return cls(load_pairs_csv(pairs_csv), ImageStore(dataset_dir, side_maps_dir, expected_shape))

    def batch(self, indices: Sequence[int]) -> PairBatch:
        selected = [self.pairs[i] for i in indices]
        side_a = side_b = None
        if self.store.has_side_maps:
            side_a = np.stack([self.store.side_maps(p.id_a) for p in selected])
            side_b = np.stack([self.store.side_maps(p.id_b) for p in selected])
        return PairBatch(
            images_a=np.stack([self.store.image(p.id_a) for p in selected]),
            images_b=np.stack([self.store.image(p.id_b) for p in selected]),
            targets=np.array([p.label.target for p in selected]),
            side_a=side_a,
            side_b=side_b,
        )


class ArrayStore:
    """ImageStore counterpart over a SyntheticDataset held in memory."""

    def __init__(self, dataset: SyntheticDataset):
        self._index = {image_name: i for i, image_name in enumerate(dataset.ids)}
        self._dataset = dataset

    @property
    def has_side_maps(self) -> bool:
        return self._dataset.side_maps is not None

    def image(self, image_id: str) -> np.ndarray:
        return self._dataset.images[self._index[image_id]]

    def side_maps(self, image_id: str) -> Optional[np.ndarray]:
        if self._dataset.side_maps is None:
            return None
        return self._dataset.side_maps[self._index[image_id]]


def in_memory_pairs(dataset: SyntheticDataset, which: str = "train") -> PairDataset:
    pairs: List[PairRecord] = dataset.pairs.train if which == "train" else dataset.pairs.test
    return PairDataset(pairs, ArrayStore(dataset))
