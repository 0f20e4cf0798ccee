"""
Dataset schemas: engagement metadata, scored images, pairs, synthetic spec.
"""
from enum import Enum
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PairLabel(str, Enum):
    """Which image of a pair is more viral."""
    A_MORE_VIRAL = "a_more_viral"
    B_MORE_VIRAL = "b_more_viral"

    @property
    def target(self) -> float:
        """Sigmoid cross-entropy target t in {0, 1}."""
        return 1.0 if self is PairLabel.A_MORE_VIRAL else 0.0

    def flipped(self) -> "PairLabel":
        if self is PairLabel.A_MORE_VIRAL:
            return PairLabel.B_MORE_VIRAL
        return PairLabel.A_MORE_VIRAL


class EngagementRecord(BaseModel):
    """One row of the metadata CSV."""

    id: str = Field(..., min_length=1, description="Image identifier")
    likes: float = Field(
        ...,
        description="Likes L_i (upvotes minus downvotes, may be negative)"
    )
    resubmissions: float = Field(
        ...,
        ge=0.0,
        description="Resubmissions / reshares M_i (must be > 0 for a finite score)"
    )


class ScoredImage(BaseModel):
    """An image identifier with its virality score V_i."""

    id: str
    virality: float


class PairRecord(BaseModel):
    """A labelled pair of image identifiers (one row of a pairs CSV)."""

    id_a: str
    id_b: str
    label: PairLabel

    def swapped(self) -> "PairRecord":
        return PairRecord(id_a=self.id_b, id_b=self.id_a, label=self.label.flipped())


class PairMode(str, Enum):
    """Pair construction protocol."""
    MEDIAN_SPLIT = "median_split"
    EXTREMES = "extremes"


class PairRequest(BaseModel):
    """Parameters of one build_pairs call."""

    model_config = ConfigDict(extra="forbid")

    mode: PairMode = PairMode.MEDIAN_SPLIT
    count: int = Field(..., ge=1, description="Number of pairs to emit")
    top_k: Optional[int] = Field(default=None, ge=1, description="High set size for extremes")
    bottom_k: Optional[int] = Field(default=None, ge=1, description="Low set size for extremes")

    @model_validator(mode="after")
    def extremes_need_sizes(self) -> "PairRequest":
        if self.mode is PairMode.EXTREMES and (self.top_k is None or self.bottom_k is None):
            raise ValueError("extremes mode requires top_k and bottom_k")
        return self


class SynthSpec(BaseModel):
    """Planted-signal dataset description."""

    model_config = ConfigDict(extra="forbid")

    image_height: int = Field(default=64, ge=4, description="Image height in pixels")
    image_width: int = Field(default=64, ge=4, description="Image width in pixels")
    num_images: int = Field(default=1000, ge=2, description="Number of images")
    viral_fraction: float = Field(
        default=0.5,
        gt=0.0,
        lt=1.0,
        description="Fraction of images carrying the planted pattern"
    )
    blob_radius_min: float = Field(default=5.0, gt=0.0, description="Minimum blob radius (px)")
    blob_radius_max: float = Field(default=10.0, gt=0.0, description="Maximum blob radius (px)")
    blob_intensity: float = Field(
        default=0.6,
        gt=0.0,
        le=1.0,
        description="Brightness added inside the blob"
    )
    blob_color: Literal["white", "red", "green", "blue"] = Field(
        default="red",
        description="Channel pattern of the planted blob"
    )
    noise_level: float = Field(default=0.1, ge=0.0, description="Std of additive Gaussian noise")
    side_maps: int = Field(
        default=0,
        ge=0,
        description="Objectness side maps written per image (0 disables)"
    )
    train_pairs: int = Field(default=800, ge=0, description="Training pairs (median split)")
    test_pairs: int = Field(default=200, ge=0, description="Test pairs (extremes)")
    extremes_k: int = Field(
        default=250,
        ge=1,
        description="Size of the most/least viral sets used for test pairs"
    )
    seed: int = Field(default=0, ge=0, description="Generator seed")

    @model_validator(mode="after")
    def radius_order(self) -> "SynthSpec":
        if self.blob_radius_max < self.blob_radius_min:
            raise ValueError("blob_radius_max must be >= blob_radius_min")
        if 2 * self.blob_radius_max >= min(self.image_height, self.image_width):
            raise ValueError("blob does not fit in the image")
        return self

    @property
    def image_size(self) -> Tuple[int, int]:
        return self.image_height, self.image_width
