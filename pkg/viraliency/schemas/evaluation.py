"""
Evaluation result schemas (localization, gradient checks, benchmarks).
"""
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field


class LocalizationOutcome(str, Enum):
    """Whether precision and recall are both defined."""
    OK = "ok"
    NO_POSITIVE_PREDICTIONS = "no_positive_predictions"
    NO_POSITIVE_TRUTH = "no_positive_truth"
    EMPTY = "no_positive_predictions_or_truth"


class LocalizationScore(BaseModel):
    """Pixel-wise precision/recall of a thresholded viraliency map."""

    precision: Optional[float] = Field(
        default=None,
        ge=0.0,
        le=1.0,
        description="TP/(TP+FP); None when nothing was predicted positive"
    )
    recall: Optional[float] = Field(
        default=None,
        ge=0.0,
        le=1.0,
        description="TP/(TP+FN); None when the truth mask is empty"
    )
    threshold: float
    pixels_evaluated: int = Field(..., ge=0)
    outcome: LocalizationOutcome = LocalizationOutcome.OK


class GradCheckEntry(BaseModel):
    """Worst relative error of one parameter group."""

    group: str
    size: int
    max_rel_error: float
    tolerance: float
    oracle: str = Field(description="'finite_difference' or 'eta_estimator'")

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


class BenchRow(BaseModel):
    """Timing of one pooling mode on one feature geometry."""

    mode: str
    channels: int
    height: int
    width: int
    repeats: int
    mean_ms: float
