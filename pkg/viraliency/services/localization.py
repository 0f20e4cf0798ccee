"""
Pixel-wise localization precision/recall of viraliency maps against truth masks.
"""
from typing import Iterable, Optional, Tuple

import numpy as np

from viraliency.core.exceptions import ShapeMismatchError
from viraliency.schemas.evaluation import LocalizationOutcome, LocalizationScore
from viraliency.services.tensor import DTYPE, bilinear_resize, check_finite

DEFAULT_THRESHOLD = 0.5


def localization_pr(
    map01: np.ndarray,
    truth_mask: np.ndarray,
    threshold: float = DEFAULT_THRESHOLD,
) -> LocalizationScore:
    """
    Threshold a normalised map and compare it with a binary mask.

    The map is resized (bilinear, align-corners) to the mask resolution first.
    Undefined ratios are reported through `outcome`, never as NaN.
    """
    map01 = np.asarray(map01, dtype=DTYPE)
    truth = np.asarray(truth_mask).astype(bool)
    if map01.ndim != 2 or truth.ndim != 2:
        raise ShapeMismatchError("localization inputs rank", (2, 2), (map01.ndim, truth.ndim))
    check_finite(map01, "normalised map")
    resized = bilinear_resize(map01, truth.shape[0], truth.shape[1])
    predicted = resized >= threshold

    true_positive = int(np.count_nonzero(predicted & truth))
    predicted_positive = int(np.count_nonzero(predicted))
    actual_positive = int(np.count_nonzero(truth))

    precision = true_positive / predicted_positive if predicted_positive else None
    recall = true_positive / actual_positive if actual_positive else None
    if predicted_positive == 0 and actual_positive == 0:
        outcome = LocalizationOutcome.EMPTY
    elif predicted_positive == 0:
        outcome = LocalizationOutcome.NO_POSITIVE_PREDICTIONS
    elif actual_positive == 0:
        outcome = LocalizationOutcome.NO_POSITIVE_TRUTH
    else:
        outcome = LocalizationOutcome.OK

    return LocalizationScore(
        precision=precision,
        recall=recall,
        threshold=threshold,
        pixels_evaluated=int(truth.size),
        outcome=outcome,
    )


def mean_precision_recall(scores: Iterable[LocalizationScore]) -> Tuple[Optional[float], Optional[float]]:
    """Averages over the defined values only; None when nothing is defined."""
    scores = list(scores)
    precisions = [s.precision for s in scores if s.precision is not None]
    recalls = [s.recall for s in scores if s.recall is not None]
    mean_p = float(np.mean(precisions)) if precisions else None
    mean_r = float(np.mean(recalls)) if recalls else None
    return mean_p, mean_r
