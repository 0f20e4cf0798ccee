"""
Relative-virality pair construction.

Two protocols:
- median_split: one image strictly above the median score, one strictly below
- extremes: one image from the top_k most viral, one from the bottom_k least viral

Pairs are sampled without replacement from the high x low grid, so a call never
repeats an unordered pair, and orientation (which side is `a`) is randomised with
the label following it.
"""
from dataclasses import dataclass
from typing import Collection, List, Optional, Sequence, Tuple, Union

import numpy as np

from viraliency.core.exceptions import InsufficientDataError
from viraliency.core.logging import get_run_logger
from viraliency.schemas.data import PairLabel, PairMode, PairRecord, PairRequest, ScoredImage

logger = get_run_logger(__name__)

Seed = Union[int, Sequence[int]]


def _split_median(scored: Sequence[ScoredImage]) -> Tuple[List[ScoredImage], List[ScoredImage]]:
    median = float(np.median([s.virality for s in scored]))
    high = [s for s in scored if s.virality > median]
    low = [s for s in scored if s.virality < median]
    return high, low


def _split_extremes(
    scored: Sequence[ScoredImage],
    top_k: int,
    bottom_k: int
) -> Tuple[List[ScoredImage], List[ScoredImage]]:
    if top_k + bottom_k > len(scored):
        raise InsufficientDataError(
            f"extremes need {top_k} + {bottom_k} distinct images, only {len(scored)} available"
        )
    ranked = sorted(scored, key=lambda s: -s.virality)
    return ranked[:top_k], ranked[len(ranked) - bottom_k:]


def build_pairs(
    scored: Sequence[ScoredImage],
    request: PairRequest,
    seed: Seed = 0,
    exclude_ids: Optional[Collection[str]] = None,
) -> List[PairRecord]:
    """
    Sample `request.count` labelled pairs.

    Args:
        scored: images with virality scores
        request: protocol and sizes
        seed: generator seed (int or entropy sequence)
        exclude_ids: ids that must not appear (e.g. test-set images)

    Raises:
        InsufficientDataError: an empty side, or fewer distinct pairs than requested
    """
    excluded = set(exclude_ids or ())
    pool = [s for s in scored if s.id not in excluded]

    if request.mode is PairMode.MEDIAN_SPLIT:
        high, low = _split_median(pool)
    else:
        high, low = _split_extremes(pool, request.top_k, request.bottom_k)

    if not high or not low:
        raise InsufficientDataError(
            f"{request.mode.value}: need images on both sides (high={len(high)}, low={len(low)})"
        )
    available = len(high) * len(low)
    if request.count > available:
        raise InsufficientDataError(
            f"{request.mode.value}: requested {request.count} pairs, only {available} distinct pairs exist"
        )

    rng = np.random.default_rng(seed)
    picks = rng.choice(available, size=request.count, replace=False)
    high_first = rng.random(request.count) < 0.5

    pairs = []
    for flat, a_is_high in zip(picks.tolist(), high_first.tolist()):
        hi, lo = divmod(flat, len(low))
        pair = PairRecord(id_a=high[hi].id, id_b=low[lo].id, label=PairLabel.A_MORE_VIRAL)
        pairs.append(pair if a_is_high else pair.swapped())

    logger.debug(
        "Pairs built",
        mode=request.mode.value,
        count=len(pairs),
        high=len(high),
        low=len(low),
    )
    return pairs


def pair_ids(pairs: Sequence[PairRecord]) -> set:
    """Every image id referenced by a pair list."""
    return {p.id_a for p in pairs} | {p.id_b for p in pairs}


@dataclass(frozen=True)
class PairSplit:
    train: List[PairRecord]
    test: List[PairRecord]


def split_train_test(
    scored: Sequence[ScoredImage],
    train_count: int,
    test_count: int,
    extremes_k: int,
    seed: int = 0,
) -> PairSplit:
    """
    Test pairs from the extremes, train pairs from a median split of the
    remaining images; the two id sets are disjoint.
    """
    test: List[PairRecord] = []
    if test_count:
        test = build_pairs(
            scored,
            PairRequest(mode=PairMode.EXTREMES, count=test_count, top_k=extremes_k, bottom_k=extremes_k),
            seed=[seed, 2],
        )
    train: List[PairRecord] = []
    if train_count:
        train = build_pairs(
            scored,
            PairRequest(mode=PairMode.MEDIAN_SPLIT, count=train_count),
            seed=[seed, 1],
            exclude_ids=pair_ids(test),
        )
    return PairSplit(train=train, test=test)
