"""
Engagement-based virality score.

V_i = (L_i / mean L) * ln(M_i / mean M)

Natural logarithm; likes may be negative, resubmissions must be positive.
"""
import math
from typing import List, Optional, Sequence

from viraliency.core.exceptions import InsufficientDataError, InvalidRecordError
from viraliency.schemas.data import EngagementRecord, ScoredImage


def virality_score(record: EngagementRecord, mean_likes: float, mean_resub: float) -> float:
    """
    Raises:
        InvalidRecordError: mean_likes == 0, mean_resub <= 0 or resubmissions <= 0
    """
    if mean_likes == 0.0:
        raise InvalidRecordError(record.id, "mean likes is zero")
    if mean_resub <= 0.0:
        raise InvalidRecordError(record.id, f"mean resubmissions must be > 0, got {mean_resub}")
    if record.resubmissions <= 0.0:
        raise InvalidRecordError(record.id, f"resubmissions must be > 0, got {record.resubmissions}")
    return (record.likes / mean_likes) * math.log(record.resubmissions / mean_resub)


def score_records(
    records: Sequence[EngagementRecord],
    mean_likes: Optional[float] = None,
    mean_resub: Optional[float] = None,
) -> List[ScoredImage]:
    """
    Score a batch; means default to the batch means.

    Every record is validated; the first invalid one aborts the batch.
    """
    if not records:
        raise InsufficientDataError("cannot score an empty metadata set")
    if mean_likes is None:
        mean_likes = math.fsum(r.likes for r in records) / len(records)
    if mean_resub is None:
        mean_resub = math.fsum(r.resubmissions for r in records) / len(records)
    return [
        ScoredImage(id=r.id, virality=virality_score(r, mean_likes, mean_resub))
        for r in records
    ]
