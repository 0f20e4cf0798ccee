"""
Pooling overhead benchmark: forward + backward wall time per pooling mode.
"""
from typing import Dict, Iterable, List, Sequence

import numpy as np

from viraliency.core.logging import get_run_logger
from viraliency.core.timing import LatencyStats, timed
from viraliency.schemas.evaluation import BenchRow
from viraliency.schemas.model import PoolingMode
from viraliency.services.pooling import (
    EtaVector,
    lena_backward_features,
    lena_eta_grad_from_result,
    pool_forward,
)

logger = get_run_logger(__name__)

DEFAULT_CHANNELS = (64, 128, 256, 512)
DEFAULT_SIZE = 13


def _pass(features: np.ndarray, mode: PoolingMode, etas: EtaVector, grad: np.ndarray) -> None:
    result = pool_forward(features, mode, etas)
    lena_backward_features(result, grad, features.shape)
    if mode is PoolingMode.LENA:
        lena_eta_grad_from_result(result, grad)


def benchmark_pooling(
    channels: Iterable[int] = DEFAULT_CHANNELS,
    height: int = DEFAULT_SIZE,
    width: int = DEFAULT_SIZE,
    modes: Sequence[PoolingMode] = tuple(PoolingMode),
    repeats: int = 20,
    seed: int = 0,
    eta: float = 0.5,
) -> List[BenchRow]:
    """
    Time one forward + backward (+ eta gradient for LENA) per repeat.

    Each configuration runs once untimed first.
    """
    rng = np.random.default_rng(seed)
    rows: List[BenchRow] = []
    for count in channels:
        features = rng.standard_normal((count, height, width))
        grad = np.ones(count)
        etas = EtaVector.full(count, eta)
        for mode in modes:
            _pass(features, mode, etas, grad)
            stats = LatencyStats()
            for _ in range(repeats):
                with timed(stats):
                    _pass(features, mode, etas, grad)
            row = BenchRow(
                mode=mode.value,
                channels=count,
                height=height,
                width=width,
                repeats=repeats,
                mean_ms=stats.avg_ms,
            )
            logger.info("Benchmark row", mode=row.mode, channels=count, mean_ms=row.mean_ms, min_ms=stats.min_ms)
            rows.append(row)
    return rows


def overhead_ratio(rows: Sequence[BenchRow], mode: str = "LENA", baseline: str = "GMP") -> Dict[int, float]:
    """mean_ms(mode) / mean_ms(baseline) per channel count."""
    by_key = {(row.mode, row.channels): row.mean_ms for row in rows}
    ratios = {}
    for (row_mode, count), mean_ms in by_key.items():
        if row_mode == mode and (baseline, count) in by_key and by_key[(baseline, count)] > 0:
            ratios[count] = mean_ms / by_key[(baseline, count)]
    return ratios
