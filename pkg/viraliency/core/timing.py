"""
Wall-clock timing helpers for benchmarks and command logging.
"""
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator, List


@dataclass
class LatencyStats:
    """Aggregated latency statistics (sum/count for average calculation)."""
    sum_ms: float = 0.0
    count: int = 0
    samples_ms: List[float] = field(default_factory=list)

    def record(self, ms: float) -> None:
        self.sum_ms += ms
        self.count += 1
        self.samples_ms.append(ms)

    @property
    def avg_ms(self) -> float:
        return self.sum_ms / self.count if self.count > 0 else 0.0

    @property
    def min_ms(self) -> float:
        return min(self.samples_ms) if self.samples_ms else 0.0


@contextmanager
def timed(stats: LatencyStats) -> Iterator[None]:
    """Record the elapsed time of the enclosed block into `stats`."""
    start = time.perf_counter()
    try:
        yield
    finally:
        stats.record((time.perf_counter() - start) * 1000.0)
