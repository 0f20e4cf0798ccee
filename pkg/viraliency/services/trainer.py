"""
Training loop, evaluation and eta analysis.

Per iteration:
1. take the next `batch_size` pairs from a seeded per-epoch permutation
2. split the batch into `grad_chunks` fixed, ordered chunks; forward/backward
   each chunk (optionally on worker threads)
3. reduce chunk gradients in chunk order, divide by the batch size
4. one SGD step at lr_at(iteration)

The chunking does not depend on the thread count, so every run with the same
config and seed follows the same trajectory bit for bit.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from viraliency.core.exceptions import DivergenceError, NonFiniteError
from viraliency.core.logging import get_run_logger
from viraliency.schemas.model import ModelConfig
from viraliency.schemas.train import TrainConfig
from viraliency.services.dataset import PairBatch, PairDataset
from viraliency.services.optimizer import EtaMoments, lr_at, sgd_step
from viraliency.services.siamese import (
    ETA_KEY,
    Params,
    ViralityNet,
    add_params,
    correct_mask,
    is_front_end,
    pairwise_accuracy,
    scale_params,
)

logger = get_run_logger(__name__)

EVAL_BATCH = 64


@dataclass
class EtaTrace:
    """eta snapshots keyed by the number of completed SGD iterations."""
    iterations: List[int] = field(default_factory=list)
    snapshots: List[np.ndarray] = field(default_factory=list)

    def record(self, iteration: int, etas: np.ndarray) -> None:
        self.iterations.append(iteration)
        self.snapshots.append(np.clip(np.array(etas, dtype=np.float64), 0.0, 1.0))

    @property
    def initial(self) -> np.ndarray:
        return self.snapshots[0]

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def moved_fraction(self, min_change: float = 0.1) -> float:
        """Share of eta entries that ended at least `min_change` away from their start."""
        if not self.snapshots:
            return 0.0
        return float(np.mean(np.abs(self.final - self.initial) >= min_change))


@dataclass
class TrainResult:
    model: ViralityNet
    eta_trace: EtaTrace
    iterations: List[int]
    lrs: List[float]
    losses: List[float]


class _EpochSampler:
    """Fresh seeded permutation every epoch; batches may span epochs."""

    def __init__(self, size: int, seed: int):
        self._size = size
        self._rng = np.random.default_rng([seed, 1])
        self._order = self._rng.permutation(size)
        self._position = 0

    def next_indices(self, count: int) -> List[int]:
        picked: List[int] = []
        while len(picked) < count:
            if self._position == self._size:
                self._order = self._rng.permutation(self._size)
                self._position = 0
            take = min(count - len(picked), self._size - self._position)
            picked.extend(self._order[self._position:self._position + take].tolist())
            self._position += take
        return picked


def _chunk_bounds(batch_size: int, chunks: int) -> List[Tuple[int, int]]:
    edges = np.linspace(0, batch_size, min(chunks, batch_size) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def batch_gradients(
    model: ViralityNet,
    batch: PairBatch,
    chunks: int,
    front_end: bool = True,
    executor: Optional[ThreadPoolExecutor] = None,
) -> Tuple[float, Params]:
    """
    Mean pair loss and its gradients over one batch.

    Chunks are evaluated against the same parameter snapshot and summed in
    chunk order.
    """
    bounds = _chunk_bounds(len(batch), chunks)

    def run(bound: Tuple[int, int]) -> Tuple[float, Params]:
        part = batch.slice(*bound)
        loss_sum, grads, _ = model.pair_forward_backward(
            part.images_a, part.images_b, part.targets, part.side_a, part.side_b, front_end=front_end
        )
        return loss_sum, grads

    results = list(executor.map(run, bounds)) if executor is not None else [run(b) for b in bounds]
    total_loss = 0.0
    total_grads: Optional[Params] = None
    for loss_sum, grads in results:
        total_loss += loss_sum
        total_grads = grads if total_grads is None else add_params(total_grads, grads)
    scale = 1.0 / len(batch)
    return total_loss * scale, scale_params(total_grads, scale)


def train(
    dataset: PairDataset,
    model: ViralityNet,
    cfg: TrainConfig,
    threads: int = 1,
) -> TrainResult:
    """
    Run `cfg.max_iters` SGD iterations on `model` (updated in place).

    Raises:
        DivergenceError: the loss or a gradient became non-finite
    """
    trace = EtaTrace()
    trace.record(0, model.params[ETA_KEY])
    iterations: List[int] = []
    lrs: List[float] = []
    losses: List[float] = []

    frozen = set()
    if cfg.freeze_front_end:
        frozen.update(name for name in model.params if is_front_end(name))
    if not model.eta_trainable:
        frozen.add(ETA_KEY)

    sampler = _EpochSampler(len(dataset), cfg.seed)
    velocity: Optional[Params] = None
    eta_moments: Optional[EtaMoments] = None
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    logger.info(
        "Training started",
        pairs=len(dataset),
        max_iters=cfg.max_iters,
        batch_size=cfg.batch_size,
        threads=threads,
        parameters=model.num_parameters,
        frozen=len(frozen),
        eta_update=cfg.eta_update,
    )
    try:
        for iteration in range(cfg.max_iters):
            batch = dataset.batch(sampler.next_indices(cfg.batch_size))
            lr = lr_at(iteration, cfg)
            try:
                loss, grads = batch_gradients(
                    model, batch, cfg.grad_chunks, front_end=not cfg.freeze_front_end, executor=executor
                )
            except NonFiniteError as e:
                logger.error("Non-finite values during training", error_code=e.error_code.value,
                             iteration=iteration, detail=e.message)
                raise DivergenceError(iteration, float("nan"))
            if not np.isfinite(loss):
                raise DivergenceError(iteration, loss)

            state = sgd_step(model.params, grads, velocity, lr, cfg, frozen=frozen, eta_moments=eta_moments)
            model.set_params(state.params)
            velocity = state.velocity
            eta_moments = state.eta_moments

            iterations.append(iteration)
            lrs.append(lr)
            losses.append(loss)
            completed = iteration + 1
            if completed % cfg.eta_snapshot_every == 0:
                trace.record(completed, model.params[ETA_KEY])
            if completed % cfg.log_every == 0:
                logger.info(
                    "Training progress",
                    iteration=completed,
                    lr=lr,
                    loss=loss,
                    mean_eta=float(np.mean(model.params[ETA_KEY])),
                )
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    if trace.iterations[-1] != cfg.max_iters:
        trace.record(cfg.max_iters, model.params[ETA_KEY])
    logger.info("Training finished", iterations=cfg.max_iters, final_loss=losses[-1] if losses else None)
    return TrainResult(model=model, eta_trace=trace, iterations=iterations, lrs=lrs, losses=losses)


# =============================================================================
# Evaluation
# =============================================================================

@dataclass(frozen=True)
class PairEvaluation:
    logits: np.ndarray
    targets: np.ndarray
    accuracy: float

    @property
    def correct(self) -> int:
        return int(np.sum(correct_mask(self.logits, self.targets)))


def evaluate_pairs(model: ViralityNet, dataset: PairDataset, batch_size: int = EVAL_BATCH) -> PairEvaluation:
    """Logits of every pair and the pairwise accuracy."""
    logits = []
    targets = []
    for start in range(0, len(dataset), batch_size):
        batch = dataset.batch(range(start, min(start + batch_size, len(dataset))))
        logits.append(model.pair_logits(batch.images_a, batch.images_b, batch.side_a, batch.side_b))
        targets.append(batch.targets)
    all_logits = np.concatenate(logits)
    all_targets = np.concatenate(targets)
    return PairEvaluation(
        logits=all_logits,
        targets=all_targets,
        accuracy=pairwise_accuracy(all_logits, all_targets),
    )


# =============================================================================
# eta analysis
# =============================================================================

def eta_histogram(etas: Sequence[float], bins: int = 10) -> Tuple[np.ndarray, np.ndarray]:
    """
    Counts over `bins` equal bins of [0, 1]; the last bin is closed.

    Returns:
        (edges of length bins + 1, counts of length bins)
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    values = np.clip(np.asarray(etas, dtype=np.float64).reshape(-1), 0.0, 1.0)
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return edges, counts


def extreme_vs_middle_mass(etas: Sequence[float]) -> Tuple[float, float]:
    """Share of eta entries in [0, 0.1] or [0.9, 1] versus in [0.4, 0.6]."""
    values = np.asarray(etas, dtype=np.float64).reshape(-1)
    extreme = np.mean((values <= 0.1) | (values >= 0.9))
    middle = np.mean((values >= 0.4) & (values <= 0.6))
    return float(extreme), float(middle)


@dataclass(frozen=True)
class SweepRow:
    eta_init: float
    accuracy: float
    final_etas: np.ndarray
    histogram: np.ndarray


DEFAULT_SWEEP = tuple(round(0.1 * step, 1) for step in range(11))


def eta_sensitivity_sweep(
    train_set: PairDataset,
    test_set: PairDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    eta_inits: Sequence[float] = DEFAULT_SWEEP,
    threads: int = 1,
    bins: int = 10,
) -> List[SweepRow]:
    """
    Train one model per initial eta (same seed, same data) and report test
    accuracy and the final eta histogram of each run.
    """
    rows = []
    for eta_init in eta_inits:
        config = ModelConfig.model_validate({**model_config.model_dump(), "eta_init": float(eta_init)})
        model = ViralityNet.initialize(config, seed=train_config.seed)
        result = train(train_set, model, train_config, threads=threads)
        evaluation = evaluate_pairs(result.model, test_set)
        _, counts = eta_histogram(result.eta_trace.final, bins)
        logger.info("Sweep run finished", eta_init=float(eta_init), accuracy=evaluation.accuracy)
        rows.append(SweepRow(
            eta_init=float(eta_init),
            accuracy=evaluation.accuracy,
            final_etas=result.eta_trace.final,
            histogram=counts,
        ))
    return rows
