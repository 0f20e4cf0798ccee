"""
Gradient checking harness.

Weights and biases are compared with central finite differences of the summed
pair loss. eta is not: the pooled value is piecewise constant in eta, so its
oracle is an independent evaluation of the top-N-average difference estimator
built from np.sort and explicit means.

Error per element is relative,

    |a - n| / max(|a|, |n|)

except where both magnitudes sit below RELATIVE_FLOOR, which compares
absolutely; a group reports its maximum. The head bias cancels in s(a) - s(b),
so its analytic gradient is exactly 0 while finite differences return rounding
noise.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from viraliency.core.logging import get_run_logger
from viraliency.schemas.evaluation import GradCheckEntry
from viraliency.schemas.model import ModelConfig
from viraliency.services.dataset import PairBatch
from viraliency.services.pooling import SNAP_TOLERANCE, top_n_count
from viraliency.services.siamese import ETA_KEY, ViralityNet, pair_losses
from viraliency.services.tensor import DTYPE

logger = get_run_logger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-5
ETA_TOLERANCE = 1e-12
KINK_MARGIN = 1e-4
RELATIVE_FLOOR = 1e-2


@dataclass(frozen=True)
class GradCheckReport:
    entries: List[GradCheckEntry]

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    @property
    def worst(self) -> Optional[GradCheckEntry]:
        if not self.entries:
            return None
        # margin over tolerance; a zero tolerance stays comparable
        return max(self.entries, key=lambda e: e.max_rel_error - e.tolerance)


def scaled_errors(analytic: np.ndarray, oracle: np.ndarray) -> np.ndarray:
    analytic = np.asarray(analytic, dtype=DTYPE).reshape(-1)
    oracle = np.asarray(oracle, dtype=DTYPE).reshape(-1)
    scale = np.maximum(np.abs(analytic), np.abs(oracle))
    return np.abs(analytic - oracle) / np.where(scale < RELATIVE_FLOOR, 1.0, scale)


def reference_eta_derivative(feature: np.ndarray, eta: float) -> float:
    """
    Top-N-average slope in eta, evaluated from scratch.

    Central difference over N-1 and N+1 when both neighbours lie in [0, 1],
    one-sided otherwise, secant over the whole range when neither does.
    Zero when the compared window holds one repeated value; never positive.
    """
    values = np.sort(np.asarray(feature, dtype=DTYPE).reshape(-1))[::-1]
    pixels = values.size
    if pixels == 1:
        return 0.0
    n = top_n_count(eta, 1, pixels)
    scaled = eta * (pixels - 1)
    has_lower = scaled >= 1.0 - SNAP_TOLERANCE
    has_upper = scaled <= pixels - 2 + SNAP_TOLERANCE

    if has_lower and has_upper:
        low, high = n - 1, n + 1
    elif has_upper:
        low, high = n, n + 1
    elif has_lower:
        low, high = n - 1, n
    else:
        low, high = 1, pixels

    if values[0] == values[high - 1]:
        return 0.0
    slope = (values[:high].mean() - values[:low].mean()) * (pixels - 1) / (high - low)
    return min(float(slope), 0.0)


def _branch_eta_grad(model: ViralityNet, images: np.ndarray, side: Optional[np.ndarray], grad_scores: np.ndarray) -> np.ndarray:
    """sum_b grad_scores[b] * w_0l * d g_l / d eta_l, channel by channel."""
    features = model.features(images, side)
    weights = model.params["head.weight"][0]
    etas = model.etas.values
    grad = np.zeros(features.shape[1], dtype=DTYPE)
    for b in range(features.shape[0]):
        for channel in range(features.shape[1]):
            slope = reference_eta_derivative(features[b, channel], float(etas[channel]))
            grad[channel] += grad_scores[b] * weights[channel] * slope
    return grad


def _loss(model: ViralityNet, batch: PairBatch) -> float:
    logits = model.pair_logits(batch.images_a, batch.images_b, batch.side_a, batch.side_b)
    losses, _ = pair_losses(logits, batch.targets)
    return float(np.sum(losses))


def _has_kinks(model: ViralityNet, batch: PairBatch, margin: float) -> bool:
    """True when a ReLU input or a top-N boundary gap lies within `margin`."""
    for images, side in ((batch.images_a, batch.side_a), (batch.images_b, batch.side_b)):
        _, cache = model.forward(images, side)
        for index, pre in enumerate(cache.pre_activations):
            if model.config.conv_layers[index].activation == "relu" and np.min(np.abs(pre)) < margin:
                return True
        if cache.fusion_pre is not None and np.min(np.abs(cache.fusion_pre)) < margin:
            return True
        pool = cache.pool
        inside = pool.n_used < pool.num_pixels
        if np.any(inside):
            lead = pool.sorted_values.shape[:-1]
            n = np.broadcast_to(pool.n_used[:, np.newaxis], lead + (1,))
            last_in = np.take_along_axis(pool.sorted_values, n - 1, axis=-1)[..., 0]
            first_out = np.take_along_axis(pool.sorted_values, np.minimum(n, pool.num_pixels - 1), axis=-1)[..., 0]
            gaps = (last_in - first_out)[..., inside]
            if gaps.size and np.min(gaps) < margin:
                return True
    return False


def jitter_off_kinks(
    model: ViralityNet,
    batch: PairBatch,
    seed: int = 0,
    scale: float = 1e-2,
    margin: float = KINK_MARGIN,
    attempts: int = 200,
) -> PairBatch:
    """
    Perturb the images until no ReLU input and no top-N boundary gap is within
    `margin`, so that finite differences never cross a kink.
    """
    rng = np.random.default_rng(seed)
    candidate = batch
    for _ in range(attempts):
        if not _has_kinks(model, candidate, margin):
            return candidate
        candidate = PairBatch(
            images_a=batch.images_a + rng.normal(0.0, scale, size=batch.images_a.shape),
            images_b=batch.images_b + rng.normal(0.0, scale, size=batch.images_b.shape),
            targets=batch.targets,
            side_a=batch.side_a,
            side_b=batch.side_b,
        )
    logger.warning("Could not move inputs off every kink", attempts=attempts, margin=margin)
    return candidate


def grad_check(
    model: ViralityNet,
    sample: PairBatch,
    tolerance: float = DEFAULT_TOLERANCE,
    step: float = DEFAULT_STEP,
    eta_tolerance: float = ETA_TOLERANCE,
) -> GradCheckReport:
    """
    Compare analytic gradients of the summed pair loss with their oracles.

    Failures are report entries, never exceptions.
    """
    loss, analytic, logits = model.pair_forward_backward(
        sample.images_a, sample.images_b, sample.targets, sample.side_a, sample.side_b
    )
    _, dlogits = pair_losses(logits, sample.targets)
    base = {name: np.array(value) for name, value in model.params.items()}
    entries: List[GradCheckEntry] = []

    for name, value in base.items():
        if name == ETA_KEY:
            continue
        numeric = np.zeros(value.size, dtype=DTYPE)
        flat = value.reshape(-1)
        for index in range(value.size):
            original = flat[index]
            flat[index] = original + step
            plus = _loss(ViralityNet(model.config, base), sample)
            flat[index] = original - step
            minus = _loss(ViralityNet(model.config, base), sample)
            flat[index] = original
            numeric[index] = (plus - minus) / (2.0 * step)
        errors = scaled_errors(analytic[name], numeric)
        entries.append(GradCheckEntry(
            group=name,
            size=int(value.size),
            max_rel_error=float(np.max(errors)),
            tolerance=tolerance,
            oracle="finite_difference",
        ))

    if model.eta_trainable:
        oracle = (
            _branch_eta_grad(model, sample.images_a, sample.side_a, dlogits)
            + _branch_eta_grad(model, sample.images_b, sample.side_b, -dlogits)
        )
        errors = scaled_errors(analytic[ETA_KEY], oracle)
        entries.append(GradCheckEntry(
            group=ETA_KEY,
            size=int(oracle.size),
            max_rel_error=float(np.max(errors)),
            tolerance=eta_tolerance,
            oracle="eta_estimator",
        ))

    for entry in entries:
        logger.info(
            "Gradient check",
            group=entry.group,
            size=entry.size,
            max_rel_error=entry.max_rel_error,
            tolerance=entry.tolerance,
            passed=entry.passed,
        )
    logger.debug("Gradient check loss", loss=loss)
    return GradCheckReport(entries=entries)


def random_pair_batch(config: ModelConfig, pairs: int = 2, seed: int = 0) -> PairBatch:
    """Seeded uniform images (and half-resolution side maps) with random labels."""
    rng = np.random.default_rng([seed, 3])
    shape = (pairs, config.input_channels, config.input_height, config.input_width)
    side_a = side_b = None
    if config.objectness is not None:
        side_shape = (
            pairs,
            config.objectness.num_side_maps,
            max(config.input_height // 2, 1),
            max(config.input_width // 2, 1),
        )
        side_a = rng.uniform(0.0, 1.0, size=side_shape)
        side_b = rng.uniform(0.0, 1.0, size=side_shape)
    return PairBatch(
        images_a=rng.uniform(0.0, 1.0, size=shape),
        images_b=rng.uniform(0.0, 1.0, size=shape),
        targets=rng.integers(0, 2, size=pairs).astype(DTYPE),
        side_a=side_a,
        side_b=side_b,
    )
