"""
SGD with classical momentum, L2 weight decay and a step learning-rate policy.

    v <- mu * v - lr * (g + lambda * theta)
    theta <- theta + v

eta is the exception: no weight decay, lr * eta_lr_multiplier, and the result
is clamped to [0, 1] after every update. With eta_update "adaptive" the eta
step is instead normalised per channel by running moment estimates,

    m <- b1 * m + (1 - b1) * g
    s <- b2 * s + (1 - b2) * g^2
    eta <- clip(eta - lr * eta_lr_multiplier * m_hat / (sqrt(s_hat) + eps), 0, 1)

with m_hat, s_hat the bias-corrected moments, so channels whose gradient is
small but consistent in sign still travel at the eta rate.
"""
from collections import OrderedDict
from dataclasses import dataclass
from typing import Collection, Dict, Optional, Tuple

import numpy as np

from viraliency.core.exceptions import NonFiniteError, ShapeMismatchError
from viraliency.schemas.train import TrainConfig
from viraliency.services.siamese import ETA_KEY, Params

ETA_EPSILON = 1e-10


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    """base_lr * factor ** floor(iteration / lr_step_every)."""
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")
    return cfg.base_lr * cfg.lr_step_factor ** (iteration // cfg.lr_step_every)


@dataclass(frozen=True)
class EtaMoments:
    """Running first and second moments of the eta gradient."""
    mean: np.ndarray
    square: np.ndarray
    steps: int = 0


@dataclass(frozen=True)
class SGDState:
    """Updated parameters and the velocity that produced them."""
    params: Params
    velocity: Params
    eta_moments: Optional[EtaMoments] = None


def zero_velocity(params: Params) -> Params:
    return OrderedDict((name, np.zeros_like(value)) for name, value in params.items())


def adaptive_eta_direction(
    grad: np.ndarray,
    moments: Optional[EtaMoments],
    cfg: TrainConfig,
) -> Tuple[np.ndarray, EtaMoments]:
    """Bias-corrected m / sqrt(s) for one step, and the moments after it."""
    if moments is None:
        moments = EtaMoments(mean=np.zeros_like(grad), square=np.zeros_like(grad))
    steps = moments.steps + 1
    mean = cfg.eta_beta1 * moments.mean + (1.0 - cfg.eta_beta1) * grad
    square = cfg.eta_beta2 * moments.square + (1.0 - cfg.eta_beta2) * grad * grad
    mean_hat = mean / (1.0 - cfg.eta_beta1 ** steps)
    square_hat = square / (1.0 - cfg.eta_beta2 ** steps)
    direction = mean_hat / (np.sqrt(square_hat) + ETA_EPSILON)
    return direction, EtaMoments(mean=mean, square=square, steps=steps)


def sgd_step(
    params: Params,
    grads: Params,
    velocity: Optional[Params],
    lr: float,
    cfg: TrainConfig,
    frozen: Collection[str] = (),
    eta_moments: Optional[EtaMoments] = None,
) -> SGDState:
    """
    One momentum step. Inputs are not modified.

    Args:
        params: current parameters
        grads: gradients with the same names and shapes
        velocity: previous velocity (None means zeros)
        lr: learning rate for this iteration
        cfg: momentum, weight decay and eta update settings
        frozen: parameter names left untouched (velocity kept as is)
        eta_moments: previous adaptive eta moments (None means zeros)

    Raises:
        NonFiniteError: a gradient holds NaN/Inf (names the parameter)
        ShapeMismatchError: gradient and parameter shapes differ
    """
    if velocity is None:
        velocity = zero_velocity(params)
    new_params: Dict[str, np.ndarray] = OrderedDict()
    new_velocity: Dict[str, np.ndarray] = OrderedDict()
    new_moments = eta_moments

    for name, theta in params.items():
        grad = np.asarray(grads[name], dtype=theta.dtype)
        if grad.shape != theta.shape:
            raise ShapeMismatchError(f"gradient of {name}", theta.shape, grad.shape)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"gradient of {name}", stage="optimizer step")
        if name in frozen:
            new_params[name] = theta
            new_velocity[name] = velocity[name]
            continue

        if name == ETA_KEY and cfg.eta_update == "adaptive":
            direction, new_moments = adaptive_eta_direction(grad, eta_moments, cfg)
            v = velocity[name]
            updated = np.clip(theta - (lr * cfg.eta_lr_multiplier) * direction, 0.0, 1.0)
        elif name == ETA_KEY:
            v = cfg.momentum * velocity[name] - (lr * cfg.eta_lr_multiplier) * grad
            updated = np.clip(theta + v, 0.0, 1.0)
        else:
            v = cfg.momentum * velocity[name] - lr * (grad + cfg.weight_decay * theta)
            updated = theta + v
        new_params[name] = updated
        new_velocity[name] = v

    return SGDState(params=new_params, velocity=new_velocity, eta_moments=new_moments)
