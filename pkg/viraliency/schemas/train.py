"""
Optimizer and training-loop schema.

Defaults: SGD with momentum 0.9,
weight decay 0.05, step policy x0.1 every 5000 iterations, base lr 1e-4.
"""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class TrainConfig(BaseModel):
    """SGD, learning-rate policy and loop settings."""

    model_config = ConfigDict(extra="forbid")

    base_lr: float = Field(default=1e-4, gt=0.0, description="Base learning rate")
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0, description="Classical momentum mu")
    weight_decay: float = Field(
        default=0.05,
        ge=0.0,
        description="L2 weight decay lambda (never applied to eta)"
    )
    lr_step_every: int = Field(default=5000, ge=1, description="Iterations between lr steps")
    lr_step_factor: float = Field(
        default=0.1,
        gt=0.0,
        le=1.0,
        description="Multiplicative lr factor applied at every step"
    )
    max_iters: int = Field(default=10000, ge=0, description="SGD iterations")
    batch_size: int = Field(default=16, ge=1, description="Pairs per iteration")
    eta_lr_multiplier: float = Field(
        default=1.0,
        gt=0.0,
        description="Learning-rate multiplier for eta"
    )
    eta_update: Literal["sgd", "adaptive"] = Field(
        default="sgd",
        description="eta step: momentum SGD, or normalised by running gradient moments"
    )
    eta_beta1: float = Field(default=0.9, ge=0.0, lt=1.0, description="Adaptive eta first-moment decay")
    eta_beta2: float = Field(default=0.999, ge=0.0, lt=1.0, description="Adaptive eta second-moment decay")
    seed: int = Field(
        default=0,
        ge=0,
        lt=2**64,
        description="Seed for initialisation and shuffling"
    )
    eta_snapshot_every: int = Field(
        default=100,
        ge=1,
        description="Iterations between recorded eta snapshots"
    )
    log_every: int = Field(default=100, ge=1, description="Iterations between progress logs")
    freeze_front_end: bool = Field(
        default=False,
        description="Train only the pooling eta and the inner product"
    )
    grad_chunks: int = Field(
        default=4,
        ge=1,
        description="Fixed number of ordered gradient-reduction chunks per batch"
    )
