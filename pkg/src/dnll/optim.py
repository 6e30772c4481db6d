"""SGD with classical momentum, coupled L2 decay and cosine annealing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .nn import Gradients, ModelState


@dataclass
class OptimizerConfig:
    """total_steps = 0 is a sentinel for "derive from the run length"; the
    trainer resolves it to a positive value before the first step."""

    base_lr: float = 0.03
    momentum: float = 0.9
    weight_decay: float = 5e-4
    total_steps: int = 0
    nesterov: bool = False

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if int(self.total_steps) < 0:
            raise ConfigError(f"total_steps must be >= 0, got {self.total_steps}")


def cosine_lr(step: int, cfg: OptimizerConfig) -> float:
    """Half-cosine schedule: base_lr at step 0, 0 at total_steps."""
    if cfg.total_steps < 1:
        raise ConfigError("total_steps is unresolved (must be positive)")
    if not 0 <= step <= cfg.total_steps:
        raise ConfigError(
            f"step {step} outside schedule range [0, {cfg.total_steps}]"
        )
    return cfg.base_lr * 0.5 * (1.0 + np.cos(np.pi * step / cfg.total_steps))


def sgd_step(model: ModelState, grads: Gradients, lr: float, cfg: OptimizerConfig) -> ModelState:
    """One in-place momentum update; returns the same (mutated) model.

    Weight decay is coupled: grad += weight_decay * param before the
    momentum buffer is advanced, matching classical SGD.
    """
    if len(grads.dw) != len(model.weights):
        raise ConfigError(
            f"gradient has {len(grads.dw)} layers, model has {len(model.weights)}"
        )
    for i, (gw, gb) in enumerate(zip(grads.dw, grads.db)):
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise NumericError(f"non-finite gradient in layer {i}")
        if gw.shape != model.weights[i].shape or gb.shape != model.biases[i].shape:
            raise ConfigError(f"gradient shape mismatch in layer {i}")
        gw = gw + cfg.weight_decay * model.weights[i]
        gb = gb + cfg.weight_decay * model.biases[i]
        model.vel_w[i] = cfg.momentum * model.vel_w[i] + gw
        model.vel_b[i] = cfg.momentum * model.vel_b[i] + gb
        if cfg.nesterov:
            step_w = gw + cfg.momentum * model.vel_w[i]
            step_b = gb + cfg.momentum * model.vel_b[i]
        else:
            step_w = model.vel_w[i]
            step_b = model.vel_b[i]
        model.weights[i] -= lr * step_w
        model.biases[i] -= lr * step_b
    return model
