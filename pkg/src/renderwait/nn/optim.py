"""Adam with bias correction and a step-halving learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from .core import Tensor


@dataclass(frozen=True)
class TrainConfig:
    lr_initial: float = 0.01
    lr_halve_every: int = 10  # epochs
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 20
    batch_size: int = 32
    rng_seed: int = 0

    def __post_init__(self):
        if self.lr_initial <= 0 or self.lr_halve_every <= 0 or self.adam_eps <= 0:
            raise ValueError("rates must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    return cfg.lr_initial * 0.5 ** (epoch // cfg.lr_halve_every)


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0


def adam_step(params: list[Tensor], state: AdamState, cfg: TrainConfig, t: int, lr: float | None = None) -> AdamState:
    """One Adam update of every parameter in place, using ``param.grad``."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    lr = cfg.lr_initial if lr is None else lr
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1, c2 = 1 - b1**t, 1 - b2**t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        if g is None or g.shape != p.data.shape or m.shape != p.data.shape:
            raise ShapeMismatch(f"gradient/state shape does not match parameter {p.data.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)).astype(p.data.dtype)
    state.t = t
    return state
