"""Adam with bias correction and a piecewise-constant learning-rate plan."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Checkpoint, NumericError


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 128

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def step_schedule(breakpoints):
    """
    ``[(0, 1e-3), (200, 1e-4)]`` -> callable ``epoch -> lr`` holding each rate
    from its starting epoch until the next breakpoint.
    """
    points = sorted((int(e), float(lr)) for e, lr in breakpoints)
    if not points or points[0][0] != 0:
        raise ValueError("learning-rate plan must start at epoch 0")

    def lr_at(epoch: int) -> float:
        lr = points[0][1]
        for start, rate in points:
            if epoch >= start:
                lr = rate
        return lr

    return lr_at


def adam_step(ckpt: Checkpoint, grads, cfg: AdamConfig, t: int, state: AdamState,
              lr: float | None = None) -> Checkpoint:
    """
    One Adam update of every trainable array of ``ckpt``, in place.

    ``t`` is the 1-based step count used for bias correction and ``lr``
    overrides ``cfg.lr`` (the caller's schedule).
    """
    if t < 1:
        raise ValueError("Adam step count starts at 1")
    lr = cfg.lr if lr is None else lr
    for i, name, _ in ckpt.trainable():
        if not np.all(np.isfinite(grads[i][name])):
            raise NumericError(f"non-finite gradient in layer {i} ({ckpt.spec.layers[i].kind}.{name})")
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for i, name, param in ckpt.trainable():
        g = grads[i][name]
        key = (i, name)
        if key not in state.m:
            state.m[key] = np.zeros_like(param)
            state.v[key] = np.zeros_like(param)
        m, v = state.m[key], state.v[key]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        param -= (lr / bc1) * m / (np.sqrt(v / bc2) + cfg.epsilon)
    return ckpt
