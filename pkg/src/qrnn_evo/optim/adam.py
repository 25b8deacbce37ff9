"""Adam with bias correction, defaults as in torch.optim.Adam."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import OptimizationError


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.03
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, dim: int, **hyper) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), **hyper)


def adam_step(state: AdamState, theta, grad) -> tuple[AdamState, np.ndarray]:
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if grad.shape != theta.shape:
        raise OptimizationError(f"gradient shape {grad.shape} != parameter shape {theta.shape}")
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad)).tolist()
        raise OptimizationError(f"non-finite gradient at step {state.t + 1}, components {bad}")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    bias1 = 1 - state.beta1**t
    bias2 = 1 - state.beta2**t
    denom = np.sqrt(v) / np.sqrt(bias2) + state.eps
    theta = theta - (state.lr / bias1) * m / denom
    return replace(state, m=m, v=v, t=t), theta
