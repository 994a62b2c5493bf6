"""Bias-corrected ADAM, written as a pure state transition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidConfigurationError


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidConfigurationError("ADAM learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidConfigurationError("ADAM betas must lie in [0, 1)")
        if self.eps < 0:
            raise InvalidConfigurationError("ADAM eps must be non-negative")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0)


def adam_step(state: AdamState, grad: np.ndarray, cfg: AdamConfig = AdamConfig()):
    """Return ``(new_state, step)``; the caller applies ``x += step``."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.m.shape:
        raise ValueError(f"gradient shape {grad.shape} != state shape {state.m.shape}")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (grad * grad)
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    step = -cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return AdamState(m, v, t), step
