"""Adam updates with bias correction.

The denominator is sqrt(v_hat) + eps, with eps outside the square root, so a
unit gradient at t = 1 moves a parameter by exactly alpha / (1 + eps).
"""

from __future__ import annotations

from typing import Dict

import numpy as np


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: dict,
    t: int,
    alpha: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place Adam update; state holds first/second moments per name."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    m_state = state.setdefault("m", {})
    v_state = state.setdefault("v", {})
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"{name}: grad shape {g.shape} != param shape {p.shape}")
        if name not in m_state:
            m_state[name] = np.zeros_like(p)
            v_state[name] = np.zeros_like(p)
        m = m_state[name]
        v = v_state[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= alpha * (m / bc1) / (np.sqrt(v / bc2) + eps)


class Adam:
    """Stateful wrapper tracking moments and the step counter."""

    def __init__(self, alpha: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("beta1 and beta2 must be in (0, 1)")
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state: dict = {}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        adam_step(params, grads, self.state, self.t,
                  alpha=self.alpha, beta1=self.beta1, beta2=self.beta2, eps=self.eps)
