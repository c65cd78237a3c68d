from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Sum of squared errors over the batch divided by batch size, and its gradient."""
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype).reshape(pred.shape)
    batch = pred.shape[0]
    diff = pred - target
    return float(np.sum(diff.astype(np.float64) ** 2) / batch), 2.0 * diff / batch


@dataclass
class AdamState:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state: AdamState, w, grads):
    """In-place bias-corrected Adam update; returns ``w``."""
    if not state.m:
        state.m = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in w]
        state.v = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in w]
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for layer, grad, m, v in zip(w, grads, state.m, state.v):
        for name, theta in layer.items():
            g = grad[name]
            m[name] *= state.beta1
            m[name] += (1.0 - state.beta1) * g
            v[name] *= state.beta2
            v[name] += (1.0 - state.beta2) * g * g
            m_hat = m[name] / c1
            v_hat = v[name] / c2
            theta -= (state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)).astype(theta.dtype)
    return w
