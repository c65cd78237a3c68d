"""Sequential composition of layer kernels."""
from __future__ import annotations

import numpy as np

from .layers import KERNELS, LayerSpec, init_params

Weights = list  # one {name: ndarray} dict per layer


def init_weights(net: list[LayerSpec], seed: int, dtype=np.float32) -> Weights:
    rng = np.random.default_rng(seed)
    return [init_params(spec, rng, dtype) for spec in net]


def zero_weights(net: list[LayerSpec], dtype=np.float32) -> Weights:
    rng = np.random.default_rng(0)
    return [{k: np.zeros_like(v) for k, v in init_params(spec, rng, dtype).items()}
            for spec in net]


def forward(net: list[LayerSpec], w: Weights, x, keep_cache: bool = False):
    """Run the stack; with ``keep_cache`` also return the per-layer caches."""
    out = np.asarray(x)
    out = out.astype(_dtype(w, out.dtype), copy=False)
    caches = []
    for spec, params in zip(net, w):
        out, cache = KERNELS[spec.kind][0](spec, params, out)
        caches.append(cache)
    return (out, caches) if keep_cache else out


def backward(net: list[LayerSpec], w: Weights, caches, grad_out):
    """Gradients for every parameter and for the network input."""
    grads = [None] * len(net)
    g = np.asarray(grad_out)
    g = g.astype(_dtype(w, g.dtype), copy=False)
    for idx in reversed(range(len(net))):
        spec = net[idx]
        grads[idx], g = KERNELS[spec.kind][1](spec, w[idx], caches[idx], g)
    return grads, g


def n_params(w: Weights) -> int:
    return sum(v.size for layer in w for v in layer.values())


def _dtype(w: Weights, fallback=np.float32):
    for layer in w:
        for v in layer.values():
            return v.dtype
    # parameter-free stacks keep a floating input's precision
    return fallback if np.issubdtype(fallback, np.floating) else np.float32
