"""Central finite-difference oracle for layer gradients (double precision)."""
import numpy as np

from halowsync.nn import LayerSpec, backward, forward, init_weights

STEP = 1e-4
KINDS = ("dense", "relu", "conv1d", "lstm", "gru")


def random_instance(kind: str, rng: np.random.Generator):
    """A small random layer plus a matching input batch."""
    b = int(rng.integers(1, 4))
    if kind == "dense":
        n_in = int(rng.integers(1, 6))
        return LayerSpec.dense(n_in, int(rng.integers(1, 6))), rng.standard_normal((b, n_in))
    if kind == "relu":
        x = rng.standard_normal((b, 5))
        # keep clear of the kink so the finite difference sees one branch
        x = np.where(np.abs(x) < 0.05, 0.5, x)
        return LayerSpec.relu(), x
    if kind == "conv1d":
        F, ci, co = (int(v) for v in rng.integers(1, 5, size=3))
        width = F + int(rng.integers(0, 5))
        return LayerSpec.conv1d(F, ci, co), rng.standard_normal((b, ci, width))
    if kind in ("lstm", "gru"):
        U, NF, T = int(rng.integers(1, 6)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        spec = LayerSpec.lstm(U, NF, T) if kind == "lstm" else LayerSpec.gru(U, NF, T)
        return spec, rng.standard_normal((b, T, NF))
    raise ValueError(kind)


def _rel(a, n):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)


def max_relative_error(spec: LayerSpec, x: np.ndarray, seed: int) -> float:
    """Worst relative error over every parameter and input element."""
    net = [spec]
    w = init_weights(net, seed, np.float64)
    rng = np.random.default_rng(seed + 1)
    out, caches = forward(net, w, x, keep_cache=True)
    g = rng.standard_normal(out.shape)
    grads, dx = backward(net, w, caches, g)

    def objective():
        return float(np.sum(forward(net, w, x) * g))

    worst = 0.0
    for name, theta in w[0].items():
        num = np.zeros_like(theta)
        for idx in np.ndindex(theta.shape):
            keep = theta[idx]
            theta[idx] = keep + STEP
            up = objective()
            theta[idx] = keep - STEP
            down = objective()
            theta[idx] = keep
            num[idx] = (up - down) / (2 * STEP)
        worst = max(worst, float(_rel(grads[0][name], num).max()))
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        keep = x[idx]
        x[idx] = keep + STEP
        up = objective()
        x[idx] = keep - STEP
        down = objective()
        x[idx] = keep
        num[idx] = (up - down) / (2 * STEP)
    return max(worst, float(_rel(dx, num).max()))
