"""Layer kernels: forward returns ``(out, cache)``, backward returns ``(grads, dx)``.

Shapes are batch-first:

* dense   (B, ...) -> (B, n_out); trailing input dims are flattened
* conv1d  (B, ch_in, W) -> (B, ch_out, W - F + 1), stride 1, no padding
* lstm/gru (B, T, NF) -> (B, U), the final hidden state
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KINDS = ("dense", "relu", "tanh", "conv1d", "lstm", "gru")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    n_in: int = 0
    n_out: int = 0
    filter_len: int = 0
    in_channels: int = 0
    out_channels: int = 0
    units: int = 0
    features: int = 0
    steps: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        need = {"dense": ("n_in", "n_out"),
                "conv1d": ("filter_len", "in_channels", "out_channels"),
                "lstm": ("units", "features", "steps"),
                "gru": ("units", "features", "steps")}.get(self.kind, ())
        for name in need:
            if getattr(self, name) <= 0:
                raise ValueError(f"{self.kind} layer needs positive {name}")

    @classmethod
    def dense(cls, n_in, n_out):
        return cls("dense", n_in=n_in, n_out=n_out)

    @classmethod
    def conv1d(cls, filter_len, in_channels, out_channels):
        return cls("conv1d", filter_len=filter_len, in_channels=in_channels,
                   out_channels=out_channels)

    @classmethod
    def relu(cls):
        return cls("relu")

    @classmethod
    def tanh(cls):
        return cls("tanh")

    @classmethod
    def lstm(cls, units, features, steps):
        return cls("lstm", units=units, features=features, steps=steps)

    @classmethod
    def gru(cls, units, features, steps):
        return cls("gru", units=units, features=features, steps=steps)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k == "kind" or v}


def param_shapes(spec: LayerSpec) -> dict[str, tuple[int, ...]]:
    k = spec.kind
    if k == "dense":
        return {"W": (spec.n_out, spec.n_in), "b": (spec.n_out,)}
    if k == "conv1d":
        return {"W": (spec.out_channels, spec.in_channels, spec.filter_len),
                "b": (spec.out_channels,)}
    if k in ("lstm", "gru"):
        g = (4 if k == "lstm" else 3) * spec.units
        return {"W_ih": (g, spec.features), "W_hh": (g, spec.units),
                "b_ih": (g,), "b_hh": (g,)}
    return {}


def fan_in(spec: LayerSpec) -> int:
    if spec.kind == "dense":
        return spec.n_in
    if spec.kind == "conv1d":
        return spec.in_channels * spec.filter_len
    return spec.units


def init_params(spec: LayerSpec, rng: np.random.Generator, dtype=np.float32) -> dict:
    """Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)); LSTM forget-gate bias starts at 1."""
    bound = np.sqrt(1.0 / fan_in(spec)) if param_shapes(spec) else 0.0
    params = {name: rng.uniform(-bound, bound, size=shape).astype(dtype)
              for name, shape in param_shapes(spec).items()}
    if spec.kind == "lstm":
        u = spec.units
        params["b_ih"][u:2 * u] = 1.0
        params["b_hh"][u:2 * u] = 0.0
    return params


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# -- dense ---------------------------------------------------------------

def dense_forward(spec, p, x):
    flat = x.reshape(x.shape[0], -1)
    if flat.shape[1] != spec.n_in:
        raise ValueError(f"dense expects {spec.n_in} inputs, got {flat.shape[1]}")
    return flat @ p["W"].T + p["b"], (flat, x.shape)


def dense_backward(spec, p, cache, g):
    flat, shape = cache
    return {"W": g.T @ flat, "b": g.sum(axis=0)}, (g @ p["W"]).reshape(shape)


# -- elementwise ---------------------------------------------------------

def relu_forward(spec, p, x):
    mask = x > 0
    return x * mask, mask


def relu_backward(spec, p, mask, g):
    return {}, g * mask


def tanh_forward(spec, p, x):
    y = np.tanh(x)
    return y, y


def tanh_backward(spec, p, y, g):
    return {}, g * (1.0 - y * y)


# -- conv1d --------------------------------------------------------------

def conv1d_forward(spec, p, x):
    if x.ndim != 3 or x.shape[1] != spec.in_channels:
        raise ValueError(f"conv1d expects (B, {spec.in_channels}, W), got {x.shape}")
    if x.shape[2] < spec.filter_len:
        raise ValueError("conv1d input narrower than the filter")
    win = sliding_window_view(x, spec.filter_len, axis=2)  # (B, ci, K, F)
    out = np.einsum("bikf,oif->bok", win, p["W"], optimize=True) + p["b"][None, :, None]
    return out, x


def conv1d_backward(spec, p, x, g):
    win = sliding_window_view(x, spec.filter_len, axis=2)
    dW = np.einsum("bok,bikf->oif", g, win, optimize=True)
    db = g.sum(axis=(0, 2))
    K = g.shape[2]
    dx = np.zeros_like(x)
    for f in range(spec.filter_len):
        dx[:, :, f:f + K] += np.einsum("bok,oi->bik", g, p["W"][:, :, f], optimize=True)
    return {"W": dW, "b": db}, dx


# -- recurrent -----------------------------------------------------------

def _check_seq(spec, x):
    if x.ndim != 3 or x.shape[2] != spec.features:
        raise ValueError(f"{spec.kind} expects (B, T, {spec.features}), got {x.shape}")


def lstm_forward(spec, p, x):
    """Gate order i, f, g, o (input, forget, candidate, output)."""
    _check_seq(spec, x)
    B, T, _ = x.shape
    U = spec.units
    h = np.zeros((B, U), dtype=x.dtype)
    c = np.zeros((B, U), dtype=x.dtype)
    xw = x @ p["W_ih"].T + (p["b_ih"] + p["b_hh"])  # (B, T, 4U)
    steps = []
    for t in range(T):
        a = xw[:, t] + h @ p["W_hh"].T
        i = _sigmoid(a[:, :U])
        f = _sigmoid(a[:, U:2 * U])
        gg = np.tanh(a[:, 2 * U:3 * U])
        o = _sigmoid(a[:, 3 * U:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * gg
        tc = np.tanh(c)
        h = o * tc
        steps.append((h_prev, c_prev, i, f, gg, o, tc))
    return h, (x, steps)


def lstm_backward(spec, p, cache, g):
    x, steps = cache
    U = spec.units
    dW_ih = np.zeros_like(p["W_ih"])
    dW_hh = np.zeros_like(p["W_hh"])
    db = np.zeros_like(p["b_ih"])
    dx = np.zeros_like(x)
    dh = g
    dc = np.zeros_like(g)
    for t in reversed(range(len(steps))):
        h_prev, c_prev, i, f, gg, o, tc = steps[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * gg
        df = dc * c_prev
        dg = dc * i
        da = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                             dg * (1 - gg * gg), do * o * (1 - o)], axis=1)
        dW_ih += da.T @ x[:, t]
        dW_hh += da.T @ h_prev
        db += da.sum(axis=0)
        dx[:, t] = da @ p["W_ih"]
        dh = da @ p["W_hh"]
        dc = dc * f
    return {"W_ih": dW_ih, "W_hh": dW_hh, "b_ih": db, "b_hh": db.copy()}, dx


def gru_forward(spec, p, x):
    """Gate order r, z, n; h' = (1 - z) * n + z * h."""
    _check_seq(spec, x)
    B, T, _ = x.shape
    U = spec.units
    h = np.zeros((B, U), dtype=x.dtype)
    xw = x @ p["W_ih"].T + p["b_ih"]
    steps = []
    for t in range(T):
        hw = h @ p["W_hh"].T + p["b_hh"]
        r = _sigmoid(xw[:, t, :U] + hw[:, :U])
        z = _sigmoid(xw[:, t, U:2 * U] + hw[:, U:2 * U])
        n = np.tanh(xw[:, t, 2 * U:] + r * hw[:, 2 * U:])
        h_prev = h
        h = (1 - z) * n + z * h_prev
        steps.append((h_prev, r, z, n, hw[:, 2 * U:]))
    return h, (x, steps)


def gru_backward(spec, p, cache, g):
    x, steps = cache
    U = spec.units
    dW_ih = np.zeros_like(p["W_ih"])
    dW_hh = np.zeros_like(p["W_hh"])
    db_ih = np.zeros_like(p["b_ih"])
    db_hh = np.zeros_like(p["b_hh"])
    dx = np.zeros_like(x)
    dh = g
    for t in reversed(range(len(steps))):
        h_prev, r, z, n, hn = steps[t]
        dn = dh * (1 - z)
        dz = dh * (h_prev - n)
        dh_next = dh * z
        dan = dn * (1 - n * n)           # pre-activation of n
        dr = dan * hn
        dar = dr * r * (1 - r)
        daz = dz * z * (1 - z)
        dxa = np.concatenate([dar, daz, dan], axis=1)       # input-side pre-activations
        dha = np.concatenate([dar, daz, dan * r], axis=1)   # hidden-side pre-activations
        dW_ih += dxa.T @ x[:, t]
        db_ih += dxa.sum(axis=0)
        dW_hh += dha.T @ h_prev
        db_hh += dha.sum(axis=0)
        dx[:, t] = dxa @ p["W_ih"]
        dh = dh_next + dha @ p["W_hh"]
    return {"W_ih": dW_ih, "W_hh": dW_hh, "b_ih": db_ih, "b_hh": db_hh}, dx


KERNELS = {
    "dense": (dense_forward, dense_backward),
    "relu": (relu_forward, relu_backward),
    "tanh": (tanh_forward, tanh_backward),
    "conv1d": (conv1d_forward, conv1d_backward),
    "lstm": (lstm_forward, lstm_backward),
    "gru": (gru_forward, gru_backward),
}
