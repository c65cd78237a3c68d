from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import NumericError
from .layers import LayerSpec
from .network import backward, forward, init_weights
from .optim import AdamState, adam_step, mse_loss

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch: int = 80
    epochs: int = 400
    seed: int = 0
    alpha: float = 0.001
    patience: int | None = None  # early stopping on validation loss; off by default
    dtype: type = np.float32
    loss_sink: Callable[[int, float, float | None], None] | None = None


@dataclass
class TrainResult:
    weights: list
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int | None = None


def evaluate_loss(net, w, x, y, batch: int = 1024) -> float:
    total = 0.0
    for lo in range(0, len(x), batch):
        pred = forward(net, w, x[lo:lo + batch])
        total += mse_loss(pred, y[lo:lo + batch])[0] * len(pred)
    return total / len(x)


def train(net: list[LayerSpec], data: tuple, cfg: TrainConfig,
          validation: tuple | None = None, weights=None) -> TrainResult:
    """Mini-batch Adam on MSE. ``data`` and ``validation`` are ``(x, y)`` arrays.

    Shuffling and initialization draw from independent streams of ``cfg.seed``.
    """
    x, y = data
    if len(x) == 0:
        raise ValueError("training data is empty")
    x = np.asarray(x, dtype=cfg.dtype)
    y = np.asarray(y, dtype=cfg.dtype).reshape(len(x), -1)
    init_seed, shuffle_seed = np.random.SeedSequence(cfg.seed).generate_state(2)
    w = weights if weights is not None else init_weights(net, int(init_seed), cfg.dtype)
    rng = np.random.default_rng(int(shuffle_seed))
    state = AdamState(alpha=cfg.alpha)
    result = TrainResult(w)
    best = (np.inf, None, 0)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x))
        running = 0.0
        for lo in range(0, len(x), cfg.batch):
            idx = order[lo:lo + cfg.batch]
            pred, caches = forward(net, w, x[idx], keep_cache=True)
            loss, grad = mse_loss(pred, y[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss {loss} at epoch {epoch}, batch offset {lo}")
            grads, _ = backward(net, w, caches, grad)
            adam_step(state, w, grads)
            running += loss * len(idx)
        result.train_loss.append(running / len(x))
        val = None
        if validation is not None and len(validation[0]):
            val = evaluate_loss(net, w, np.asarray(validation[0], dtype=cfg.dtype),
                                np.asarray(validation[1], dtype=cfg.dtype).reshape(len(validation[0]), -1))
            result.val_loss.append(val)
        if cfg.loss_sink is not None:
            cfg.loss_sink(epoch, result.train_loss[-1], val)
        if cfg.patience is not None and val is not None:
            if val < best[0]:
                best = (val, [{k: v.copy() for k, v in layer.items()} for layer in w], epoch)
            elif epoch - best[2] >= cfg.patience:
                log.info("early stop at epoch %d (best %d)", epoch, best[2])
                break
    if cfg.patience is not None and best[1] is not None:
        result.weights = best[1]
        result.best_epoch = best[2]
    return result
