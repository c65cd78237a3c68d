"""Small numpy neural-network engine: dense, conv1d, LSTM, GRU, Adam."""
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import LayerSpec, init_params, param_shapes
from .network import backward, forward, init_weights, n_params, zero_weights
from .optim import AdamState, adam_step, mse_loss
from .train import TrainConfig, TrainResult, evaluate_loss, train

__all__ = [
    "AdamState", "LayerSpec", "TrainConfig", "TrainResult", "adam_step", "backward",
    "evaluate_loss", "forward", "init_params", "init_weights", "load_checkpoint",
    "mse_loss", "n_params", "param_shapes", "save_checkpoint", "train", "zero_weights",
]
