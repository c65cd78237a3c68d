"""The detector CNN and the two CFO regressors, with their input/output conventions.

Detector: an amplitude block of B samples is RMS-normalized and folded into
4 channels (polyphase by default: sample n -> channel n % 4, position n // 4).
Its regression target is tau_S / B in [0, 1), or -1 when the block holds no
packet start; outputs below -0.5 decode to "no packet".

CFO heads: the 160 STF phases are scaled by 1/pi. The target is
f_off / (delta_f / 2), and predictions are clipped to +-``output_clip`` before
being mapped back to Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .nn import LayerSpec, forward, load_checkpoint, save_checkpoint, zero_weights

SUPPORTED_BLOCKS = (40, 80, 160, 320, 800, 1600)
DETECTOR_CHANNELS = 4
STF_LEN = 160
STS_LEN = 16
SUBCARRIER_SPACING = 31_250.0
CFO_SCALE = SUBCARRIER_SPACING / 2


@dataclass(frozen=True)
class LabelCodec:
    block_len: int
    no_packet_code: float = -1.0
    decision: float = -0.5

    def encode(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=np.float64)
        if np.any(tau >= self.block_len):
            raise ValueError("label outside the block")
        return np.where(tau < 0, self.no_packet_code, tau / self.block_len)

    def decode(self, value) -> np.ndarray:
        """-1 for "no packet", else the start index clamped into the block."""
        value = np.asarray(value, dtype=np.float64)
        tau = np.clip(np.floor(value * self.block_len + 0.5), 0, self.block_len - 1)
        return np.where(value < self.decision, -1, tau).astype(np.int64)


def detector_net(block_len: int, channels: int = DETECTOR_CHANNELS) -> list[LayerSpec]:
    width = block_len // channels
    k1, k2 = width - 7, width - 9
    if block_len % channels or k2 < 1:
        raise ValueError(f"block length {block_len} too short for the detector CNN")
    net = [LayerSpec.conv1d(8, channels, 9), LayerSpec.relu(),
           LayerSpec.conv1d(3, 9, 5), LayerSpec.relu(),
           LayerSpec.dense(5 * k2, 3), LayerSpec.relu(),
           LayerSpec.dense(3, 1)]
    assert net[4].n_in == 5 * (block_len // 4 - 9) and k1 == block_len // 4 - 7
    return net


def cfo_dnn_net() -> list[LayerSpec]:
    return [LayerSpec.dense(160, 32), LayerSpec.relu(),
            LayerSpec.dense(32, 64), LayerSpec.relu(),
            LayerSpec.dense(64, 16), LayerSpec.relu(),
            LayerSpec.dense(16, 1)]


def cfo_rnn_net(cell: str = "lstm", units: int = 30, head: tuple[int, ...] = (5,)) -> list[LayerSpec]:
    steps, feats = STF_LEN // STS_LEN, STS_LEN
    rec = LayerSpec.lstm(units, feats, steps) if cell == "lstm" else LayerSpec.gru(units, feats, steps)
    net, prev = [rec], units
    for n in head:
        net += [LayerSpec.dense(prev, n), LayerSpec.relu()]
        prev = n
    return net + [LayerSpec.dense(prev, 1)]


def detector_inputs(blocks, channels: int = DETECTOR_CHANNELS, mapping: str = "polyphase") -> np.ndarray:
    """(n, B) amplitudes -> (n, channels, B / channels), RMS-normalized per block."""
    blocks = np.atleast_2d(np.asarray(blocks, dtype=np.float64))
    rms = np.sqrt(np.mean(blocks ** 2, axis=1, keepdims=True))
    blocks = blocks / np.where(rms > 0, rms, 1.0)
    n, B = blocks.shape
    if mapping == "polyphase":
        return blocks.reshape(n, B // channels, channels).transpose(0, 2, 1)
    if mapping == "contiguous":
        return blocks.reshape(n, channels, B // channels)
    raise ValueError(f"unknown channel mapping {mapping!r}")


def cfo_inputs(phases, kind: str) -> np.ndarray:
    phases = np.atleast_2d(np.asarray(phases, dtype=np.float64))
    if phases.shape[1] != STF_LEN:
        raise ValueError(f"expected {STF_LEN} STF phases, got {phases.shape[1]}")
    x = phases / math.pi
    if kind == "dnn":
        return x
    return x.reshape(len(x), STF_LEN // STS_LEN, STS_LEN)


@dataclass
class DetectorModel:
    block_len: int
    weights: list | None = None
    mapping: str = "polyphase"
    net: list = field(init=False)

    def __post_init__(self):
        if self.block_len not in SUPPORTED_BLOCKS:
            raise ValueError(f"block length must be one of {SUPPORTED_BLOCKS}")
        self.net = detector_net(self.block_len)
        if self.weights is None:
            self.weights = zero_weights(self.net)
        self.codec = LabelCodec(self.block_len)

    kind = "detector"

    def inputs(self, blocks) -> np.ndarray:
        blocks = np.atleast_2d(blocks)
        if blocks.shape[1] != self.block_len:
            raise ValueError(f"block length {blocks.shape[1]} != model block length {self.block_len}")
        return detector_inputs(blocks, mapping=self.mapping)

    def targets(self, labels) -> np.ndarray:
        return self.codec.encode(labels)[:, None]

    def raw(self, blocks) -> np.ndarray:
        return forward(self.net, self.weights, self.inputs(blocks))[:, 0]

    def predict(self, blocks) -> np.ndarray:
        """Decoded start indices, -1 where no packet is declared."""
        return self.codec.decode(self.raw(blocks))

    def meta(self) -> dict:
        return {"model_kind": self.kind, "block_len": self.block_len, "mapping": self.mapping}


@dataclass
class CfoModel:
    """ReLU DNN (``kind='dnn'``) or recurrent (``'lstm'`` / ``'gru'``) CFO regressor."""

    kind: str = "lstm"
    weights: list | None = None
    output_clip: float = 1.0
    net: list = field(init=False)

    def __post_init__(self):
        if self.kind == "dnn":
            self.net = cfo_dnn_net()
        elif self.kind in ("lstm", "gru"):
            self.net = cfo_rnn_net(self.kind)
        else:
            raise ValueError(f"unknown CFO model kind {self.kind!r}")
        if self.weights is None:
            self.weights = zero_weights(self.net)

    block_len = STF_LEN

    def inputs(self, phases) -> np.ndarray:
        return cfo_inputs(phases, "dnn" if self.kind == "dnn" else "rnn")

    def targets(self, cfo_hz) -> np.ndarray:
        return (np.asarray(cfo_hz, dtype=np.float64) / CFO_SCALE)[:, None]

    def raw(self, phases) -> np.ndarray:
        return forward(self.net, self.weights, self.inputs(phases))[:, 0]

    def predict(self, phases) -> np.ndarray:
        """CFO in Hz."""
        out = np.clip(self.raw(phases).astype(np.float64), -self.output_clip, self.output_clip)
        return out * CFO_SCALE

    def meta(self) -> dict:
        return {"model_kind": self.kind, "block_len": STF_LEN, "output_clip": self.output_clip}


def detector_infer(model: DetectorModel, block) -> tuple[bool, int | None]:
    tau = int(model.predict(np.asarray(block)[None, :])[0])
    return (tau >= 0, tau if tau >= 0 else None)


def cfo_infer(model: CfoModel, stf_phase) -> float:
    return float(model.predict(np.asarray(stf_phase)[None, :])[0])


def build_training_view(model, records) -> tuple[np.ndarray, np.ndarray]:
    """(inputs, targets) for a record set, using the model's inference transforms."""
    return model.inputs(records.payload), model.targets(records.label)


def save_model(stem, model, extra: dict | None = None):
    return save_checkpoint(stem, model.net, model.weights, {**model.meta(), **(extra or {})})


def load_model(stem, expect_block_len: int | None = None):
    net, w, meta = load_checkpoint(stem)
    kind = meta.get("model_kind")
    if kind == "detector":
        model = DetectorModel(int(meta["block_len"]), w, meta.get("mapping", "polyphase"))
    elif kind in ("dnn", "lstm", "gru"):
        model = CfoModel(kind, w, float(meta.get("output_clip", 1.0)))
    else:
        raise FormatError(f"checkpoint has unknown model_kind {kind!r}")
    if [s.to_dict() for s in model.net] != [s.to_dict() for s in net]:
        raise FormatError("checkpoint architecture does not match its model_kind")
    if expect_block_len is not None and model.block_len != expect_block_len:
        raise ValueError(f"checkpoint is for block length {model.block_len}, "
                         f"data has {expect_block_len}")
    return model, meta
