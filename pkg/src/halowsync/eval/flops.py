"""Approximate FLOP counts for the networks and the conventional receiver.

Conventions (integer arithmetic throughout):

* conv1d, filter length F, K output positions:
  MUL = F*ch_i*ch_o*K, ADD = F*(ch_i+1)*ch_o*K
* dense: MUL = N_i*N_o, ADD = (N_i+1)*N_o
* simple recurrent cell with U units and NF input features:
  MUL = U^2 + NF*U + 2U, ADD = U^2 + NF*U + U; LSTM counts 4 cells, GRU 3.
  One time-step pass is counted per inference.
* activations and gate nonlinearities are free.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..nn import LayerSpec

CELL_MULTIPLIER = {"simple": 1, "gru": 3, "lstm": 4}

# Reference per-inference totals for the CFO estimators
PUBLISHED_CFO_FLOPS = {"conventional": 224, "lstm": 11_651, "gru": 8_738, "dnn": 16_209}


@dataclass(frozen=True)
class FlopCount:
    mul: int = 0
    add: int = 0

    @property
    def total(self) -> int:
        return self.mul + self.add

    def __add__(self, other: "FlopCount") -> "FlopCount":
        return FlopCount(self.mul + other.mul, self.add + other.add)

    def scale(self, k: int) -> "FlopCount":
        return FlopCount(self.mul * k, self.add * k)


@dataclass(frozen=True)
class FlopsQuery:
    """One layer, described by the symbols of the complexity formulas."""

    kind: str  # conv1d | dense | simple | lstm | gru | free
    F: int = 0
    ch_i: int = 0
    ch_o: int = 0
    K: int = 0
    N_i: int = 0
    N_o: int = 0
    U: int = 0
    NF: int = 0

    @classmethod
    def from_layer(cls, spec: LayerSpec, input_len: int | None = None) -> "FlopsQuery":
        """``input_len`` is the conv input length; K = input_len - F + 1."""
        if spec.kind == "dense":
            return cls("dense", N_i=spec.n_in, N_o=spec.n_out)
        if spec.kind == "conv1d":
            if input_len is None:
                raise ValueError("conv1d needs the input length")
            return cls("conv1d", F=spec.filter_len, ch_i=spec.in_channels,
                       ch_o=spec.out_channels, K=input_len - spec.filter_len + 1)
        if spec.kind in ("lstm", "gru"):
            return cls(spec.kind, U=spec.units, NF=spec.features)
        return cls("free")


def layer_flops(q: FlopsQuery) -> FlopCount:
    if q.kind == "conv1d":
        return FlopCount(q.F * q.ch_i * q.ch_o * q.K, q.F * (q.ch_i + 1) * q.ch_o * q.K)
    if q.kind == "dense":
        return FlopCount(q.N_i * q.N_o, (q.N_i + 1) * q.N_o)
    if q.kind in CELL_MULTIPLIER:
        U, NF = q.U, q.NF
        cell = FlopCount(U * U + NF * U + 2 * U, U * U + NF * U + U)
        return cell.scale(CELL_MULTIPLIER[q.kind])
    if q.kind == "free":
        return FlopCount()
    raise ValueError(f"unknown layer kind {q.kind!r}")


@dataclass(frozen=True)
class FlopsBreakdown:
    items: tuple[tuple[str, FlopCount], ...]

    @property
    def count(self) -> FlopCount:
        out = FlopCount()
        for _, c in self.items:
            out = out + c
        return out

    @property
    def total(self) -> int:
        return self.count.total

    def table(self) -> str:
        rows = [f"{'item':<28}{'MUL':>9}{'ADD':>9}{'total':>9}"]
        rows += [f"{name:<28}{c.mul:>9}{c.add:>9}{c.total:>9}" for name, c in self.items]
        c = self.count
        rows.append(f"{'total':<28}{c.mul:>9}{c.add:>9}{c.total:>9}")
        return "\n".join(rows)


def network_flops(net: list[LayerSpec], input_len: int | None = None) -> FlopsBreakdown:
    """Itemized per-inference cost; ``input_len`` seeds conv output lengths."""
    items = []
    length = input_len
    for i, spec in enumerate(net):
        q = FlopsQuery.from_layer(spec, length)
        if q.kind == "free":
            continue
        if q.kind == "conv1d":
            length = q.K
        items.append((f"{i}:{spec.kind}", layer_flops(q)))
    return FlopsBreakdown(tuple(items))


def conventional_cfo_flops() -> FlopsBreakdown:
    """Real-operation tally of the two-stage correlation estimator.

    Counts one STS-pair correlation for the coarse stage, compensation and
    correlation over one LTS for the fine stage, and the two phase-to-Hz
    scalings with the final sum. Angle evaluation is treated as free.
    """
    return FlopsBreakdown((
        ("coarse correlation", FlopCount(16, 16)),
        ("coarse compensation", FlopCount(64, 0)),
        ("fine correlation", FlopCount(64, 64)),
        ("scaling and sum", FlopCount(2, 1)),
    ))


def cfo_model_flops(kind: str) -> FlopsBreakdown:
    from ..models import CfoModel
    if kind == "conventional":
        return conventional_cfo_flops()
    return network_flops(CfoModel(kind).net)


def detector_block_flops(block_len: int) -> FlopsBreakdown:
    from ..models import DETECTOR_CHANNELS, detector_net
    return network_flops(detector_net(block_len), block_len // DETECTOR_CHANNELS)


# Incremental sliding-window update per input sample, in real operations:
# new lag product (complex mul 4 MUL + 2 ADD), add/drop terms of Lambda (4 ADD),
# |y|^2 (2 MUL + 1 ADD), add/drop terms of P (2 ADD), |Lambda|^2 (2 MUL + 1 ADD),
# P^2 (1 MUL) and the normalising division (counted as 1 MUL).
CONVENTIONAL_DETECTOR_PER_SAMPLE = FlopCount(10, 10)


def detector_throughput_flops(per_block: int | FlopCount | None, block_len: int,
                              sample_rate: float = 1e6) -> float:
    """FLOPs per second of stream: per-block cost times blocks per second.

    ``per_block=None`` gives the conventional baseline, which is independent
    of ``block_len``; its fine-timing stage is ignored.
    """
    if per_block is None:
        return CONVENTIONAL_DETECTOR_PER_SAMPLE.total * sample_rate
    total = per_block.total if isinstance(per_block, FlopCount) else int(per_block)
    return total * sample_rate / block_len


def relative_discrepancy(ours: int, reference: int) -> float:
    return (ours - reference) / reference
