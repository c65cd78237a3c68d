"""Error metrics for detection and CFO predictions, binned by SNR."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SnrBin:
    snr_db: float  # lower bin edge
    n: int
    mae: float
    miss_rate: float = 0.0
    false_alarm_rate: float = 0.0


@dataclass
class MetricsReport:
    """Per-SNR and overall error figures for one test set.

    ``mae`` is in samples for detection and Hz for CFO. Empty bins carry
    ``n = 0`` and a NaN MAE so the bins always tile the tested SNR range.
    """

    task: str
    bins: list[SnrBin]
    overall_mae: float
    miss_rate: float = 0.0
    false_alarm_rate: float = 0.0
    n_records: int = 0
    config_hash: str = ""
    outliers: int = 0
    scatter: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        for rate in (self.miss_rate, self.false_alarm_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("rates must lie in [0, 1]")

    @property
    def mae_by_snr(self) -> dict[float, float]:
        return {b.snr_db: b.mae for b in self.bins}


def _edges(snr: np.ndarray, width: float) -> np.ndarray:
    """Lower edges of the bins tiling the tested range; noiseless sets get one +inf bin."""
    finite = snr[np.isfinite(snr)]
    if finite.size == 0:
        return np.array([math.inf]) if snr.size else np.zeros(0)
    lo = math.floor(finite.min() / width) * width
    hi = math.floor(finite.max() / width) * width
    return lo + width * np.arange(int(round((hi - lo) / width)) + 1)


def _bin_index(snr: np.ndarray, edges: np.ndarray, width: float) -> np.ndarray:
    """Bin of each record; non-finite SNRs (noiseless) go to the top bin."""
    if edges.size == 0 or not np.isfinite(edges[0]):
        return np.zeros(len(snr), dtype=int)
    idx = np.floor((np.where(np.isfinite(snr), snr, edges[-1]) - edges[0]) / width)
    return np.clip(idx, 0, len(edges) - 1).astype(int)


def _mean(x: np.ndarray) -> float:
    return float(np.mean(x)) if x.size else float("nan")


def _rate(hits: np.ndarray, among: np.ndarray) -> float:
    n = int(np.count_nonzero(among))
    return float(np.count_nonzero(hits & among)) / n if n else 0.0


def detection_metrics(preds, labels, snr_db, bin_width: float = 1.0,
                      config_hash: str = "") -> MetricsReport:
    """Score start predictions; ``-1`` (any negative) means "no packet".

    MAE uses only records where both label and prediction indicate a start.
    Miss rate is over positive records, false-alarm rate over negative ones.
    """
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    snr = np.asarray(snr_db, dtype=np.float64)
    if not preds.shape == labels.shape == snr.shape:
        raise ValueError("preds, labels and snr_db must have the same shape")
    pos, said = labels >= 0, preds >= 0
    both = pos & said
    err = np.abs(preds - labels)
    miss, fa = pos & ~said, ~pos & said

    edges = _edges(snr, bin_width)
    idx = _bin_index(snr, edges, bin_width)
    bins = []
    for k, lo in enumerate(edges):
        sel = idx == k
        bins.append(SnrBin(float(lo), int(sel.sum()), _mean(err[sel & both]),
                           _rate(miss, sel & pos), _rate(fa, sel & ~pos)))
    return MetricsReport("detection", bins, _mean(err[both]), _rate(miss, pos), _rate(fa, ~pos),
                         len(labels), config_hash)


def cfo_metrics(preds, labels, snr_db, bin_width: float = 1.0,
                config_hash: str = "") -> MetricsReport:
    """MAE in Hz per SNR bin, plus truth/prediction scatter and an outlier count.

    An outlier is an absolute error above ten times the median absolute error.
    """
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    snr = np.asarray(snr_db, dtype=np.float64)
    if not preds.shape == labels.shape == snr.shape:
        raise ValueError("preds, labels and snr_db must have the same shape")
    err = np.abs(preds - labels)
    edges = _edges(snr, bin_width)
    idx = _bin_index(snr, edges, bin_width)
    bins = [SnrBin(float(lo), int((idx == k).sum()), _mean(err[idx == k]))
            for k, lo in enumerate(edges)]
    outliers = int(np.count_nonzero(err > 10.0 * np.median(err))) if err.size else 0
    return MetricsReport("cfo", bins, _mean(err), n_records=len(labels), config_hash=config_hash,
                         outliers=outliers, scatter=(labels.copy(), preds.copy()))
