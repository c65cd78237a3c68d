"""Correlation-based packet detection and two-stage CFO estimation.

Detection slides a 2L window and evaluates the normalized correlation

    M(tau) = |Lambda_tau|^2 / P_tau^2
    Lambda_tau = sum_{i<L} conj(y[tau+i]) y[tau+i+L]
    P_tau      = sum_{i<L} |y[tau+i+L]|^2

CFO is estimated from the lag-16 STS correlation (coarse) and, after
compensation, the lag-64 LTS correlation (fine).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import apply_cfo
from .errors import DegenerateCorrelationWarning
from .phy import PreambleSpec, Waveform

DEFAULT_THRESHOLD = 0.2


@dataclass(frozen=True)
class SyncConfig:
    corr_window: int = 80
    detect_threshold: float = DEFAULT_THRESHOLD
    use_90pct_refine: bool = True
    coarse_span: int = 144
    fine_enabled: bool = True

    def __post_init__(self):
        if not 0.0 < self.detect_threshold < 1.0:
            raise ValueError("detect_threshold must lie in (0, 1)")
        if not 0 < self.corr_window <= 160:
            raise ValueError("corr_window must lie in (0, L_S]")
        if self.coarse_span < 16:
            raise ValueError("coarse_span must cover at least one STS pair")


@dataclass(frozen=True)
class DetectionResult:
    detected: bool
    tau_hat: int | None = None
    metric_peak: float = 0.0
    fine_tau: int | None = None

    @property
    def start(self) -> int | None:
        """Best available start estimate: fine if present, else coarse."""
        return self.fine_tau if self.fine_tau is not None else self.tau_hat


@dataclass(frozen=True)
class CfoResult:
    coarse_hz: float
    fine_hz: float
    total_hz: float
    degenerate: bool = False


def _samples(y) -> np.ndarray:
    return y.samples if isinstance(y, Waveform) else np.asarray(y, dtype=complex)


def timing_metric(y, tau: int, L: int) -> float:
    """Direct evaluation of M(tau); 0 when the window carries no power."""
    s = _samples(y)
    if tau < 0 or tau + 2 * L > len(s):
        raise ValueError(f"window [{tau}, {tau + 2 * L}) exceeds buffer of {len(s)}")
    a = s[tau:tau + L]
    b = s[tau + L:tau + 2 * L]
    lam = np.sum(np.conj(a) * b)
    p = np.sum(np.abs(b) ** 2)
    if p == 0:
        return 0.0
    return float(abs(lam) ** 2 / p ** 2)


def correlation_sums(y, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Lambda_tau and P_tau for every tau in [0, len - 2L] via running sums."""
    s = _samples(y)
    n_tau = len(s) - 2 * L + 1
    if n_tau < 1:
        raise ValueError(f"buffer of {len(s)} shorter than 2L = {2 * L}")
    prod = np.conj(s[:-L]) * s[L:]
    power = np.abs(s[L:]) ** 2
    cp = np.concatenate([[0], np.cumsum(prod)])
    cw = np.concatenate([[0], np.cumsum(power)])
    return cp[L:L + n_tau] - cp[:n_tau], cw[L:L + n_tau] - cw[:n_tau]


def metric_curve(y, L: int) -> np.ndarray:
    lam, p = correlation_sums(y, L)
    out = np.zeros(len(p))
    ok = p > 0
    out[ok] = np.abs(lam[ok]) ** 2 / p[ok] ** 2
    return out


class SlidingCorrelator:
    """Streaming Lambda/P with an O(1) update per sample.

    After 2L pushes, every push completes one window and returns
    ``(tau, Lambda_tau, P_tau)``; earlier pushes return None.
    Single consumer per stream.
    """

    def __init__(self, L: int):
        self.L = L
        self._ring = [0j] * (2 * L + 1)
        self._count = 0
        self.lam = 0j
        self.power = 0.0

    def push(self, sample: complex):
        L, ring, n = self.L, self._ring, self._count
        size = len(ring)
        sample = complex(sample)
        ring[n % size] = sample
        self._count = n + 1
        if n >= L:
            mid = ring[(n - L) % size]
            self.lam += mid.conjugate() * sample
            self.power += sample.real ** 2 + sample.imag ** 2
            if n >= 2 * L:
                old = ring[(n - 2 * L) % size]
                self.lam -= old.conjugate() * mid
                self.power -= mid.real ** 2 + mid.imag ** 2
        if n >= 2 * L - 1:
            return n - 2 * L + 1, self.lam, self.power
        return None

    def run(self, samples) -> tuple[np.ndarray, np.ndarray]:
        """Feed a whole array; return Lambda and P for every completed window."""
        lam_out, p_out = [], []
        for x in np.asarray(samples, dtype=complex).tolist():
            out = self.push(x)
            if out is not None:
                lam_out.append(out[1])
                p_out.append(out[2])
        return np.array(lam_out, dtype=complex), np.array(p_out)


def _refine_90(curve: np.ndarray, peak_idx: int) -> int:
    level = 0.9 * curve[peak_idx]
    left = peak_idx
    while left > 0 and curve[left] > level:
        left -= 1
    right = peak_idx
    while right < len(curve) - 1 and curve[right] > level:
        right += 1
    return int(math.floor((left + right) / 2 + 0.5))


def lts_fine_timing(y, tau_hat: int, spec: PreambleSpec) -> int | None:
    """Locate the LTS pair by cross-correlation over [tau_hat, tau_hat + 560).

    The correlation magnitudes at lags n and n + l_L are summed so both LTS
    peaks vote; the earliest maximum, minus the first LTS offset, is returned.
    """
    s = _samples(y)
    seg = s[tau_hat:tau_hat + spec.total_len]
    l_l = spec.lts_len
    if len(seg) < 3 * l_l:
        return None
    xc = np.abs(np.correlate(seg, spec.lts, mode="valid"))
    combined = xc[:-l_l] + xc[l_l:]
    first_lts = spec.stf_len + spec.ltf_len - 2 * l_l
    return tau_hat + int(np.argmax(combined)) - first_lts


def detect_packet(y, cfg: SyncConfig | None = None,
                  spec: PreambleSpec | None = None) -> DetectionResult:
    """Coarse (argmax / 90% points) then optional LTS-based fine timing.

    The coarse argmax is taken over one STF length starting at the first
    sample where M reaches the threshold.

    The fine stage compensates the coarse CFO estimate before correlating
    against the LTS, since an uncorrected offset near 15 kHz rotates a full
    turn across one LTS.
    """
    cfg = cfg or SyncConfig()
    spec = spec or PreambleSpec()
    s = _samples(y)
    L = cfg.corr_window
    if len(s) < 2 * L:
        return DetectionResult(False)
    curve = metric_curve(s, L)
    above = np.flatnonzero(curve >= cfg.detect_threshold)
    if above.size == 0:
        return DetectionResult(False, None, float(curve.max()), None)
    # A packet's trailing edge leaves P small while Lambda still carries packet
    # energy, so M spikes there; only the first STF-length stretch is searched.
    first = int(above[0])
    peak_idx = first + int(np.argmax(curve[first:first + spec.stf_len]))
    peak = float(curve[peak_idx])
    tau = _refine_90(curve, peak_idx) if cfg.use_90pct_refine else peak_idx
    fine = None
    if cfg.fine_enabled and tau + cfg.coarse_span + spec.sts_len <= len(s):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateCorrelationWarning)
            coarse = coarse_cfo(s, tau, spec, cfg)
        n = np.arange(len(s) - tau)
        corrected = s[tau:] * np.exp(-2j * np.pi * coarse * n / spec.sample_rate)
        rel = lts_fine_timing(corrected, 0, spec)
        fine = None if rel is None else tau + rel
    return DetectionResult(True, tau, peak, fine)


def detect_all(y, cfg: SyncConfig | None = None, spec: PreambleSpec | None = None,
               ) -> list[DetectionResult]:
    """Repeated detection over a long capture; skips one NDP after each hit."""
    cfg = cfg or SyncConfig()
    spec = spec or PreambleSpec()
    s = _samples(y)
    found = []
    start = 0
    while len(s) - start >= 2 * cfg.corr_window:
        res = detect_packet(s[start:], cfg, spec)
        if not res.detected:
            break
        shift = lambda v: None if v is None else v + start  # noqa: E731
        found.append(DetectionResult(True, shift(res.tau_hat), res.metric_peak,
                                     shift(res.fine_tau)))
        start += max(res.start, 0) + spec.total_len
    return found


def _phase_estimate(lam: complex, lag: int, fs: float) -> tuple[float, bool]:
    if lam == 0:
        warnings.warn("zero-magnitude correlation; CFO estimate set to 0",
                      DegenerateCorrelationWarning, stacklevel=3)
        return 0.0, True
    return fs * float(np.angle(lam)) / (2 * math.pi * lag), False


def coarse_cfo(y, tau_s: int, spec: PreambleSpec | None = None,
               cfg: SyncConfig | None = None) -> float:
    """Lag-l_S STS correlation over n = tau_s .. tau_s + P - l_S (inclusive)."""
    spec = spec or PreambleSpec()
    cfg = cfg or SyncConfig()
    s = _samples(y)
    lag, P = spec.sts_len, cfg.coarse_span
    if tau_s < 0 or tau_s + P + lag > len(s):
        raise ValueError("coarse CFO window exceeds the buffer")
    n = np.arange(tau_s, tau_s + P - lag + 1)
    lam = np.sum(np.conj(s[n]) * s[n + lag])
    return _phase_estimate(lam, lag, spec.sample_rate)[0]


def fine_cfo(y_corrected, tau_l: int, spec: PreambleSpec | None = None) -> float:
    """Lag-l_L LTS correlation over the L_L - l_L pairs that stay inside LTF1."""
    spec = spec or PreambleSpec()
    s = _samples(y_corrected)
    lag = spec.lts_len
    if tau_l < 0 or tau_l + spec.ltf_len > len(s):
        raise ValueError("fine CFO window exceeds the buffer")
    n = np.arange(tau_l, tau_l + spec.ltf_len - lag)
    lam = np.sum(np.conj(s[n]) * s[n + lag])
    return _phase_estimate(lam, lag, spec.sample_rate)[0]


def estimate_cfo(y, tau_s: int, spec: PreambleSpec | None = None,
                 cfg: SyncConfig | None = None) -> CfoResult:
    """Coarse estimate, compensate it, fine estimate on the LTF; total = sum."""
    spec = spec or PreambleSpec()
    cfg = cfg or SyncConfig()
    w = y if isinstance(y, Waveform) else Waveform(_samples(y), spec.sample_rate)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateCorrelationWarning)
        coarse = coarse_cfo(w, tau_s, spec, cfg)
        corrected = apply_cfo(w, -coarse)
        fine = fine_cfo(corrected, tau_s + spec.stf_len, spec) if cfg.fine_enabled else 0.0
    degenerate = any(issubclass(c.category, DegenerateCorrelationWarning) for c in caught)
    for c in caught:
        warnings.warn_explicit(c.message, c.category, c.filename, c.lineno)
    return CfoResult(coarse, fine, coarse + fine, degenerate)
