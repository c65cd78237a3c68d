"""802.11ah 1 MHz NDP preamble generation and OFDM primitives.

The NDP is laid out as ``[STF | LTF1 | SIG]``::

    STF   10 x STS (16 samples)                      160 samples
    LTF1  [LTS[-32:] | LTS | LTS]  (LTS = 64 samples)  160 samples
    SIG   6 x [8-sample CP | 32-sample symbol]        240 samples

The standard's S1G training sequences are not reproduced here. The default
STS and LTS are a seeded QPSK fill of the occupied bins, normalized to unit
power; pass your own ``sts``/``lts`` to :class:`PreambleSpec` to use others.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

SEQUENCE_SEED = 8021
STS_BINS = (-4, -3, -2, -1, 1, 2, 3, 4)
LTS_BINS = tuple(range(-26, 0)) + tuple(range(1, 27))
SIG_BINS = tuple(range(-13, 0)) + tuple(range(1, 14))

# Kaiser-windowed sinc; cutoff is relative to the original (pre-oversampling) rate.
DEFAULT_FILTER_TAPS = 49
DEFAULT_FILTER_CUTOFF = 0.54
DEFAULT_KAISER_BETA = 7.5
DEFAULT_OVERSAMPLE = 4

WAVEFORM_MAGIC = b"WV01"
_WV_HEADER = struct.Struct("<4sIII")


def _qpsk_fill(n_bins: int, occupied, rng: np.random.Generator) -> np.ndarray:
    spectrum = np.zeros(n_bins, dtype=complex)
    re = rng.choice([-1.0, 1.0], len(occupied))
    im = rng.choice([-1.0, 1.0], len(occupied))
    spectrum[list(occupied)] = (re + 1j * im) / np.sqrt(2.0)
    return spectrum


def _unit_power(x: np.ndarray) -> np.ndarray:
    return x / np.sqrt(np.mean(np.abs(x) ** 2))


def default_sts(seed: int = SEQUENCE_SEED) -> np.ndarray:
    """16-sample short training symbol: 8 occupied bins of a 16-point spectrum."""
    rng = np.random.default_rng([seed, 0])
    return _unit_power(np.fft.ifft(_qpsk_fill(16, STS_BINS, rng)))


def default_lts(seed: int = SEQUENCE_SEED) -> np.ndarray:
    """64-sample long training symbol: 52 occupied bins of a 64-point spectrum."""
    rng = np.random.default_rng([seed, 1])
    return _unit_power(np.fft.ifft(_qpsk_fill(64, LTS_BINS, rng)))


def default_sig_bits(seed: int = SEQUENCE_SEED) -> np.ndarray:
    rng = np.random.default_rng([seed, 2])
    return rng.integers(0, 2, size=6 * len(SIG_BINS)).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class PreambleSpec:
    """Constants of the 1 MHz NDP preamble (all lengths in 1 MHz samples)."""

    n_subcarriers: int = 32
    subcarrier_spacing: float = 31_250.0
    cp_len: int = 8
    sample_rate: float = 1_000_000.0
    sts: np.ndarray = field(default_factory=default_sts)
    lts: np.ndarray = field(default_factory=default_lts)
    stf_len: int = 160
    sts_len: int = 16
    ltf_len: int = 160
    lts_len: int = 64
    sig_symbols: int = 6
    sig_bits: np.ndarray = field(default_factory=default_sig_bits)

    def __post_init__(self):
        sts = np.asarray(self.sts, dtype=complex)
        lts = np.asarray(self.lts, dtype=complex)
        object.__setattr__(self, "sts", sts)
        object.__setattr__(self, "lts", lts)
        object.__setattr__(self, "sig_bits", np.asarray(self.sig_bits, dtype=np.uint8))
        if len(sts) != self.sts_len or len(lts) != self.lts_len:
            raise ValueError("sts/lts length does not match sts_len/lts_len")
        if self.stf_len != 10 * self.sts_len:
            raise ValueError("stf_len must be 10 * sts_len")
        if self.ltf_len != 32 + 2 * self.lts_len:
            raise ValueError("ltf_len must be 32 + 2 * lts_len")
        if self.total_len != 14 * (self.n_subcarriers + self.cp_len):
            raise ValueError("preamble must span 14 OFDM symbols")
        for name, seq in (("sts", sts), ("lts", lts)):
            if abs(np.mean(np.abs(seq) ** 2) - 1.0) > 1e-9:
                raise ValueError(f"{name} must have unit average power")
        if len(self.sig_bits) != self.sig_symbols * len(SIG_BINS):
            raise ValueError(f"sig_bits must hold {self.sig_symbols * len(SIG_BINS)} bits")

    @property
    def sig_len(self) -> int:
        return self.sig_symbols * (self.n_subcarriers + self.cp_len)

    @property
    def total_len(self) -> int:
        return self.stf_len + self.ltf_len + self.sig_len

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sample_rate


@dataclass(frozen=True, eq=False)
class Waveform:
    """Complex baseband samples plus the rate they were taken at."""

    samples: np.ndarray
    sample_rate: float = 1_000_000.0
    oversample_factor: int = 1

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("waveform needs a non-empty 1-D sample array")
        if self.oversample_factor < 1:
            raise ValueError("oversample_factor must be >= 1")
        base = self.sample_rate / self.oversample_factor
        if abs(base - round(base)) > 1e-6:
            raise ValueError("oversample_factor must divide the sample rate")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def base_rate(self) -> float:
        return self.sample_rate / self.oversample_factor

    def replace(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples, self.sample_rate, self.oversample_factor)


def idft(bins, n: int) -> np.ndarray:
    """x_n = (1/N) sum_k X_k exp(j 2 pi k n / N)."""
    bins = np.asarray(bins, dtype=complex)
    if bins.shape != (n,):
        raise ValueError(f"expected {n} bins, got shape {bins.shape}")
    return np.fft.ifft(bins)


def dft(segment, n: int) -> np.ndarray:
    """Y_k = sum_n y_n exp(-j 2 pi k n / N)."""
    segment = np.asarray(segment, dtype=complex)
    if segment.shape != (n,):
        raise ValueError(f"expected {n} samples, got shape {segment.shape}")
    return np.fft.fft(segment)


def _sig_field(spec: PreambleSpec) -> np.ndarray:
    n = spec.n_subcarriers
    bins = np.array(SIG_BINS) % n
    bits = spec.sig_bits.reshape(spec.sig_symbols, len(SIG_BINS))
    symbols = []
    for row in bits:
        spectrum = np.zeros(n, dtype=complex)
        spectrum[bins] = 1.0 - 2.0 * row  # BPSK: 0 -> +1, 1 -> -1
        body = _unit_power(idft(spectrum, n))
        symbols.append(np.concatenate([body[-spec.cp_len:], body]))
    return np.concatenate(symbols)


def generate_ndp(spec: PreambleSpec | None = None) -> Waveform:
    spec = spec or PreambleSpec()
    stf = np.tile(spec.sts, 10)
    ltf = np.concatenate([spec.lts[-32:], spec.lts, spec.lts])
    samples = np.concatenate([stf, ltf, _sig_field(spec)])
    return Waveform(samples, spec.sample_rate, 1)


def lowpass_taps(factor: int, n_taps: int = DEFAULT_FILTER_TAPS,
                 cutoff: float = DEFAULT_FILTER_CUTOFF,
                 beta: float = DEFAULT_KAISER_BETA) -> np.ndarray:
    """Unit-DC-gain windowed-sinc at ``cutoff`` x (rate / factor)."""
    if n_taps < 1 or n_taps % 2 == 0:
        raise ValueError("filter tap count must be odd and positive")
    n = np.arange(n_taps) - (n_taps - 1) / 2
    fc = cutoff / factor
    h = 2 * fc * np.sinc(2 * fc * n) * np.kaiser(n_taps, beta)
    return h / h.sum()


def _filter_centered(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    # compensates the (taps - 1) / 2 group delay so sample indices line up
    delay = (len(h) - 1) // 2
    return np.convolve(x, h)[delay:delay + len(x)]


def oversample(w: Waveform, factor: int = DEFAULT_OVERSAMPLE,
               filter_taps: int = DEFAULT_FILTER_TAPS) -> Waveform:
    """Zero-stuff by ``factor`` and interpolate with the low-pass filter."""
    if factor < 1:
        raise ValueError("oversample factor must be >= 1")
    if factor == 1:
        return w.replace(w.samples.copy())
    up = np.zeros(len(w) * factor, dtype=complex)
    up[::factor] = w.samples
    h = lowpass_taps(factor, filter_taps) * factor
    return Waveform(_filter_centered(up, h), w.sample_rate * factor,
                    w.oversample_factor * factor)


def downsample(w: Waveform, factor: int = DEFAULT_OVERSAMPLE,
               filter_taps: int = DEFAULT_FILTER_TAPS) -> Waveform:
    """Anti-alias filter, then keep every ``factor``-th sample starting at 0."""
    if factor < 1:
        raise ValueError("downsample factor must be >= 1")
    if factor == 1:
        return w.replace(w.samples.copy())
    if w.oversample_factor % factor:
        raise ValueError("factor must divide the waveform's oversample factor")
    filtered = _filter_centered(w.samples, lowpass_taps(factor, filter_taps))
    return Waveform(filtered[::factor], w.sample_rate / factor,
                    w.oversample_factor // factor)


def write_waveform(path, w: Waveform) -> None:
    """Write the WV01 format: 16-byte header then interleaved float32 I/Q."""
    iq = np.empty(2 * len(w), dtype="<f4")
    iq[0::2] = w.samples.real
    iq[1::2] = w.samples.imag
    with open(path, "wb") as fh:
        fh.write(_WV_HEADER.pack(WAVEFORM_MAGIC, int(round(w.sample_rate)),
                                 w.oversample_factor, len(w)))
        fh.write(iq.tobytes())


def read_waveform_header(path) -> tuple[int, int, int]:
    """Return ``(sample_rate, oversample_factor, sample_count)``."""
    raw = Path(path).read_bytes()[:_WV_HEADER.size]
    if len(raw) < _WV_HEADER.size:
        raise FormatError(f"{path}: truncated waveform header")
    magic, rate, factor, count = _WV_HEADER.unpack(raw)
    if magic != WAVEFORM_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    return rate, factor, count


def read_waveform(path) -> Waveform:
    rate, factor, count = read_waveform_header(path)
    if count == 0:
        raise FormatError(f"{path}: waveform holds no samples")
    body = np.frombuffer(Path(path).read_bytes(), dtype="<f4", offset=_WV_HEADER.size)
    if body.size != 2 * count:
        raise FormatError(f"{path}: expected {2 * count} floats, found {body.size}")
    samples = body[0::2].astype(np.float64) + 1j * body[1::2].astype(np.float64)
    return Waveform(samples, float(rate), max(factor, 1))
