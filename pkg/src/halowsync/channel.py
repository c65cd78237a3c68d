"""Transmission impairments: multipath fading, CFO, AWGN and timing offset.

The receive chain composes them in a fixed order::

    oversample -> multipath -> CFO -> timing embed + AWGN -> RX filter -> downsample

Timing embedding and noise share one step so the noise floor is continuous
across the packet boundary. SNR is the in-band ratio seen after the receive
filter at the 1 MHz rate; see :func:`simulate_reception`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .phy import (DEFAULT_FILTER_TAPS, DEFAULT_OVERSAMPLE, PreambleSpec, Waveform,
                  downsample, generate_ndp, lowpass_taps, oversample)

MAX_TAP_DELAY = 10e-6


@dataclass(frozen=True)
class Tap:
    delay: float  # seconds
    mean_power_db: float


@dataclass(frozen=True)
class FadingProfile:
    taps: tuple[Tap, ...]
    rayleigh: bool = True

    def __post_init__(self):
        if not self.taps:
            raise ValueError("fading profile needs at least one tap")
        for tap in self.taps:
            if not 0.0 <= tap.delay <= MAX_TAP_DELAY:
                raise ValueError(f"tap delay {tap.delay} s outside [0, 10 us]")

    @property
    def linear_powers(self) -> np.ndarray:
        """Tap mean powers scaled to sum to one (0 dB total)."""
        p = 10.0 ** (np.array([t.mean_power_db for t in self.taps]) / 10.0)
        return p / p.sum()

    @classmethod
    def identity(cls) -> "FadingProfile":
        return cls((Tap(0.0, 0.0),), rayleigh=False)

    @classmethod
    def model_b(cls) -> "FadingProfile":
        """Exponential-decay stand-in for TGn model B: 9 taps, 10 ns apart, -4.3 dB/tap."""
        return cls(tuple(Tap(10e-9 * i, -4.3 * i) for i in range(9)), rayleigh=True)

    @classmethod
    def from_json(cls, doc) -> "FadingProfile":
        """Build from ``{"taps": [{"delay_ns": .., "power_db": ..}], "rayleigh": bool}``."""
        if isinstance(doc, str) and doc.lstrip().startswith("{"):
            doc = json.loads(doc)
        elif isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        taps = tuple(Tap(float(t["delay_ns"]) * 1e-9, float(t["power_db"])) for t in doc["taps"])
        return cls(taps, rayleigh=bool(doc.get("rayleigh", True)))

    def to_json(self) -> dict:
        return {"taps": [{"delay_ns": t.delay * 1e9, "power_db": t.mean_power_db}
                         for t in self.taps],
                "rayleigh": self.rayleigh}


@dataclass(frozen=True)
class ChannelConfig:
    """Per-packet impairments. ``fading`` is 'identity', 'awgn_only' or a profile."""

    snr_db: float = math.inf
    cfo_hz: float = 0.0
    timing_offset: int = 0
    fading: "str | FadingProfile" = "awgn_only"
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError("snr_db must be a number (use inf for no noise)")
        if self.timing_offset < 0:
            raise ValueError("timing_offset must be non-negative")

    def profile(self) -> FadingProfile | None:
        if isinstance(self.fading, FadingProfile):
            return self.fading
        if self.fading in ("identity", "awgn_only", "awgn"):
            return None
        if self.fading in ("multipath", "model_b"):
            return FadingProfile.model_b()
        raise ValueError(f"unknown fading kind {self.fading!r}")


def channel_taps(profile: FadingProfile, sample_rate: float, seed) -> np.ndarray:
    """Draw one impulse response; delays rounded to the nearest sample."""
    rng = np.random.default_rng(seed)
    powers = profile.linear_powers
    if profile.rayleigh:
        gains = np.sqrt(powers / 2.0) * (rng.standard_normal(len(powers))
                                         + 1j * rng.standard_normal(len(powers)))
    else:
        gains = np.sqrt(powers).astype(complex)
    delays = [int(round(t.delay * sample_rate)) for t in profile.taps]
    h = np.zeros(max(delays) + 1, dtype=complex)
    for d, g in zip(delays, gains):
        h[d] += g
    return h


def apply_multipath(w: Waveform, profile: FadingProfile, seed) -> Waveform:
    """Linear convolution with one Rayleigh draw of ``profile``.

    The output keeps the channel tail, so it is ``max_delay`` samples longer.
    """
    h = channel_taps(profile, w.sample_rate, seed)
    if len(h) == 1:
        return w.replace(w.samples * h[0])
    return w.replace(np.convolve(w.samples, h))


def apply_cfo(w: Waveform, cfo_hz: float) -> Waveform:
    n = np.arange(len(w))
    return w.replace(w.samples * np.exp(2j * np.pi * cfo_hz * n / w.sample_rate))


def add_awgn(w: Waveform, snr_db: float, seed, signal_power: float | None = None) -> Waveform:
    """Add complex Gaussian noise of variance ``signal_power / 10^(snr/10)``.

    ``signal_power`` defaults to the mean power of ``w``.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return w.replace(w.samples.copy())
    if signal_power is None:
        signal_power = float(np.mean(np.abs(w.samples) ** 2))
    variance = signal_power / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(w)) + 1j * rng.standard_normal(len(w))
    return w.replace(w.samples + np.sqrt(variance / 2.0) * noise)


def embed_in_noise(w: Waveform, offset: int, total_len: int, snr_db: float, seed) -> Waveform:
    """Place ``w`` at ``offset`` in a ``total_len`` buffer and add AWGN everywhere.

    The noise level is set from the power of ``w`` itself, so packet and
    noise-only regions share one noise floor. Samples past the buffer end are dropped.
    """
    if offset < 0 or total_len <= 0:
        raise ValueError("offset must be >= 0 and total_len > 0")
    buf = np.zeros(total_len, dtype=complex)
    end = min(total_len, offset + len(w))
    if end > offset:
        buf[offset:end] = w.samples[:end - offset]
    power = float(np.mean(np.abs(w.samples) ** 2))
    return add_awgn(w.replace(buf), snr_db, seed, signal_power=power)


def _sub_seeds(seed: int) -> tuple[int, int]:
    fading_seed, noise_seed = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return int(fading_seed), int(noise_seed)


@dataclass
class Transmitter:
    """Caches the oversampled NDP so repeated receptions skip the interpolation."""

    spec: PreambleSpec = field(default_factory=PreambleSpec)
    factor: int = DEFAULT_OVERSAMPLE
    filter_taps: int = DEFAULT_FILTER_TAPS

    def __post_init__(self):
        self.ndp = generate_ndp(self.spec)
        self.ndp_os = oversample(self.ndp, self.factor, self.filter_taps)
        h = lowpass_taps(self.factor, self.filter_taps) if self.factor > 1 else np.ones(1)
        # white noise power surviving the RX filter, relative to its input
        self.noise_gain = float(np.sum(h ** 2))

    def receive(self, cfg: ChannelConfig, total_len: int, packet: bool = True) -> Waveform:
        """Simulate one reception; the packet starts at ``cfg.timing_offset`` (1 MHz samples).

        With ``packet=False`` the buffer holds noise only, at the level a packet
        with ``cfg.snr_db`` would have produced.
        """
        f = self.factor
        fading_seed, noise_seed = _sub_seeds(cfg.seed)
        x = self.ndp_os
        profile = cfg.profile()
        if profile is not None:
            x = apply_multipath(x, profile, fading_seed)
        x = apply_cfo(x, cfg.cfo_hz)
        power = float(np.mean(np.abs(x.samples) ** 2)) if packet else 1.0
        snr_os = cfg.snr_db + 10.0 * math.log10(self.noise_gain)
        if packet:
            rx = embed_in_noise(x, cfg.timing_offset * f, total_len * f, snr_os, noise_seed)
        else:
            empty = Waveform(np.zeros(total_len * f), x.sample_rate, x.oversample_factor)
            rx = add_awgn(empty, snr_os, noise_seed, signal_power=power)
        return downsample(rx, f, self.filter_taps)


def simulate_reception(cfg: ChannelConfig, total_len: int, spec: PreambleSpec | None = None,
                       factor: int = DEFAULT_OVERSAMPLE) -> Waveform:
    """One NDP through the full TX -> channel -> RX chain, at 1 MHz."""
    return Transmitter(spec or PreambleSpec(), factor).receive(cfg, total_len)
