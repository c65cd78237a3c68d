"""Packet detection and CFO estimation for the 1 MHz 802.11ah preamble.

Conventional correlation-based synchronization alongside small neural
estimators trained on simulated data.
"""
from .channel import ChannelConfig, FadingProfile, Transmitter, simulate_reception
from .errors import ConfigError, DegenerateCorrelationWarning, FormatError, NumericError
from .phy import PreambleSpec, Waveform, generate_ndp
from .sync import SyncConfig, detect_packet, estimate_cfo

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig", "ConfigError", "DegenerateCorrelationWarning", "FadingProfile",
    "FormatError", "NumericError", "PreambleSpec", "SyncConfig", "Transmitter", "Waveform",
    "__version__", "detect_packet", "estimate_cfo", "generate_ndp", "simulate_reception",
]
