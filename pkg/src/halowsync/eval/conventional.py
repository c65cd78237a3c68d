"""Score the correlation receiver on stored record sets.

Records only hold magnitudes or phases, so each one is re-simulated from its
seed to recover the complex stream around it.

Detection: the receiver runs on the whole stream around the block. For a
block holding a start, any detection counts and its offset from the block
start is the prediction (it may land outside the block). For a packet-free
block, only a detected start inside the block is a false alarm.
"""
from __future__ import annotations

import numpy as np

from ..dataset import ChannelRanges, RecordSet, regenerate
from ..phy import PreambleSpec
from ..sync import SyncConfig, detect_packet, estimate_cfo


def conventional_detection(records: RecordSet, ranges: ChannelRanges,
                           cfg: SyncConfig | None = None,
                           spec: PreambleSpec | None = None) -> np.ndarray:
    if records.task != "detection":
        raise ValueError("expected a detection record set")
    preds = np.full(len(records), -1, dtype=np.int64)
    for i in range(len(records)):
        sim = regenerate(records, i, ranges)
        res = detect_packet(sim.stream, cfg, spec)
        if not res.detected:
            continue
        rel = res.start - sim.block_start
        if records.label[i] >= 0 or 0 <= rel < records.width:
            preds[i] = rel
    return preds


def conventional_cfo(records: RecordSet, ranges: ChannelRanges,
                     cfg: SyncConfig | None = None,
                     spec: PreambleSpec | None = None) -> np.ndarray:
    """Two-stage estimate at the same start the record's phases were taken from."""
    if records.task != "cfo":
        raise ValueError("expected a CFO record set")
    out = np.zeros(len(records))
    for i in range(len(records)):
        sim = regenerate(records, i, ranges)
        out[i] = estimate_cfo(sim.stream, sim.block_start, spec, cfg).total_hz
    return out
