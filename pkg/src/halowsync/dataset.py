"""Simulated detection / CFO datasets, their file format, splits and IQ import.

Record files (``.ds``) are a 16-byte header ``{"DS01", u32 task, u32 width,
u32 count}`` followed by fixed-size little-endian records::

    payload  float32[width]   |y| block (detection) or STF phases (cfo)
    label    float32          tau_S in samples (-1 = no start) or f_off in Hz
    snr_db   float32
    seed     uint64           per-record seed; regenerates the waveform
    channel  uint8            0 awgn, 1 multipath, 255 unknown (imported)
    kind     uint8            see RecordKind
    aux      int16            cfo: alignment error (used start - true start)

A JSON manifest sidecar carries the generation config, its hash and split counts.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelConfig, Transmitter
from .errors import FormatError
from .models import SUPPORTED_BLOCKS
from .phy import PreambleSpec, downsample, read_waveform, read_waveform_header
from .sync import SyncConfig, detect_all, detect_packet, estimate_cfo

FORMAT_VERSION = 1
MAGIC = b"DS01"
_HEADER = struct.Struct("<4sIII")
TASKS = {"detection": 0, "cfo": 1}
CHANNELS = {"awgn": 0, "multipath": 1}
UNKNOWN_CHANNEL = 255

# detection streams: 640 samples of lead-in before the block, enough to hold a whole NDP
DET_LEAD = 640
DET_TAIL = 624
CFO_LEAD = 200
CFO_TAIL = 100


class RecordKind(enum.IntEnum):
    START = 0
    NOISE = 1
    TAIL = 2
    CFO = 3
    IMPORTED = 4


def record_dtype(width: int) -> np.dtype:
    return np.dtype([("payload", "<f4", (width,)), ("label", "<f4"), ("snr_db", "<f4"),
                     ("seed", "<u8"), ("channel", "u1"), ("kind", "u1"), ("aux", "<i2")])


@dataclass(frozen=True)
class DetectionRecord:
    block: np.ndarray
    label: int
    snr_db: float
    seed: int
    channel: str
    kind: RecordKind


@dataclass(frozen=True)
class CfoRecord:
    phases: np.ndarray
    label: float
    snr_db: float
    seed: int
    channel: str
    align_error: int = 0


@dataclass(frozen=True)
class ChannelRanges:
    snr_min: float = 1.0
    snr_max: float = 25.0
    channel: str = "multipath"
    cfo_max: float = 15_625.0
    alignment: str = "ideal"  # cfo only: 'ideal' or 'detector'

    def __post_init__(self):
        if math.isnan(self.snr_min) or math.isnan(self.snr_max) or self.snr_min > self.snr_max:
            raise ValueError("snr_min must not exceed snr_max")
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {sorted(CHANNELS)}")
        if self.alignment not in ("ideal", "detector"):
            raise ValueError("alignment must be 'ideal' or 'detector'")


class RecordSet:
    """Columnar container for records of one task."""

    def __init__(self, task: str, width: int, data: np.ndarray | None = None):
        if task not in TASKS:
            raise ValueError(f"unknown task {task!r}")
        self.task = task
        self.width = width
        self.data = data if data is not None else np.zeros(0, dtype=record_dtype(width))

    def __len__(self) -> int:
        return len(self.data)

    @property
    def payload(self) -> np.ndarray:
        return self.data["payload"]

    @property
    def label(self) -> np.ndarray:
        return self.data["label"]

    @property
    def snr_db(self) -> np.ndarray:
        return self.data["snr_db"]

    def subset(self, idx) -> "RecordSet":
        return RecordSet(self.task, self.width, self.data[np.asarray(idx, dtype=np.int64)])

    def record(self, i: int):
        r = self.data[i]
        chan = {v: k for k, v in CHANNELS.items()}.get(int(r["channel"]), "unknown")
        if self.task == "detection":
            return DetectionRecord(r["payload"].copy(), int(r["label"]), float(r["snr_db"]),
                                   int(r["seed"]), chan, RecordKind(int(r["kind"])))
        return CfoRecord(r["payload"].copy(), float(r["label"]), float(r["snr_db"]),
                         int(r["seed"]), chan, int(r["aux"]))

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(MAGIC, TASKS[self.task], self.width, len(self))
        return header + self.data.tobytes()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def read(cls, path) -> "RecordSet":
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, task_id, width, count = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        task = {v: k for k, v in TASKS.items()}.get(task_id)
        if task is None:
            raise FormatError(f"{path}: unknown task id {task_id}")
        dt = record_dtype(width)
        if len(raw) - _HEADER.size != count * dt.itemsize:
            raise FormatError(f"{path}: size does not match {count} records of width {width}")
        data = np.frombuffer(raw, dtype=dt, offset=_HEADER.size, count=count).copy()
        return cls(task, width, data)

    @classmethod
    def concat(cls, sets: list["RecordSet"]) -> "RecordSet":
        first = sets[0]
        return cls(first.task, first.width, np.concatenate([s.data for s in sets]))


def record_seed(master_seed: int, index: int) -> int:
    """Per-record seed, independent of generation order."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# -- per-record simulation ----------------------------------------------

_TX_CACHE: dict = {}


def _transmitter() -> Transmitter:
    if "tx" not in _TX_CACHE:
        _TX_CACHE["tx"] = Transmitter()
    return _TX_CACHE["tx"]


@dataclass
class SimulatedBlock:
    record: np.void
    stream: np.ndarray      # complex 1 MHz samples around the block
    block_start: int        # index of the block's first sample in ``stream``
    packet_start: int | None  # true packet start in ``stream`` (None for noise)


def _draw_snr(rng: np.random.Generator, ranges: ChannelRanges) -> float:
    u = rng.random()  # always drawn so fixed-SNR sets share the other draws
    if ranges.snr_min == ranges.snr_max:
        return float(ranges.snr_min)
    return ranges.snr_min + u * (ranges.snr_max - ranges.snr_min)


def simulate_detection(seed: int, block_len: int, ranges: ChannelRanges) -> SimulatedBlock:
    """One detection record: ~50% starts, ~25% noise, ~25% packet interiors/tails."""
    rng = np.random.default_rng(seed)
    u = rng.random()
    snr = _draw_snr(rng, ranges)
    cfo = rng.uniform(-ranges.cfo_max, ranges.cfo_max)
    chan_seed = int(rng.integers(0, 2 ** 63))
    tau = int(rng.integers(0, block_len))
    cut = int(rng.integers(1, 560))
    total = DET_LEAD + block_len + DET_TAIL
    if u < 0.5:
        kind, start = RecordKind.START, DET_LEAD + tau
    elif u < 0.75:
        kind, start = RecordKind.NOISE, None
    else:
        # block begins ``cut`` samples into the packet
        kind, start = RecordKind.TAIL, DET_LEAD - cut
    cfg = ChannelConfig(snr_db=snr, cfo_hz=cfo, timing_offset=start or 0,
                        fading=ranges.channel, seed=chan_seed)
    y = _transmitter().receive(cfg, total, packet=start is not None).samples
    rec = np.zeros((), dtype=record_dtype(block_len))
    rec["payload"] = np.abs(y[DET_LEAD:DET_LEAD + block_len])
    rec["label"] = tau if kind == RecordKind.START else -1
    rec["snr_db"] = snr
    rec["seed"] = seed
    rec["channel"] = CHANNELS[ranges.channel]
    rec["kind"] = kind
    return SimulatedBlock(rec, y, DET_LEAD, start)


def simulate_cfo(seed: int, ranges: ChannelRanges, sync_cfg: SyncConfig | None = None,
                 ) -> SimulatedBlock:
    """One CFO record: STF phases at the true (or detected) packet start."""
    rng = np.random.default_rng(seed)
    snr = _draw_snr(rng, ranges)
    cfo = rng.uniform(-ranges.cfo_max, ranges.cfo_max)
    chan_seed = int(rng.integers(0, 2 ** 63))
    cfg = ChannelConfig(snr_db=snr, cfo_hz=cfo, timing_offset=CFO_LEAD,
                        fading=ranges.channel, seed=chan_seed)
    y = _transmitter().receive(cfg, CFO_LEAD + 560 + CFO_TAIL).samples
    start = CFO_LEAD
    if ranges.alignment == "detector":
        found = detect_packet(y, sync_cfg)
        if found.detected and 0 <= found.start <= len(y) - 160:
            start = found.start
    rec = np.zeros((), dtype=record_dtype(160))
    rec["payload"] = np.angle(y[start:start + 160])
    rec["label"] = cfo
    rec["snr_db"] = snr
    rec["seed"] = seed
    rec["channel"] = CHANNELS[ranges.channel]
    rec["kind"] = RecordKind.CFO
    rec["aux"] = start - CFO_LEAD
    return SimulatedBlock(rec, y, start, CFO_LEAD)


def _gen_chunk(args) -> np.ndarray:
    task, seeds, block_len, ranges = args
    if task == "detection":
        recs = [simulate_detection(s, block_len, ranges).record for s in seeds]
    else:
        recs = [simulate_cfo(s, ranges).record for s in seeds]
    return np.array(recs, dtype=record_dtype(block_len if task == "detection" else 160))


def _generate(task, n, block_len, ranges, master_seed, workers) -> RecordSet:
    width = block_len if task == "detection" else 160
    if n == 0:
        return RecordSet(task, width)
    seeds = [record_seed(master_seed, i) for i in range(n)]
    chunk = max(1, math.ceil(n / max(1, workers) / 4))
    jobs = [(task, seeds[lo:lo + chunk], block_len, ranges) for lo in range(0, n, chunk)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_gen_chunk, jobs))  # map preserves index order
    else:
        parts = [_gen_chunk(j) for j in jobs]
    return RecordSet(task, width, np.concatenate(parts))


def gen_detection_set(n: int, block_len: int, ranges: ChannelRanges | None = None,
                      master_seed: int = 0, workers: int = 1) -> RecordSet:
    if block_len not in SUPPORTED_BLOCKS:
        raise ValueError(f"block length must be one of {SUPPORTED_BLOCKS}")
    return _generate("detection", n, block_len, ranges or ChannelRanges(), master_seed, workers)


def gen_cfo_set(n: int, ranges: ChannelRanges | None = None, master_seed: int = 0,
                workers: int = 1) -> RecordSet:
    return _generate("cfo", n, 160, ranges or ChannelRanges(channel="awgn"), master_seed, workers)


def regenerate(records: RecordSet, i: int, ranges: ChannelRanges) -> SimulatedBlock:
    """Re-simulate record ``i`` (complex stream included) from its stored seed."""
    seed = int(records.data["seed"][i])
    if records.task == "detection":
        return simulate_detection(seed, records.width, ranges)
    return simulate_cfo(seed, ranges)


# -- splitting and manifests -------------------------------------------

def split_counts(n: int, fractions=(0.7, 0.15, 0.15)) -> list[int]:
    """Largest-remainder rounding; ties go to the earlier split."""
    fr = np.asarray(fractions, dtype=np.float64)
    if np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError("split fractions must be non-negative and sum to 1")
    exact = fr * n
    counts = np.floor(exact + 1e-9).astype(int)
    rem = exact - counts
    for idx in sorted(range(len(fr)), key=lambda k: (-round(rem[k], 9), k))[:n - counts.sum()]:
        counts[idx] += 1
    return counts.tolist()


def split(n: int, fractions=(0.7, 0.15, 0.15), seed: int = 0) -> list[np.ndarray]:
    """Disjoint, exhaustive index sets from a seeded shuffle."""
    order = np.random.default_rng(seed).permutation(n)
    bounds = np.cumsum([0] + split_counts(n, fractions))
    return [np.sort(order[bounds[k]:bounds[k + 1]]) for k in range(len(bounds) - 1)]


@dataclass
class DatasetManifest:
    task: str
    width: int
    master_seed: int
    config: dict
    counts: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION
    provenance: list = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["config_hash"] = self.config_hash
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read manifest {path}: {exc}") from exc
        doc.pop("config_hash", None)
        if doc.get("format_version") != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported dataset format version")
        return cls(**doc)

    def ranges(self) -> ChannelRanges:
        keys = ChannelRanges.__dataclass_fields__
        return ChannelRanges(**{k: v for k, v in self.config.get("ranges", {}).items() if k in keys})


def write_splits(outdir, records: RecordSet, manifest: DatasetManifest,
                 fractions=(0.7, 0.15, 0.15), split_seed: int | None = None) -> Path:
    """Write train/val/test ``.ds`` files plus ``manifest.json`` into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = manifest.master_seed if split_seed is None else split_seed
    parts = split(len(records), fractions, seed)
    for name, idx in zip(("train", "val", "test"), parts):
        path = records.subset(idx).write(outdir / f"{name}.ds")
        manifest.counts[name] = int(len(idx))
        manifest.files[name] = path.name
    manifest.config = {**manifest.config, "fractions": list(fractions), "split_seed": seed}
    return manifest.write(outdir / "manifest.json")


# -- import of captured IQ ---------------------------------------------

def _estimate_snr(s: np.ndarray, start: int, packet_len: int) -> float:
    lead = s[max(0, start - 100):max(0, start - 8)]
    if len(lead) < 16:
        return float("nan")
    noise = float(np.mean(np.abs(lead) ** 2))
    packet = float(np.mean(np.abs(s[start:start + packet_len]) ** 2))
    if noise <= 0 or packet <= noise:
        return float("nan")
    return 10.0 * math.log10((packet - noise) / noise)


def import_iq(path, block_len: int = 40, spec: PreambleSpec | None = None,
              sync_cfg: SyncConfig | None = None) -> tuple[RecordSet, RecordSet]:
    """Label a captured WV01 file with the conventional receiver.

    Returns ``(detection_records, cfo_records)``. Detection records tile the
    capture into consecutive blocks; CFO labels are conventional estimates.
    """
    spec = spec or PreambleSpec()
    det = RecordSet("detection", block_len)
    cfo = RecordSet("cfo", 160)
    _, factor, count = read_waveform_header(path)
    if count == 0:
        return det, cfo
    w = read_waveform(path)
    if w.oversample_factor > 1:
        w = downsample(w, w.oversample_factor)
    s = w.samples
    hits = [h for h in detect_all(s, sync_cfg, spec)
            if h.start is not None and 0 <= h.start and h.start + spec.total_len <= len(s)]
    starts = [h.start for h in hits]

    n_blocks = len(s) // block_len
    drecs = np.zeros(n_blocks, dtype=record_dtype(block_len))
    for k in range(n_blocks):
        lo = k * block_len
        drecs[k]["payload"] = np.abs(s[lo:lo + block_len])
        inside = [t for t in starts if lo <= t < lo + block_len]
        drecs[k]["label"] = inside[0] - lo if inside else -1
        near = min(starts, key=lambda t: abs(t - lo), default=None)
        drecs[k]["snr_db"] = _estimate_snr(s, near, spec.total_len) if near is not None else np.nan
        drecs[k]["channel"] = UNKNOWN_CHANNEL
        drecs[k]["kind"] = RecordKind.IMPORTED
    det = RecordSet("detection", block_len, drecs)

    crecs = np.zeros(len(starts), dtype=record_dtype(160))
    for k, t in enumerate(starts):
        crecs[k]["payload"] = np.angle(s[t:t + 160])
        crecs[k]["label"] = estimate_cfo(s, t, spec, sync_cfg).total_hz
        crecs[k]["snr_db"] = _estimate_snr(s, t, spec.total_len)
        crecs[k]["channel"] = UNKNOWN_CHANNEL
        crecs[k]["kind"] = RecordKind.IMPORTED
    cfo = RecordSet("cfo", 160, crecs)
    return det, cfo
