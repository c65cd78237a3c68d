"""Checkpoints: ``<stem>.json`` manifest plus ``<stem>.bin`` little-endian float32 blob."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .layers import LayerSpec, param_shapes

FORMAT_VERSION = 1


def save_checkpoint(stem, net: list[LayerSpec], w, meta: dict | None = None) -> tuple[Path, Path]:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    entries, chunks, offset = [], [], 0
    for idx, (spec, layer) in enumerate(zip(net, w)):
        for name in sorted(layer):
            arr = np.ascontiguousarray(layer[name], dtype="<f4")
            entries.append({"layer": idx, "name": name, "shape": list(arr.shape),
                            "offset": offset, "count": int(arr.size)})
            chunks.append(arr.tobytes())
            offset += arr.size
    manifest = {"format_version": FORMAT_VERSION,
                "architecture": [s.to_dict() for s in net],
                "params": entries,
                **(meta or {})}
    json_path = stem.with_suffix(".json")
    bin_path = stem.with_suffix(".bin")
    bin_path.write_bytes(b"".join(chunks))
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return json_path, bin_path


def load_checkpoint(stem, dtype=np.float32) -> tuple[list[LayerSpec], list, dict]:
    stem = Path(stem)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    try:
        manifest = json.loads(stem.with_suffix(".json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read checkpoint manifest {stem}.json: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatError("unsupported checkpoint format version")
    net = [LayerSpec(**d) for d in manifest["architecture"]]
    blob = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f4")
    w = [dict() for _ in net]
    for e in manifest["params"]:
        chunk = blob[e["offset"]:e["offset"] + e["count"]]
        if chunk.size != e["count"]:
            raise FormatError("checkpoint blob is truncated")
        w[e["layer"]][e["name"]] = chunk.reshape(e["shape"]).astype(dtype)
    for spec, layer in zip(net, w):
        expected = param_shapes(spec)
        if {k: tuple(v.shape) for k, v in layer.items()} != expected:
            raise FormatError(f"parameter shapes do not match layer {spec.kind}")
    meta = {k: v for k, v in manifest.items()
            if k not in ("format_version", "architecture", "params")}
    return net, w, meta
