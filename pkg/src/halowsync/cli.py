"""``halowsync`` command line: gen, train, eval, flops, simulate.

Every command validates a :class:`RunConfig` against ``RUN_CONFIG_SCHEMA``
before doing any work and appends a provenance entry (config, hash, seed,
version) to the manifest it writes. Exit codes: 0 ok, 2 config error,
3 data error, 4 numeric failure. ``HALOW_SEED`` overrides ``--seed``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .channel import ChannelConfig, Transmitter
from .dataset import (ChannelRanges, DatasetManifest, RecordSet, config_hash, gen_cfo_set,
                      gen_detection_set, write_splits)
from .errors import ConfigError, FormatError, NumericError
from .eval import (PUBLISHED_CFO_FLOPS, cfo_metrics, cfo_model_flops, conventional_cfo,
                   conventional_detection, detection_metrics, detector_block_flops,
                   detector_throughput_flops, emit_report, relative_discrepancy)
from .models import SUPPORTED_BLOCKS, CfoModel, DetectorModel, build_training_view, load_model, save_model
from .nn import TrainConfig, train
from .phy import write_waveform
from .sync import detect_packet, estimate_cfo

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_range = {"type": "number"}
RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "RunConfig",
    "type": "object",
    "required": ["command", "seed"],
    "properties": {
        "command": {"enum": ["gen", "train", "eval", "flops", "simulate"]},
        "task": {"enum": ["detection", "cfo", None]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 63 - 1},
        "block_len": {"enum": [*SUPPORTED_BLOCKS, None]},
        "model_kind": {"enum": ["detector", "dnn", "lstm", "gru", "conventional", "all", None]},
        "paths": {"type": "object", "additionalProperties": {"type": "string"}},
        "hyper": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 0},
                "epochs": {"type": "integer", "minimum": 1},
                "batch": {"type": "integer", "minimum": 1},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "threads": {"type": "integer", "minimum": 1},
                "bin_width": {"type": "number", "exclusiveMinimum": 0},
                "method": {"enum": ["conventional", "dl", "both"]},
            },
        },
        "ranges": {
            "type": "object",
            "properties": {
                "snr_min": _range, "snr_max": _range,
                "channel": {"enum": ["awgn", "multipath"]},
                "cfo_max": {"type": "number", "minimum": 0},
                "alignment": {"enum": ["ideal", "detector"]},
            },
        },
    },
}


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    task: str | None = None
    block_len: int | None = None
    model_kind: str | None = None
    paths: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    ranges: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "RunConfig":
        try:
            jsonschema.validate(self.to_dict(), RUN_CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid run config: {exc.message}") from exc
        return self

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def provenance(self) -> dict:
        return {"command": self.command, "config": self.to_dict(), "config_hash": self.hash,
                "seed": self.seed, "version": __version__}


def append_provenance(manifest_path, cfg: RunConfig) -> Path:
    """Add ``cfg``'s provenance entry to the JSON manifest at ``manifest_path``."""
    path = Path(manifest_path)
    doc = {}
    if path.exists():
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    doc.setdefault("provenance", []).append(cfg.provenance())
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _seed(args) -> int:
    env = os.environ.get("HALOW_SEED")
    if env is None:
        return args.seed
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"HALOW_SEED must be an integer, got {env!r}") from exc


def _load_split(data_dir: Path, name: str) -> tuple[RecordSet, DatasetManifest]:
    manifest = DatasetManifest.read(data_dir / "manifest.json")
    return RecordSet.read(data_dir / manifest.files[name]), manifest


# -- commands -------------------------------------------------------------

def cmd_gen(args) -> int:
    channel = args.channel or ("multipath" if args.task == "detection" else "awgn")
    ranges = {"snr_min": args.snr_min, "snr_max": args.snr_max, "channel": channel,
              "cfo_max": args.cfo_max, "alignment": args.alignment}
    cfg = RunConfig("gen", _seed(args), args.task,
                    args.block if args.task == "detection" else None,
                    paths={"out": str(args.out)},
                    hyper={"n": args.n, "threads": args.threads}, ranges=ranges).validate()
    rng_cfg = ChannelRanges(**ranges)
    if args.task == "detection":
        records = gen_detection_set(args.n, args.block, rng_cfg, cfg.seed, args.threads)
    else:
        records = gen_cfo_set(args.n, rng_cfg, cfg.seed, args.threads)
    manifest = DatasetManifest(args.task, records.width, cfg.seed,
                               {"n": args.n, "block_len": records.width, "ranges": ranges})
    path = write_splits(args.out, records, manifest)
    append_provenance(path, cfg)
    print(json.dumps({"manifest": str(path), "counts": manifest.counts}, sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    data = Path(args.data)
    train_set, manifest = _load_split(data, "train")
    val_set, _ = _load_split(data, "val")
    task = manifest.task
    kind = "detector" if task == "detection" else args.cell
    epochs = args.epochs or (400 if task == "detection" else 500)
    batch = args.batch or (80 if task == "detection" else 100)
    cfg = RunConfig("train", _seed(args), task, manifest.width if task == "detection" else None,
                    kind, paths={"data": str(data), "out": str(args.out)},
                    hyper={"epochs": epochs, "batch": batch, "lr": args.lr}).validate()
    model = DetectorModel(manifest.width) if task == "detection" else CfoModel(kind)
    x, y = build_training_view(model, train_set)
    xv, yv = build_training_view(model, val_set)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    loss_path = out.with_suffix(".loss.csv")
    with open(loss_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_loss"])

        def sink(epoch, tr, va):
            row = [epoch, f"{tr:.9g}", "" if va is None else f"{va:.9g}"]
            writer.writerow(row)
            print(f"epoch {epoch} train {tr:.6g} val {row[2]}", file=sys.stderr)

        result = train(model.net, (x, y), TrainConfig(batch=batch, epochs=epochs, seed=cfg.seed,
                                                      alpha=args.lr, loss_sink=sink),
                       validation=(xv, yv))
    model.weights = result.weights
    json_path, _ = save_model(out, model, {"dataset_config_hash": manifest.config_hash})
    append_provenance(json_path, cfg)
    print(json.dumps({"checkpoint": str(json_path), "final_train_loss": result.train_loss[-1]}))
    return EXIT_OK


def _report(task, preds, test, bin_width, hash_):
    fn = detection_metrics if task == "detection" else cfo_metrics
    return fn(preds, test.label, test.snr_db, bin_width, hash_)


def cmd_eval(args) -> int:
    data = Path(args.data)
    test, manifest = _load_split(data, args.split)
    methods = ["conventional", "dl"] if args.method == "both" else [args.method]
    if "dl" in methods and not args.model:
        raise ConfigError("--model is required for the dl method")
    cfg = RunConfig("eval", _seed(args), manifest.task,
                    manifest.width if manifest.task == "detection" else None,
                    paths={"data": str(data), "out": str(args.out), "model": str(args.model or "")},
                    hyper={"method": args.method, "bin_width": args.bin_width}).validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ranges = manifest.ranges()
    summary = {}
    for method in methods:
        if method == "conventional":
            preds = (conventional_detection(test, ranges) if manifest.task == "detection"
                     else conventional_cfo(test, ranges))
        else:
            model, _ = load_model(args.model, expect_block_len=test.width)
            preds = model.predict(test.payload)
        if not np.all(np.isfinite(preds)):
            raise NumericError(f"{method} produced non-finite predictions")
        report = _report(manifest.task, preds, test, args.bin_width, cfg.hash)
        emit_report(report, out / f"{method}.csv")
        emit_report(report, out / f"{method}.svg")
        summary[method] = {"overall_mae": report.overall_mae, "miss_rate": report.miss_rate,
                           "false_alarm_rate": report.false_alarm_rate,
                           "n_records": report.n_records, "outliers": report.outliers}
    path = out / "manifest.json"
    path.write_text(json.dumps({"task": manifest.task, "summary": summary},
                               indent=2, sort_keys=True) + "\n")
    append_provenance(path, cfg)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_flops(args) -> int:
    cfg = RunConfig("flops", _seed(args), args.task,
                    args.block if args.task == "detection" else None,
                    args.cell if args.task == "cfo" else "detector",
                    paths={"out": str(args.out or "")}).validate()
    doc = {}
    if args.task == "cfo":
        kinds = list(PUBLISHED_CFO_FLOPS) if args.cell == "all" else [args.cell]
        for kind in kinds:
            b = cfo_model_flops(kind)
            ref = PUBLISHED_CFO_FLOPS[kind]
            print(f"[{kind}]\n{b.table()}\nreference {ref}, "
                  f"discrepancy {100 * relative_discrepancy(b.total, ref):+.2f}%\n")
            doc[kind] = {"mul": b.count.mul, "add": b.count.add, "total": b.total, "reference": ref}
    else:
        b = detector_block_flops(args.block)
        cnn = detector_throughput_flops(b.count, args.block, args.sample_rate)
        conv = detector_throughput_flops(None, args.block, args.sample_rate)
        print(f"[cnn B={args.block}]\n{b.table()}\n"
              f"cnn {cnn:.6g} FLOPS, conventional {conv:.6g} FLOPS\n")
        doc = {"per_block": b.total, "cnn_flops_per_s": cnn, "conventional_flops_per_s": conv}
    if args.out:
        path = Path(args.out)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        append_provenance(path, cfg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = RunConfig("simulate", _seed(args), paths={"out": str(args.out)},
                    ranges={"snr_min": args.snr, "snr_max": args.snr, "channel": args.channel,
                            "cfo_max": abs(args.cfo)},
                    hyper={"n": args.len}).validate()
    if args.offset + 560 > args.len:
        raise ConfigError("--offset leaves no room for the packet within --len")
    chan = ChannelConfig(snr_db=args.snr, cfo_hz=args.cfo, timing_offset=args.offset,
                         fading=args.channel, seed=cfg.seed)
    w = Transmitter().receive(chan, args.len)
    out = Path(args.out)
    write_waveform(out, w)
    det = detect_packet(w)
    result = {"detected": det.detected, "start": det.start, "metric_peak": det.metric_peak}
    if det.detected and det.start is not None and 0 <= det.start <= args.len - 320:
        result["cfo_hz"] = estimate_cfo(w, det.start).total_hz
    side = out.with_suffix(".json")
    side.write_text(json.dumps({"result": result}, indent=2, sort_keys=True) + "\n")
    append_provenance(side, cfg)
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halowsync", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset with train/val/test splits")
    g.add_argument("--task", choices=["detection", "cfo"], required=True)
    g.add_argument("--block", type=int, default=40)
    g.add_argument("--n", type=int, default=10_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--snr-min", type=float, default=1.0)
    g.add_argument("--snr-max", type=float, default=25.0)
    g.add_argument("--cfo-max", type=float, default=15_625.0)
    g.add_argument("--channel", choices=["awgn", "multipath"])
    g.add_argument("--alignment", choices=["ideal", "detector"], default="ideal")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model on a generated dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--cell", choices=["lstm", "gru", "dnn"], default="lstm")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch", type=int)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="checkpoint stem")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score conventional and/or trained estimators")
    e.add_argument("--data", required=True)
    e.add_argument("--method", choices=["conventional", "dl", "both"], default="conventional")
    e.add_argument("--model")
    e.add_argument("--split", choices=["train", "val", "test"], default="test")
    e.add_argument("--bin-width", type=float, default=1.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("flops", help="FLOP breakdowns")
    f.add_argument("--task", choices=["detection", "cfo"], default="cfo")
    f.add_argument("--cell", choices=["lstm", "gru", "dnn", "conventional", "all"], default="all")
    f.add_argument("--block", type=int, default=40)
    f.add_argument("--sample-rate", type=float, default=1e6)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out")
    f.set_defaults(func=cmd_flops)

    s = sub.add_parser("simulate", help="one NDP through the channel, written as WV01")
    s.add_argument("--snr", type=float, default=math.inf)
    s.add_argument("--cfo", type=float, default=0.0)
    s.add_argument("--offset", type=int, default=100)
    s.add_argument("--len", type=int, default=800)
    s.add_argument("--channel", choices=["awgn", "multipath"], default="awgn")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)
    return p


def _fail(code: int, kind: str, exc: BaseException) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, FileNotFoundError, KeyError) as exc:
        return _fail(EXIT_DATA, "data", exc)
    except (NumericError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, "numeric", exc)
    except (ConfigError, ValueError) as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except OSError as exc:
        return _fail(EXIT_DATA, "data", exc)


if __name__ == "__main__":
    sys.exit(main())
