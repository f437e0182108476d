"""Command-line surface: synth, train, stream, eval, fuse, inspect."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import kernels
from .checkpoint import load_checkpoint
from .data import load_stream
from .dataset import load_dataset, write_dataset
from .evalmetrics import DEFAULT_RATIOS, EvalReport, evaluate_dataset
from .model import Model, ModelConfig
from .nn import OptConfig
from .streaming import (
    Mode,
    naive_run_stream,
    parse_mode,
    read_predictions,
    run_stream,
    write_predictions,
)
from .synth import SynthConfig, synth_generate
from .temporal import TemporalSpec, scale_table
from .topology import default_topology, load_topology
from .trainer import TrainConfig, train


class CliError(Exception):
    pass


def _parse_range(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise CliError(f"expected LO,HI range, got {text!r}")
    return int(parts[0]), int(parts[1])


def cmd_synth(args) -> int:
    topology = load_topology(args.topology) if args.topology else default_topology()
    cfg = SynthConfig(
        class_count=args.classes,
        stream_count=args.streams,
        stream_len=args.length,
        duration_range=_parse_range(args.duration_range),
        gap_range=_parse_range(args.gap_range),
        noise_sigma=args.noise_sigma,
        topology=topology,
    )
    if os.path.isdir(args.out) and os.listdir(args.out) and not args.force:
        raise CliError(f"output directory {args.out!r} is not empty (use --force)")
    streams = synth_generate(cfg, args.seed)
    write_dataset(
        streams,
        topology,
        args.out,
        manifest_extra={
            "seed": args.seed,
            "synth": {
                "classes": args.classes,
                "streams": args.streams,
                "length": args.length,
                "duration_range": list(cfg.duration_range),
                "gap_range": list(cfg.gap_range),
                "noise_sigma": args.noise_sigma,
            },
        },
    )
    total = sum(len(s.instances) for s in streams)
    print(f"wrote {len(streams)} streams ({total} instances) to {args.out}")
    return 0


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    allowed = {
        "epochs",
        "gamma",
        "stride",
        "batch_size",
        "lr",
        "momentum",
        "decay",
        "layer_noise_prob",
        "seed",
        "mode",
        "channels",
        "raw_distance",
    }
    unknown = set(doc) - allowed
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    return doc


def cmd_train(args) -> int:
    if not os.path.isdir(args.data):
        raise CliError(f"dataset directory {args.data!r} not found")
    streams, topology, manifest = load_dataset(args.data)
    overrides = _load_config_file(args.config)

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return overrides.get(key, default)

    mode = pick(args.mode, "mode", "ssnet")
    if mode != "ssnet":
        parsed = parse_mode(mode)
        if parsed.kind != "fsnet":
            raise CliError("training mode must be ssnet or fsnet:<scale>")
    cfg = TrainConfig(
        epochs=pick(args.epochs, "epochs", 5),
        gamma=pick(args.gamma, "gamma", 0.01),
        clip_stride=pick(args.stride, "stride", 4),
        batch_size=pick(args.batch_size, "batch_size", 16),
        opt=OptConfig(
            learning_rate=pick(args.lr, "lr", 1e-3),
            momentum=pick(args.momentum, "momentum", 0.9),
            decay=pick(args.decay, "decay", 0.95),
        ),
        layer_noise_prob=pick(args.layer_noise_prob, "layer_noise_prob", 0.5),
        seed=pick(args.seed, "seed", 0),
        mode=mode,
    )
    model_cfg = ModelConfig(
        topology=topology,
        class_count=manifest["class_count"],
        channels=pick(args.channels, "channels", 50),
        normalize_distance=not pick(args.raw_distance, "raw_distance", False),
    )
    model = Model.create(model_cfg, seed=cfg.seed)
    path = train(streams, model, cfg, args.out, quiet=args.quiet)
    print(f"checkpoint written to {path} (log: {path}.log.csv)")
    return 0


def _load_model(path: str, topology_path: str | None = None) -> Model:
    params, manifest = load_checkpoint(path)
    topology = load_topology(topology_path) if topology_path else None
    cfg = ModelConfig.from_dict(manifest["model_config"], topology)
    if cfg.topology.digest() != manifest["topology_digest"]:
        raise CliError(
            "checkpoint topology digest does not match the provided topology: "
            f"{manifest['topology_digest']} vs {cfg.topology.digest()}"
        )
    return Model(cfg, params)


def _stream_one(model: Model, frames_path: str, ann_path: str | None, mode: Mode, args) -> tuple:
    joint_count = model.config.topology.joint_count
    if ann_path:
        stream = load_stream(frames_path, ann_path, joint_count)
    else:
        if mode.needs_labels:
            raise CliError("ssnet-gt mode requires --annotations")
        with open(frames_path, "r", encoding="utf-8") as fh:
            frames_text = fh.read()
        from .data import parse_stream

        ann_text = json.dumps({"class_count": model.config.class_count, "instances": []})
        stream = parse_stream(frames_text, ann_text, joint_count)
    preds, report = run_stream(model, stream, mode, backend=args.backend)
    return stream, preds, report


def cmd_stream(args) -> int:
    model = _load_model(args.model, args.topology)
    mode = parse_mode(args.mode)

    if os.path.isdir(args.input):
        streams, topology, manifest = load_dataset(args.input)
        if topology.digest() != model.config.topology.digest():
            raise CliError("dataset topology does not match the model checkpoint")
        os.makedirs(args.out, exist_ok=True)
        for stream in streams:
            preds, report = run_stream(model, stream, mode, backend=args.backend)
            out_path = os.path.join(args.out, f"{stream.name}.preds.csv")
            write_predictions(out_path, preds)
            print(f"{stream.name}: {report.frames} frames at {report.fps:.0f} fps -> {out_path}")
        return 0

    stream, preds, report = _stream_one(model, args.input, args.annotations, mode, args)
    write_predictions(args.out, preds)
    print(
        f"{report.frames} frames in {report.seconds:.3f}s ({report.fps:.0f} fps), "
        f"{report.cols_per_step} activation columns per step -> {args.out}"
    )
    if args.bench:
        naive_preds, naive_seconds = naive_run_stream(model, stream, mode)
        naive_fps = report.frames / naive_seconds
        print(
            f"naive full-window recompute: {naive_seconds:.3f}s ({naive_fps:.0f} fps), "
            f"{report.naive_cols_per_step} activation columns per step"
        )
        print(f"activation sharing speedup: {naive_seconds / report.seconds:.2f}x")
    return 0


def _read_traces(pred_dir: str, data_dir: str):
    streams, _, manifest = load_dataset(data_dir)
    traces = []
    for stream in streams:
        path = os.path.join(pred_dir, f"{stream.name}.preds.csv")
        if not os.path.isfile(path):
            raise CliError(f"missing prediction file {path}")
        trace = read_predictions(path)
        traces.append((trace["pred_class"], trace["s_hat"], stream))
    return traces


def cmd_eval(args) -> int:
    ratios = tuple(int(r) for r in args.ratios.split(",")) if args.ratios else DEFAULT_RATIOS
    traces = _read_traces(args.preds, args.data)
    report = evaluate_dataset(traces, ratios=ratios)
    prefix = args.out
    with open(prefix + ".json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    with open(prefix + ".csv", "w", encoding="utf-8") as fh:
        fh.write("\n".join(report.csv_rows()) + "\n")
    print(f"report written to {prefix}.json and {prefix}.csv")
    for row in report.csv_rows()[1:]:
        print("  " + row)
    if args.compare:
        other = evaluate_dataset(_read_traces(args.compare, args.data), ratios=ratios)
        print(f"comparison ({args.preds} vs {args.compare}):")
        print("  ratio,accuracy_a,accuracy_b,delta")
        for r in sorted(report.ratio_accuracy):
            a = report.ratio_accuracy[r]
            b = other.ratio_accuracy.get(r, float("nan"))
            print(f"  {r},{a:.4f},{b:.4f},{a - b:+.4f}")
    return 0


def cmd_fuse(args) -> int:
    if len(args.inputs) < 2:
        raise CliError("fuse needs at least two prediction files")
    traces = [read_predictions(p) for p in args.inputs]
    length = len(traces[0]["t"])
    k = traces[0]["probs"].shape[1]
    for tr in traces[1:]:
        if len(tr["t"]) != length or tr["probs"].shape[1] != k:
            raise CliError("prediction files disagree on length or class count")
    probs = np.mean([tr["probs"] for tr in traces], axis=0)
    s_hat = np.mean([tr["s_hat"] for tr in traces], axis=0)
    pred = probs.argmax(axis=1)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("t,pred_class,s_hat,layer_used," + ",".join(f"p_{i}" for i in range(k)) + "\n")
        for t in range(length):
            row = ",".join(f"{v:.8g}" for v in probs[t])
            fh.write(f"{t},{pred[t]},{s_hat[t]:.6f},0,{row}\n")
    print(f"fused {len(args.inputs)} prediction files -> {args.out}")
    return 0


def cmd_inspect(args) -> int:
    if args.model:
        params, manifest = load_checkpoint(args.model)
        cfg = manifest["model_config"]
        total = sum(int(np.prod(e["shape"])) for e in manifest["tensor_index"])
        print(f"checkpoint: {args.model}")
        print(f"  format version: {manifest['format_version']}")
        print(f"  topology digest: {manifest['topology_digest']}")
        print(f"  tensors: {len(manifest['tensor_index'])}, parameters: {total}")
        print(f"  model config: {json.dumps(cfg)}")
        spec = TemporalSpec(tuple(cfg["temporal_dilations"]), cfg["channels"])
        print(f"  scale table: {scale_table(spec)}")
    if args.topology:
        topo = load_topology(args.topology)
        print(f"topology: {args.topology}")
        print(f"  joints: {topo.joint_count}, root: {topo.root}, height: {topo.height()}")
        print(f"  digest: {topo.digest()}")
    if args.data:
        streams, topo, manifest = load_dataset(args.data)
        n_inst = sum(len(s.instances) for s in streams)
        print(f"dataset: {args.data}")
        print(
            f"  streams: {len(streams)}, frames: {sum(len(s) for s in streams)}, "
            f"instances: {n_inst}, classes (incl blank): {manifest['class_count']}"
        )
    print(f"kernel backend: {kernels.DEFAULT_BACKEND} (compiled available: {kernels.HAVE_COMPILED})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssnet", description="Streaming skeleton-based online action prediction"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--classes", type=int, required=True, help="action classes (blank excluded)")
    p.add_argument("--streams", type=int, default=10)
    p.add_argument("--length", type=int, default=2000, help="frames per stream")
    p.add_argument("--duration-range", default="40,160", help="instance length LO,HI")
    p.add_argument("--gap-range", default="10,60", help="blank gap length LO,HI")
    p.add_argument("--noise-sigma", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--topology", help="topology JSON (default: shipped 25-joint tree)")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true", help="overwrite a non-empty directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--mode", help="ssnet (default) or fsnet:<scale>")
    p.add_argument("--epochs", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--layer-noise-prob", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument(
        "--raw-distance",
        action="store_const",
        const=True,
        help="regress raw frame distances instead of normalized [0,1]",
    )
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stream", help="run online inference over frames")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="frames JSONL file or dataset directory")
    p.add_argument("--annotations", help="annotation JSON (required for ssnet-gt)")
    p.add_argument("--topology", help="topology JSON if not the shipped default")
    p.add_argument("--out", required=True, help="prediction CSV (or directory for datasets)")
    p.add_argument("--mode", default="ssnet", help="ssnet | fsnet:<scale> | ssnet-gt")
    p.add_argument("--backend", default="auto", choices=["auto", "compiled", "python"])
    p.add_argument("--bench", action="store_true", help="also time the naive recompute path")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("eval", help="score prediction CSVs against annotations")
    p.add_argument("--preds", required=True, help="directory of *.preds.csv")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="report path prefix")
    p.add_argument("--ratios", help="comma list of observation ratios (default 10..90)")
    p.add_argument("--compare", help="second prediction directory for a side-by-side table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fuse", help="average several prediction CSVs (multi-net fusion)")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("inspect", help="describe checkpoints, topologies, or datasets")
    p.add_argument("--model")
    p.add_argument("--topology")
    p.add_argument("--data")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
