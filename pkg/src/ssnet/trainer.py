"""Clip sampling, joint loss, and the epoch loop with per-epoch lr decay."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_checkpoint
from .data import MAX_BODIES, AnnotatedStream, frame_label_arrays
from .model import Model, fixed_layer_for_scale
from .nn import OptConfig, sgd_momentum_step
from .temporal import proper_layer


@dataclass
class TrainConfig:
    epochs: int
    gamma: float = 0.01
    clip_stride: int = 4
    batch_size: int = 16
    opt: OptConfig = field(default_factory=OptConfig)
    layer_noise_prob: float = 0.5
    seed: int = 0
    mode: str = "ssnet"  # "ssnet" or "fsnet:<scale>"

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.clip_stride < 1 or self.batch_size < 1:
            raise ValueError("clip_stride and batch_size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.mode != "ssnet" and not self.mode.startswith("fsnet:"):
            raise ValueError(f"unknown training mode {self.mode!r}")

    def fixed_scale(self) -> int | None:
        if self.mode.startswith("fsnet:"):
            return int(self.mode.split(":", 1)[1])
        return None


@dataclass(frozen=True)
class Clip:
    stream: int
    end: int
    cls: int
    start_distance: int


def make_clips(streams: list[AnnotatedStream], stride: int) -> list[Clip]:
    """Sliding windows ending at t = 0, stride, 2*stride, ... per stream.

    Each clip carries the class and start-distance label of its final frame.
    """
    if not streams:
        raise ValueError("empty dataset")
    clips = []
    for si, stream in enumerate(streams):
        cls, dist, _ = frame_label_arrays(stream)
        for t in range(0, len(stream), stride):
            clips.append(Clip(si, t, int(cls[t]), int(dist[t])))
    return clips


def gather_batch(
    streams: list[AnnotatedStream], clips: list[Clip], window: int, frame_dim: int
):
    """Materialize clip windows: left-zero-padded coords plus labels."""
    b = len(clips)
    coords = np.zeros((b, window, MAX_BODIES, frame_dim), dtype=np.float32)
    counts = np.ones((b, window), dtype=np.uint8)
    valid_from = np.zeros(b, dtype=np.int64)
    targets = np.zeros(b, dtype=np.int64)
    dists = np.zeros(b, dtype=np.int64)
    for i, clip in enumerate(clips):
        stream = streams[clip.stream]
        lo = max(0, clip.end - window + 1)
        n = clip.end - lo + 1
        coords[i, window - n :] = stream.coords[lo : clip.end + 1]
        counts[i, window - n :] = stream.body_count[lo : clip.end + 1]
        valid_from[i] = window - n
        targets[i] = clip.cls
        dists[i] = clip.start_distance
    return coords, counts, valid_from, targets, dists


def select_layers(
    dists: np.ndarray,
    model: Model,
    cfg: TrainConfig,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Training-time layer choice: ground-truth proper layer, optionally noised."""
    spec = model.config.spec
    fixed = cfg.fixed_scale()
    if fixed is not None:
        return np.full(len(dists), fixed_layer_for_scale(fixed, spec), dtype=np.int64)
    l_sel = np.asarray([proper_layer(float(s), spec) for s in dists], dtype=np.int64)
    if rng is not None and cfg.layer_noise_prob > 0:
        noise_on = rng.random(len(dists)) < cfg.layer_noise_prob
        offsets = rng.choice([-1, 1], size=len(dists))
        l_sel = np.where(noise_on, l_sel + offsets, l_sel)
        l_sel = np.clip(l_sel, 1, spec.layer_count)
    return l_sel


def train_step(
    model: Model,
    streams: list[AnnotatedStream],
    clips: list[Clip],
    cfg: TrainConfig,
    lr: float,
    rng: np.random.Generator | None,
):
    """One optimizer step over a clip batch; returns (loss, loss_c, loss_s, preds, targets)."""
    coords, counts, valid_from, targets, dists = gather_batch(
        streams, clips, model.config.window, model.config.frame_dim
    )
    l_sel = select_layers(dists, model, cfg, rng)
    loss, loss_c, loss_s, preds = model.loss_clips(
        coords, counts, l_sel, valid_from, targets, dists, cfg.gamma
    )
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss {loss} (loss_c={loss_c}, loss_s={loss_s}) "
            f"on clips ending at {[c.end for c in clips]}"
        )
    sgd_momentum_step(model.params, cfg.opt, lr=lr)
    return loss, loss_c, loss_s, preds, targets


def train(
    streams: list[AnnotatedStream],
    model: Model,
    cfg: TrainConfig,
    out_path: str,
    log_path: str | None = None,
    quiet: bool = True,
) -> str:
    """Full training run; writes per-epoch checkpoints, a log CSV, and the
    final checkpoint at out_path. Deterministic given cfg.seed."""
    clips = make_clips(streams, cfg.clip_stride)
    rng = np.random.default_rng(cfg.seed)
    digest = model.config.topology.digest()
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    log_path = log_path or out_path + ".log.csv"
    log_rows = ["epoch,loss,loss_c,loss_s,lr,frame_acc"]

    lr = cfg.opt.learning_rate
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(clips))
        sums = np.zeros(3)
        hits = 0
        total = 0
        n_batches = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [clips[i] for i in order[lo : lo + cfg.batch_size]]
            loss, loss_c, loss_s, preds, targets = train_step(
                model, streams, batch, cfg, lr, rng
            )
            sums += (loss, loss_c, loss_s)
            hits += int((preds == targets).sum())
            total += len(batch)
            n_batches += 1
        frame_acc = hits / max(1, total)
        log_rows.append(
            f"{epoch},{sums[0] / n_batches:.6f},{sums[1] / n_batches:.6f},"
            f"{sums[2] / n_batches:.6f},{lr:.8f},{frame_acc:.4f}"
        )
        if not quiet:
            print(log_rows[-1], flush=True)
        save_checkpoint(
            model.params, digest, model.config.to_dict(), f"{out_path}.epoch{epoch}"
        )
        lr *= cfg.opt.decay

    save_checkpoint(model.params, digest, model.config.to_dict(), out_path)
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(log_rows) + "\n")
    return out_path
