"""Online per-frame inference with activation sharing.

Each new frame costs exactly one activation column (one node per temporal
layer); everything older is reused from per-layer ring buffers sized by the
next layer's dilation. A naive runner that recomputes the full trailing
window per frame is kept for benchmarking and equivalence tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import temporal, treeconv
from .data import AnnotatedStream, frame_label_arrays
from .kernels import get_backend
from .model import Model, fixed_layer_for_scale
from .nn import relu, softmax
from .temporal import proper_layer


@dataclass(frozen=True)
class Mode:
    kind: str  # "ssnet" | "fsnet" | "ssnet-gt"
    fixed_scale: int | None = None

    @property
    def needs_labels(self) -> bool:
        return self.kind == "ssnet-gt"

    def __str__(self) -> str:
        return f"fsnet:{self.fixed_scale}" if self.kind == "fsnet" else self.kind


def parse_mode(text: str) -> Mode:
    if text == "ssnet":
        return Mode("ssnet")
    if text == "ssnet-gt":
        return Mode("ssnet-gt")
    if text.startswith("fsnet:"):
        scale = int(text.split(":", 1)[1])
        if scale < 1:
            raise ValueError(f"fsnet scale must be positive, got {scale}")
        return Mode("fsnet", scale)
    raise ValueError(f"unknown mode {text!r}; expected ssnet, fsnet:<scale>, or ssnet-gt")


@dataclass(frozen=True)
class Prediction:
    probs: np.ndarray
    pred_class: int
    s_hat: float  # regressed start distance, frames
    layer_used: int


class StreamState:
    """Per-stream incremental state: ring buffers plus the last regressed distance.

    Total buffered activations are sum(dilations) columns regardless of how
    long the stream runs.
    """

    def __init__(self, model: Model, mode: Mode, backend: str = "auto"):
        self.model = model
        self.mode = mode
        self.impl = get_backend(backend)
        cfg = model.config
        spec = cfg.spec
        p = model.params
        dtype = model.dtype
        layer_count = spec.layer_count
        c = spec.channels

        self.embed = np.ascontiguousarray(p["temporal.embed"])
        self.w1 = np.ascontiguousarray(
            np.stack([p[f"temporal.layer{l}.w1"] for l in range(1, layer_count + 1)])
        )
        self.w2 = np.ascontiguousarray(
            np.stack([p[f"temporal.layer{l}.w2"] for l in range(1, layer_count + 1)])
        )
        self.bias = np.ascontiguousarray(
            np.stack([p[f"temporal.layer{l}.bias"] for l in range(1, layer_count + 1)])
        )
        # buffers[i] holds the trailing activations of layer i (0 = embedded
        # input); layer i+1 reads the entry from dilations[i] steps back.
        self.buffers = [
            np.zeros((spec.dilations[i], c), dtype=dtype) for i in range(layer_count)
        ]
        self.positions = [0] * layer_count
        self.past = np.zeros((layer_count, c), dtype=dtype)
        self.cols = np.zeros((layer_count, c), dtype=dtype)
        self.s_prev = 0.0
        self.t = 0
        if mode.kind == "fsnet":
            self.fixed_layer = fixed_layer_for_scale(mode.fixed_scale, spec)
        else:
            self.fixed_layer = None

    def buffered_activation_count(self) -> int:
        return sum(b.size for b in self.buffers)


def stream_init(model: Model, mode: Mode, backend: str = "auto") -> StreamState:
    """Fresh state: zeroed buffers (left zero padding) and s_prev = 0."""
    return StreamState(model, mode, backend)


def _select_layer(state: StreamState, gt_distance: float | None) -> int:
    spec = state.model.config.spec
    if state.mode.kind == "fsnet":
        return state.fixed_layer
    if state.mode.kind == "ssnet-gt":
        if gt_distance is None:
            raise ValueError("ssnet-gt mode requires a ground-truth distance per frame")
        return proper_layer(float(gt_distance), spec)
    return proper_layer(state.s_prev, spec)


def stream_step(
    state: StreamState, bodies: np.ndarray, gt_distance: float | None = None
) -> Prediction:
    """Advance one frame: one fresh activation per temporal layer."""
    model = state.model
    p = model.params
    repr_vec, _ = treeconv.spatial_forward(bodies, p, model.hierarchy)
    x0 = state.embed @ repr_vec

    for i, buf in enumerate(state.buffers):
        state.past[i] = buf[state.positions[i]]
    state.impl.temporal_column_step(state.w1, state.w2, state.bias, state.past, x0, state.cols)

    new_vals = [x0] + [state.cols[i] for i in range(len(state.buffers) - 1)]
    for i, buf in enumerate(state.buffers):
        buf[state.positions[i]] = new_vals[i]
        state.positions[i] = (state.positions[i] + 1) % buf.shape[0]

    l_sel = _select_layer(state, gt_distance)
    g_cls = state.cols[:l_sel].mean(axis=0)
    g_reg = state.cols.mean(axis=0)
    h1 = relu(p["head.fc1.w"] @ g_cls + p["head.fc1.b"])
    logits = p["head.fc2.w"] @ h1 + p["head.fc2.b"]
    h3 = relu(p["head.fc3.w"] @ g_reg + p["head.fc3.b"])
    h4 = relu(p["head.fc4.w"] @ h3 + p["head.fc4.b"])
    s_out = float((p["head.fc5.w"] @ h4 + p["head.fc5.b"])[0])

    probs = softmax(logits)
    s_hat = float(model.distance_from_output(s_out))
    state.s_prev = s_hat
    state.t += 1
    return Prediction(probs, int(probs.argmax()), s_hat, int(l_sel))


@dataclass
class StreamReport:
    frames: int
    seconds: float
    fps: float
    cols_per_step: int
    naive_cols_per_step: int
    naive_seconds: float | None = None
    naive_fps: float | None = None

    @property
    def speedup(self) -> float | None:
        if self.naive_seconds is None:
            return None
        return self.naive_seconds / self.seconds


def run_stream(
    model: Model,
    stream: AnnotatedStream,
    mode: Mode,
    backend: str = "auto",
) -> tuple[list[Prediction], StreamReport]:
    """One Prediction per frame plus a timing report."""
    state = stream_init(model, mode, backend)
    gt = frame_label_arrays(stream)[1] if mode.needs_labels else None
    preds = []
    start = time.perf_counter()
    for t in range(len(stream)):
        bodies = stream.bodies_at(t)
        preds.append(stream_step(state, bodies, None if gt is None else float(gt[t])))
    elapsed = time.perf_counter() - start
    spec = model.config.spec
    report = StreamReport(
        frames=len(stream),
        seconds=elapsed,
        fps=len(stream) / elapsed if elapsed > 0 else float("inf"),
        cols_per_step=spec.layer_count,
        naive_cols_per_step=spec.window * spec.layer_count,
    )
    return preds, report


def naive_run_stream(
    model: Model, stream: AnnotatedStream, mode: Mode
) -> tuple[list[Prediction], float]:
    """Per-frame full-window recompute (no activation sharing).

    Frame representations are still computed once per frame; the naive cost
    is re-running the whole temporal window at every step.
    """
    spec = model.config.spec
    window = spec.window
    reprs, _ = model.frame_reprs(stream.coords, stream.body_count)
    gt = frame_label_arrays(stream)[1] if mode.needs_labels else None
    fixed = (
        fixed_layer_for_scale(mode.fixed_scale, spec) if mode.kind == "fsnet" else None
    )
    dim = reprs.shape[1]
    preds = []
    s_prev = 0.0
    start = time.perf_counter()
    for t in range(len(stream)):
        if mode.kind == "fsnet":
            l_sel = fixed
        elif mode.kind == "ssnet-gt":
            l_sel = proper_layer(float(gt[t]), spec)
        else:
            l_sel = proper_layer(s_prev, spec)
        lo = max(0, t - window + 1)
        tail = reprs[lo : t + 1]
        padded = np.zeros((window, dim), dtype=model.dtype)
        padded[window - tail.shape[0] :] = tail
        logits, s_out, _ = temporal.window_forward(
            padded, l_sel, model.params, spec, valid_from=window - tail.shape[0]
        )
        probs = softmax(logits)
        s_hat = float(model.distance_from_output(s_out))
        s_prev = s_hat
        preds.append(Prediction(probs, int(probs.argmax()), s_hat, int(l_sel)))
    elapsed = time.perf_counter() - start
    return preds, elapsed


def write_predictions(path: str, preds: list[Prediction]) -> None:
    k = preds[0].probs.shape[0] if preds else 0
    header = "t,pred_class,s_hat,layer_used," + ",".join(f"p_{i}" for i in range(k))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for t, pr in enumerate(preds):
            probs = ",".join(f"{v:.8g}" for v in pr.probs)
            fh.write(f"{t},{pr.pred_class},{pr.s_hat:.6f},{pr.layer_used},{probs}\n")


def read_predictions(path: str) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    k = len(header) - 4
    data = np.asarray(rows, dtype=np.float64)
    return {
        "t": data[:, 0].astype(np.int64),
        "pred_class": data[:, 1].astype(np.int64),
        "s_hat": data[:, 2],
        "layer_used": data[:, 3].astype(np.int64),
        "probs": data[:, 4 : 4 + k],
    }
