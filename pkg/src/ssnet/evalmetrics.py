"""Prediction-trace metrics: observation-ratio accuracy curves, SL-Score,
start-point regression error, and frame-level accuracy.

All metrics are pure functions of (predictions, annotations). Instance-level
quantities (segment accuracies, per-ratio regression errors) are averaged
over instances; SL-Score and frame accuracy are averaged over frames.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import AnnotatedStream, frame_label_arrays

DEFAULT_RATIOS = (10, 20, 30, 40, 50, 60, 70, 80, 90)
REGRESSION_RATIOS = (5, 10, 30, 50, 70, 90)


def _segment_end(start: int, length: int, ratio: int) -> int:
    """Last frame of the observed p% segment (at least one frame)."""
    covered = max(1, math.ceil(ratio / 100.0 * length))
    return start + covered - 1


def observation_ratio_accuracy(
    pred_classes: np.ndarray, stream: AnnotatedStream, ratios=DEFAULT_RATIOS
) -> dict[int, float]:
    """Mean over instances of the accuracy inside the observed p% segment."""
    per_ratio = {r: [] for r in ratios}
    for inst in stream.instances:
        for r in ratios:
            end = _segment_end(inst.start, inst.length, r)
            seg = pred_classes[inst.start : end + 1]
            per_ratio[r].append(float((seg == inst.label).mean()))
    return {r: float(np.mean(v)) if v else float("nan") for r, v in per_ratio.items()}


def sl_score_mean(
    pred_classes: np.ndarray, s_hats: np.ndarray, stream: AnnotatedStream
) -> float:
    """Mean over in-instance frames of e^(-|s_hat - s| / d), zeroed on
    misclassification."""
    cls, dist, seg_len = frame_label_arrays(stream)
    scores = []
    for inst in stream.instances:
        idx = np.arange(inst.start, inst.end + 1)
        correct = pred_classes[idx] == inst.label
        err = np.abs(s_hats[idx] - dist[idx])
        scores.append(np.where(correct, np.exp(-err / inst.length), 0.0))
    if not scores:
        return float("nan")
    return float(np.concatenate(scores).mean())


def regression_error_at_ratio(
    s_hats: np.ndarray, stream: AnnotatedStream, ratios=REGRESSION_RATIOS
) -> dict[int, float]:
    """Mean over instances of |s_hat - s| at the p% progress frame."""
    _, dist, _ = frame_label_arrays(stream)
    per_ratio = {r: [] for r in ratios}
    for inst in stream.instances:
        for r in ratios:
            t = _segment_end(inst.start, inst.length, r)
            per_ratio[r].append(abs(float(s_hats[t]) - float(dist[t])))
    return {r: float(np.mean(v)) if v else float("nan") for r, v in per_ratio.items()}


def frame_accuracy(pred_classes: np.ndarray, stream: AnnotatedStream) -> float:
    """Fraction of all frames (blank included) classified correctly."""
    cls, _, _ = frame_label_arrays(stream)
    return float((pred_classes == cls).mean())


@dataclass
class EvalReport:
    ratio_accuracy: dict[int, float] = field(default_factory=dict)
    sl_score: float = float("nan")
    regression_error: dict[int, float] = field(default_factory=dict)
    frame_acc: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "ratio_accuracy": {str(k): v for k, v in sorted(self.ratio_accuracy.items())},
            "sl_score": self.sl_score,
            "regression_error": {str(k): v for k, v in sorted(self.regression_error.items())},
            "frame_accuracy": self.frame_acc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def csv_rows(self) -> list[str]:
        rows = ["metric,ratio,value"]
        for r, v in sorted(self.ratio_accuracy.items()):
            rows.append(f"accuracy,{r},{v:.6f}")
        rows.append(f"sl_score,,{self.sl_score:.6f}")
        for r, v in sorted(self.regression_error.items()):
            rows.append(f"regression_error,{r},{v:.6f}")
        rows.append(f"frame_accuracy,,{self.frame_acc:.6f}")
        return rows


def evaluate_dataset(
    traces: list[tuple[np.ndarray, np.ndarray, AnnotatedStream]],
    ratios=DEFAULT_RATIOS,
    regression_ratios=REGRESSION_RATIOS,
) -> EvalReport:
    """Pool metrics over (pred_classes, s_hats, stream) traces.

    Instances pool across streams for the per-ratio means; frames pool across
    streams for SL-Score and frame accuracy.
    """
    acc_pool: dict[int, list[float]] = {r: [] for r in ratios}
    reg_pool: dict[int, list[float]] = {r: [] for r in regression_ratios}
    frame_hits = 0
    frame_total = 0
    sl_values = []
    for pred_classes, s_hats, stream in traces:
        if len(pred_classes) != len(stream):
            raise ValueError(
                f"prediction/stream length mismatch: {len(pred_classes)} vs {len(stream)}"
            )
        cls, dist, _ = frame_label_arrays(stream)
        frame_hits += int((pred_classes == cls).sum())
        frame_total += len(stream)
        for inst in stream.instances:
            idx = np.arange(inst.start, inst.end + 1)
            correct = pred_classes[idx] == inst.label
            err = np.abs(s_hats[idx] - dist[idx])
            sl_values.append(np.where(correct, np.exp(-err / inst.length), 0.0))
            for r in ratios:
                end = _segment_end(inst.start, inst.length, r)
                seg = pred_classes[inst.start : end + 1]
                acc_pool[r].append(float((seg == inst.label).mean()))
            for r in regression_ratios:
                t = _segment_end(inst.start, inst.length, r)
                reg_pool[r].append(abs(float(s_hats[t]) - float(dist[t])))
    return EvalReport(
        ratio_accuracy={r: float(np.mean(v)) for r, v in acc_pool.items() if v},
        sl_score=float(np.concatenate(sl_values).mean()) if sl_values else float("nan"),
        regression_error={r: float(np.mean(v)) for r, v in reg_pool.items() if v},
        frame_acc=frame_hits / frame_total if frame_total else float("nan"),
    )
