"""Annotated skeleton streams: ingestion, validation, and per-frame supervision.

File formats
------------
Frame file: one JSON record per line,
    ``{"t": <int>, "bodies": [[x0, y0, z0, ..., x_{J-1}, y_{J-1}, z_{J-1}], ...]}``
with 1-2 bodies per frame (an empty frame is stored/encoded as one all-zero body).

Annotation file:
    ``{"class_count": N, "instances": [{"start": a, "end": b, "label": k}, ...]}``
where label 0 is reserved for the blank class and never appears in instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MAX_BODIES = 2
BLANK = 0


class StreamError(ValueError):
    """Raised when a frame or annotation document violates stream invariants."""


@dataclass(frozen=True)
class ActionInstance:
    start: int
    end: int  # inclusive
    label: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class FrameLabel:
    cls: int
    start_distance: int
    segment_length: int


@dataclass
class AnnotatedStream:
    """Dense view of a stream: coords[t, b] is the flat (3J,) pose of body b."""

    coords: np.ndarray  # (T, MAX_BODIES, 3J) float32, unused body slots zeroed
    body_count: np.ndarray  # (T,) uint8, values in {1, 2}
    instances: list[ActionInstance]
    class_count: int  # includes the blank class
    joint_count: int
    name: str = ""

    def __len__(self) -> int:
        return self.coords.shape[0]

    def bodies_at(self, t: int) -> np.ndarray:
        return self.coords[t, : self.body_count[t]]


def _validate_instances(instances: list[ActionInstance], length: int, class_count: int) -> None:
    prev_end = -1
    prev_start = -1
    for inst in instances:
        if inst.label < 1:
            raise StreamError(f"instance at frame {inst.start} uses reserved blank label 0")
        if inst.label >= class_count:
            raise StreamError(
                f"label {inst.label} out of range for class_count {class_count}"
            )
        if inst.start > inst.end:
            raise StreamError(f"instance ({inst.start},{inst.end}) has start after end")
        if inst.start < 0 or inst.end >= length:
            raise StreamError(
                f"instance ({inst.start},{inst.end}) outside stream of length {length}"
            )
        if inst.start < prev_start:
            raise StreamError(f"instances not sorted by start at frame {inst.start}")
        if inst.start <= prev_end:
            raise StreamError(f"instances overlap at frame {inst.start}")
        prev_end = inst.end
        prev_start = inst.start


def parse_stream(frames_text: str, annotation_text: str, joint_count: int, name: str = "") -> AnnotatedStream:
    """Parse a frame file and its annotation document into a validated stream."""
    try:
        ann = json.loads(annotation_text)
    except json.JSONDecodeError as exc:
        raise StreamError(f"annotation file is not valid JSON: {exc}") from exc
    class_count = int(ann["class_count"])
    if class_count < 2:
        raise StreamError("class_count must be at least 2 (blank plus one action class)")
    instances = [
        ActionInstance(int(i["start"]), int(i["end"]), int(i["label"]))
        for i in ann.get("instances", [])
    ]

    dim = 3 * joint_count
    rows = []
    counts = []
    for lineno, line in enumerate(frames_text.splitlines()):
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        t = int(rec["t"])
        if t != len(rows):
            raise StreamError(f"frame index {t} out of order at line {lineno + 1}")
        bodies = rec.get("bodies", [])
        if len(bodies) > MAX_BODIES:
            raise StreamError(f"frame {t}: more than {MAX_BODIES} bodies")
        slot = np.zeros((MAX_BODIES, dim), dtype=np.float32)
        for b, body in enumerate(bodies):
            if len(body) != dim:
                raise StreamError(
                    f"frame {t} body {b}: expected {dim} coordinates, got {len(body)}"
                )
            slot[b] = np.asarray(body, dtype=np.float32)
        if not np.isfinite(slot).all():
            raise StreamError(f"frame {t}: non-finite coordinate")
        rows.append(slot)
        counts.append(max(1, len(bodies)))  # empty frame becomes one zero body

    if not rows:
        raise StreamError("frame file contains no frames")
    coords = np.stack(rows)
    body_count = np.asarray(counts, dtype=np.uint8)
    _validate_instances(instances, len(rows), class_count)
    return AnnotatedStream(coords, body_count, instances, class_count, joint_count, name)


def load_stream(frames_path, annotation_path, joint_count: int, name: str = "") -> AnnotatedStream:
    with open(frames_path, "r", encoding="utf-8") as fh:
        frames_text = fh.read()
    with open(annotation_path, "r", encoding="utf-8") as fh:
        annotation_text = fh.read()
    return parse_stream(frames_text, annotation_text, joint_count, name=name)


def frame_label_arrays(stream: AnnotatedStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-frame (class, start_distance, segment_length) arrays.

    Blank gaps are treated as segments of their own: inside a gap the class is
    0 and the distance counts from the first frame of the gap, so the
    regression target is defined at every frame.
    """
    length = len(stream)
    cls = np.zeros(length, dtype=np.int64)
    dist = np.zeros(length, dtype=np.int64)
    seg_len = np.zeros(length, dtype=np.int64)

    for inst in stream.instances:
        idx = np.arange(inst.start, inst.end + 1)
        cls[idx] = inst.label
        dist[idx] = idx - inst.start
        seg_len[idx] = inst.length

    # Gaps are the complement of the instance ranges, taken in order.
    cursor = 0
    for inst in stream.instances + [ActionInstance(length, length, 1)]:
        gap_start, gap_end = cursor, min(inst.start, length)  # [gap_start, gap_end)
        if gap_end > gap_start:
            idx = np.arange(gap_start, gap_end)
            dist[idx] = idx - gap_start
            seg_len[idx] = gap_end - gap_start
        cursor = inst.end + 1
    return cls, dist, seg_len


def derive_frame_labels(stream: AnnotatedStream) -> list[FrameLabel]:
    """One FrameLabel per frame (see frame_label_arrays for the blank rule)."""
    cls, dist, seg_len = frame_label_arrays(stream)
    return [FrameLabel(int(c), int(s), int(d)) for c, s, d in zip(cls, dist, seg_len)]


def write_stream(stream: AnnotatedStream, frames_path, annotation_path) -> None:
    with open(frames_path, "w", encoding="utf-8") as fh:
        for t in range(len(stream)):
            bodies = [
                [float(v) for v in stream.coords[t, b]]
                for b in range(stream.body_count[t])
            ]
            fh.write(json.dumps({"t": t, "bodies": bodies}) + "\n")
    doc = {
        "class_count": stream.class_count,
        "instances": [
            {"start": i.start, "end": i.end, "label": i.label} for i in stream.instances
        ],
    }
    with open(annotation_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
