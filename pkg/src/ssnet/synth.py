"""Synthetic annotated streams for desk-scale experiments.

Each action class is a fixed sinusoidal motion template over a random subset
of joints; blank gaps hold a near-rest noisy pose. Generation is a pure
function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import MAX_BODIES, ActionInstance, AnnotatedStream
from .topology import SkeletonTopology, default_topology

TOP_SCALE = 255  # largest perception window; durations must fit under it
MIN_DURATION = 8


@dataclass
class SynthConfig:
    class_count: int  # action classes, blank excluded
    stream_count: int
    stream_len: int
    duration_range: tuple[int, int]
    gap_range: tuple[int, int]
    noise_sigma: float
    topology: SkeletonTopology = field(default_factory=default_topology)

    def validate(self) -> None:
        if self.class_count < 2:
            raise ValueError("need >= 2 action classes")
        lo, hi = self.duration_range
        if hi > TOP_SCALE:
            raise ValueError(
                f"duration range ({lo},{hi}) exceeds the {TOP_SCALE}-frame perception bound"
            )
        if lo < MIN_DURATION:
            raise ValueError(f"duration range ({lo},{hi}) below minimum {MIN_DURATION}")
        if lo > hi:
            raise ValueError("duration range is empty")
        if self.gap_range[0] < 1 or self.gap_range[0] > self.gap_range[1]:
            raise ValueError("gap range must be a non-empty positive interval")
        if self.stream_len < lo + 2 * self.gap_range[0]:
            raise ValueError("stream_len too short for one instance")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


def rest_pose(topology: SkeletonTopology) -> np.ndarray:
    """Deterministic (J, 3) rest layout derived from the tree shape."""
    J = topology.joint_count
    pose = np.zeros((J, 3), dtype=np.float64)
    leaf_cursor = [0]

    def place(j: int, depth: int) -> float:
        kids = topology.children[j]
        if kids:
            xs = [place(c, depth + 1) for c in kids]
            x = sum(xs) / len(xs)
        else:
            x = leaf_cursor[0] * 0.18
            leaf_cursor[0] += 1
        pose[j] = (x, 1.6 - 0.16 * depth, 0.05 * ((j * 7) % 5 - 2))
        return x

    place(topology.root, 0)
    pose[:, 0] -= pose[:, 0].mean()
    return pose


class _ClassTemplate:
    """Sinusoidal motion of a fixed joint subset; exact given (class, offset)."""

    def __init__(self, rng: np.random.Generator, joint_count: int, class_id: int):
        size = max(2, joint_count // 3)
        self.joints = rng.choice(joint_count, size=size, replace=False)
        self.freq = 0.06 + 0.05 * class_id + rng.uniform(0.0, 0.02)
        # Phase away from 0 so the very first frame already leaves the rest pose.
        self.phase = rng.uniform(0.6, 2.4)
        self.amplitude = rng.uniform(0.18, 0.35, size=(size, 3))
        self.direction = rng.choice([-1.0, 1.0], size=(size, 3))

    def offsets(self, tau: np.ndarray) -> np.ndarray:
        """(len(tau), J?, ...) -> (len(tau), n_joints, 3) displacement."""
        wave = np.sin(2.0 * np.pi * self.freq * tau[:, None, None] + self.phase)
        return wave * (self.amplitude * self.direction)[None, :, :]


def synth_generate(cfg: SynthConfig, seed: int) -> list[AnnotatedStream]:
    """Generate cfg.stream_count annotated streams, deterministically from seed."""
    cfg.validate()
    topo = cfg.topology
    J = topo.joint_count
    dim = 3 * J
    master = np.random.default_rng(seed)

    templates = [_ClassTemplate(master, J, k) for k in range(cfg.class_count)]
    rest = rest_pose(topo)

    # Global shuffled deck keeps labels balanced across the whole dataset.
    deck: list[int] = []

    def next_label() -> int:
        if not deck:
            fresh = list(range(1, cfg.class_count + 1))
            master.shuffle(fresh)
            deck.extend(fresh)
        return deck.pop()

    dlo, dhi = cfg.duration_range
    glo, ghi = cfg.gap_range
    streams = []
    for s in range(cfg.stream_count):
        frames = np.tile(rest.reshape(-1), (cfg.stream_len, 1))
        instances: list[ActionInstance] = []
        pos = int(master.integers(glo, ghi + 1))
        while True:
            dur = int(master.integers(dlo, dhi + 1))
            gap_after = int(master.integers(glo, ghi + 1))
            if pos + dur + gap_after > cfg.stream_len:
                break
            label = next_label()
            tmpl = templates[label - 1]
            tau = np.arange(dur, dtype=np.float64)
            offs = tmpl.offsets(tau)  # (dur, n, 3)
            block = frames[pos : pos + dur].reshape(dur, J, 3)
            block[:, tmpl.joints, :] += offs
            instances.append(ActionInstance(pos, pos + dur - 1, label))
            pos += dur + gap_after

        if cfg.noise_sigma > 0:
            frames += master.normal(0.0, cfg.noise_sigma, size=frames.shape)

        coords = np.zeros((cfg.stream_len, MAX_BODIES, dim), dtype=np.float32)
        coords[:, 0, :] = frames.astype(np.float32)
        body_count = np.ones(cfg.stream_len, dtype=np.uint8)
        streams.append(
            AnnotatedStream(
                coords=coords,
                body_count=body_count,
                instances=instances,
                class_count=cfg.class_count + 1,
                joint_count=J,
                name=f"stream_{s:03d}",
            )
        )
    return streams
