"""Full model: tree-conv frame encoder feeding the temporal stack and heads."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import temporal, treeconv
from .nn import ParamStore, init_params, softmax
from .temporal import TemporalSpec
from .topology import SkeletonTopology, parse_topology
from .treeconv import TreeHierarchy, build_tap_tables


@dataclass(frozen=True)
class ModelConfig:
    topology: SkeletonTopology
    class_count: int  # includes blank
    channels: int = temporal.DEFAULT_CHANNELS
    temporal_dilations: tuple[int, ...] = temporal.DEFAULT_DILATIONS
    tree_dilations: tuple[int, ...] = treeconv.TREE_DILATIONS
    tree_scheme: str = "corners"
    normalize_distance: bool = True

    @property
    def frame_dim(self) -> int:
        return 3 * self.topology.joint_count

    @property
    def spec(self) -> TemporalSpec:
        return TemporalSpec(self.temporal_dilations, self.channels)

    @property
    def window(self) -> int:
        return self.spec.window

    @property
    def max_distance(self) -> int:
        return self.spec.window - 1

    def to_dict(self) -> dict:
        return {
            "class_count": self.class_count,
            "channels": self.channels,
            "temporal_dilations": list(self.temporal_dilations),
            "tree_dilations": list(self.tree_dilations),
            "tree_scheme": self.tree_scheme,
            "normalize_distance": self.normalize_distance,
            "joint_count": self.topology.joint_count,
            "topology": json.loads(self.topology.to_json()),
        }

    @classmethod
    def from_dict(cls, doc: dict, topology: SkeletonTopology | None = None) -> "ModelConfig":
        if topology is None:
            topology = parse_topology(json.dumps(doc["topology"]))
        if doc["joint_count"] != topology.joint_count:
            raise ValueError(
                f"config joint_count {doc['joint_count']} != topology {topology.joint_count}"
            )
        return cls(
            topology=topology,
            class_count=int(doc["class_count"]),
            channels=int(doc["channels"]),
            temporal_dilations=tuple(doc["temporal_dilations"]),
            tree_dilations=tuple(doc["tree_dilations"]),
            tree_scheme=doc["tree_scheme"],
            normalize_distance=bool(doc["normalize_distance"]),
        )


@dataclass
class Model:
    config: ModelConfig
    params: ParamStore
    hierarchy: TreeHierarchy = field(init=False)

    def __post_init__(self):
        self.hierarchy = build_tap_tables(
            self.config.topology, self.config.tree_dilations, self.config.tree_scheme
        )

    @classmethod
    def create(cls, config: ModelConfig, seed: int, dtype=np.float32) -> "Model":
        hierarchy = build_tap_tables(config.topology, config.tree_dilations, config.tree_scheme)
        spec = treeconv.param_spec(hierarchy) + temporal.param_spec(
            config.spec, 3 * config.topology.joint_count, config.class_count
        )
        return cls(config, init_params(spec, seed, dtype=dtype))

    @property
    def dtype(self):
        return self.params.dtype

    def with_params(self, params: ParamStore) -> "Model":
        return Model(self.config, params)

    def astype(self, dtype) -> "Model":
        return Model(self.config, self.params.astype(dtype))

    # distance scaling -----------------------------------------------------

    def distance_target(self, s_frames: np.ndarray) -> np.ndarray:
        s = np.minimum(np.asarray(s_frames, dtype=self.dtype), self.config.max_distance)
        if self.config.normalize_distance:
            return s / self.config.max_distance
        return s

    def distance_from_output(self, s_out: np.ndarray | float):
        if self.config.normalize_distance:
            return np.clip(s_out, 0.0, 1.0) * self.config.max_distance
        return np.clip(s_out, 0.0, self.config.max_distance)

    # frame representations ------------------------------------------------

    def frame_reprs(self, coords: np.ndarray, body_count: np.ndarray):
        """Representations for (N, MAX_BODIES, 3J) frames -> (N, 3J).

        Multi-body frames average their per-body representations.
        """
        n = coords.shape[0]
        j = self.config.topology.joint_count
        counts = np.asarray(body_count, dtype=np.int64)
        body_mask = np.arange(coords.shape[1])[None, :] < counts[:, None]
        frame_of_body = np.nonzero(body_mask)[0]
        body_rows = coords[body_mask].astype(self.dtype)
        bodies = body_rows.reshape(-1, j, 3).transpose(2, 1, 0)  # (3, J, M)
        reprs_b, cache = treeconv.forward(self.params, self.hierarchy, bodies)
        reprs = np.zeros((n, self.config.frame_dim), dtype=self.dtype)
        np.add.at(reprs, frame_of_body, reprs_b.T)
        reprs /= counts[:, None].astype(self.dtype)
        return reprs, (cache, frame_of_body, counts)

    def frame_reprs_backward(self, grad_reprs: np.ndarray, cache) -> None:
        layer_cache, frame_of_body, counts = cache
        per_body = (grad_reprs / counts[:, None].astype(self.dtype))[frame_of_body]
        treeconv.backward(self.params, self.hierarchy, layer_cache, per_body.T)

    # clip batches ----------------------------------------------------------

    def forward_clips(
        self,
        coords: np.ndarray,
        body_count: np.ndarray,
        l_sel: np.ndarray,
        valid_from: np.ndarray,
    ):
        """Forward a batch of clips.

        coords: (B, T, MAX_BODIES, 3J) with T = the top-layer window; padded
        columns (before valid_from[b]) must be zero-filled.
        Returns (logits (K,B), s_out (B,), cache).
        """
        b, t = coords.shape[:2]
        # Padded columns are zero at every level, so the tree conv only needs
        # to run on the real frames.
        frame_valid = (np.arange(t)[None, :] >= valid_from[:, None]).reshape(b * t)
        valid_idx = np.nonzero(frame_valid)[0]
        flat_coords = coords.reshape(b * t, *coords.shape[2:])
        flat_counts = body_count.reshape(b * t)
        reprs_valid, tree_cache = self.frame_reprs(
            flat_coords[valid_idx], flat_counts[valid_idx]
        )
        reprs = np.zeros((b * t, self.config.frame_dim), dtype=self.dtype)
        reprs[valid_idx] = reprs_valid
        x0 = (self.params["temporal.embed"] @ reprs.T).reshape(-1, b, t)
        acts, stack_cache = temporal.stack_forward(self.params, self.config.spec, x0, valid_from)
        feats = np.stack([a[:, :, -1] for a in acts[1:]])
        logits, s_out, head_cache = temporal.heads_forward(self.params, feats, l_sel)
        cache = {
            "tree": tree_cache,
            "reprs": reprs,
            "valid_idx": valid_idx,
            "acts": acts,
            "stack": stack_cache,
            "heads": head_cache,
            "shape": (b, t),
        }
        return logits, s_out, cache

    def backward_clips(self, cache, grad_logits: np.ndarray, grad_s: np.ndarray) -> None:
        b, t = cache["shape"]
        grad_feats = temporal.heads_backward(self.params, cache["heads"], grad_logits, grad_s)
        grad_x0 = temporal.stack_backward(
            self.params, self.config.spec, cache["acts"], cache["stack"], grad_feats
        )
        flat = grad_x0.reshape(-1, b * t)
        reprs = cache["reprs"]
        self.params.grads["temporal.embed"] += flat @ reprs
        grad_reprs = (self.params["temporal.embed"].T @ flat).T
        self.frame_reprs_backward(grad_reprs[cache["valid_idx"]], cache["tree"])

    def loss_clips(
        self,
        coords: np.ndarray,
        body_count: np.ndarray,
        l_sel: np.ndarray,
        valid_from: np.ndarray,
        targets: np.ndarray,
        s_frames: np.ndarray,
        gamma: float,
        accumulate_grads: bool = True,
    ):
        """Joint loss over a clip batch: mean NLL + gamma * mean squared distance error.

        Returns (loss, loss_c, loss_s, pred_classes).
        """
        b = coords.shape[0]
        logits, s_out, cache = self.forward_clips(coords, body_count, l_sel, valid_from)
        probs = softmax(logits)
        idx = np.arange(b)
        nll = -np.log(np.maximum(probs[targets, idx], np.finfo(self.dtype).tiny))
        s_target = self.distance_target(s_frames)
        err = s_out - s_target
        loss_c = float(nll.mean())
        loss_s = float((err**2).mean())
        loss = loss_c + gamma * loss_s
        preds = logits.argmax(axis=0)
        if accumulate_grads:
            grad_logits = probs
            grad_logits[targets, idx] -= 1.0
            grad_logits /= b
            grad_s = (2.0 * gamma / b) * err
            self.backward_clips(cache, grad_logits.astype(self.dtype), grad_s.astype(self.dtype))
        return loss, loss_c, loss_s, preds


def fixed_layer_for_scale(scale: int, spec: TemporalSpec) -> int:
    """Lowest layer whose perception scale reaches the requested fixed scale."""
    for l, s in enumerate(temporal.scale_table(spec), start=1):
        if s >= scale:
            return l
    return spec.layer_count


def micro_config(topology: SkeletonTopology, class_count: int = 3) -> ModelConfig:
    """Small configuration used by gradient-fidelity tests."""
    return ModelConfig(
        topology=topology,
        class_count=class_count,
        channels=4,
        temporal_dilations=(1, 2, 1, 2),
    )
