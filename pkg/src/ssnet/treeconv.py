"""Hierarchy of dilated tree convolutions over the skeleton.

Each layer slides a triangular filter over every joint: the node itself plus
its boundary descendants at tree depth d (the layer's dilation). Missing
descendants read as zero. A single child always occupies the left slot, so a
right tap exists only where an explicit second child does at every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ParamStore, sigmoid
from .topology import SkeletonTopology

PAD = -1
TREE_DILATIONS = (1, 2, 4)
SCHEMES = ("corners", "full-bottom")


@dataclass(frozen=True)
class TreeHierarchy:
    joint_count: int
    dilations: tuple[int, ...]
    scheme: str
    taps: tuple[np.ndarray, ...]  # per layer (J, n_taps) int32, column 0 = self
    depths: np.ndarray  # (J,) depth of each joint below the root

    @property
    def layer_count(self) -> int:
        return len(self.dilations)

    @property
    def out_channels(self) -> int:
        return 3 * self.joint_count

    def perception_heights(self) -> tuple[int, ...]:
        """Sub-tree height covered by each layer, walked from the tap tables."""
        J = self.joint_count
        reach = [{v} for v in range(J)]  # deepest input joints feeding node v
        heights = []
        for taps in self.taps:
            new_reach = []
            for v in range(J):
                acc: set[int] = set()
                for s in taps[v]:
                    if s != PAD:
                        acc |= reach[s]
                new_reach.append(acc)
            reach = new_reach
            span = max(
                max(self.depths[u] for u in reach[v]) - self.depths[v] for v in range(J)
            )
            heights.append(int(span) + 1)
        return tuple(heights)


def _step_chain(step: np.ndarray, start: int, count: int) -> int:
    node = start
    for _ in range(count):
        node = step[node]
        if node == PAD:
            return PAD
    return node


def build_tap_tables(
    topology: SkeletonTopology,
    dilations: tuple[int, ...] = TREE_DILATIONS,
    scheme: str = "corners",
) -> TreeHierarchy:
    """Tap tables for every layer of the hierarchy.

    corners: 3 taps per node (self, left chain of length d, right chain).
    full-bottom: self plus every depth-d binary-tree position (2^d taps),
    missing positions PAD.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown tap scheme {scheme!r}")
    J = topology.joint_count
    left = np.full(J, PAD, dtype=np.int32)
    right = np.full(J, PAD, dtype=np.int32)
    for j, kids in enumerate(topology.children):
        if len(kids) >= 1:
            left[j] = kids[0]
        if len(kids) == 2:
            right[j] = kids[1]

    depths = np.zeros(J, dtype=np.int32)
    stack = [(topology.root, 0)]
    while stack:
        j, d = stack.pop()
        depths[j] = d
        for c in topology.children[j]:
            stack.append((c, d + 1))

    tables = []
    for d in dilations:
        if scheme == "corners":
            taps = np.full((J, 3), PAD, dtype=np.int32)
            for v in range(J):
                taps[v, 0] = v
                taps[v, 1] = _step_chain(left, v, d)
                taps[v, 2] = _step_chain(right, v, d)
        else:
            taps = np.full((J, 1 + 2**d), PAD, dtype=np.int32)
            for v in range(J):
                taps[v, 0] = v
                for code in range(2**d):
                    node = v
                    for bit in range(d - 1, -1, -1):
                        node = right[node] if (code >> bit) & 1 else left[node]
                        if node == PAD:
                            break
                    taps[v, 1 + code] = node
        tables.append(taps)
    return TreeHierarchy(J, tuple(dilations), scheme, tuple(tables), depths)


def tap_weight_names(hierarchy: TreeHierarchy, layer: int) -> list[str]:
    """Checkpoint tensor names for one layer's tap matrices, tap order."""
    prefix = f"tree.layer{layer + 1}"
    if hierarchy.scheme == "corners":
        return [f"{prefix}.w_top", f"{prefix}.w_left", f"{prefix}.w_right"]
    n_bottom = hierarchy.taps[layer].shape[1] - 1
    return [f"{prefix}.w_top"] + [f"{prefix}.w_bottom{k}" for k in range(n_bottom)]


def param_spec(hierarchy: TreeHierarchy) -> list[tuple[str, tuple[int, ...]]]:
    out = hierarchy.out_channels
    spec = []
    c_in = 3
    for layer in range(hierarchy.layer_count):
        for name in tap_weight_names(hierarchy, layer):
            spec.append((name, (2 * out, c_in)))
        spec.append((f"tree.layer{layer + 1}.bias", (2 * out,)))
        c_in = out
    return spec


def forward(
    params: ParamStore, hierarchy: TreeHierarchy, bodies: np.ndarray
) -> tuple[np.ndarray, list]:
    """Per-body representations for a (3, J, M) batch of bodies.

    Returns (reprs, cache): reprs is (3J, M), the mean activation over every
    node of every layer. GLU halves the 2*(3J) pre-activation channels.
    """
    J = hierarchy.joint_count
    out = hierarchy.out_channels
    m = bodies.shape[2]
    act = np.ascontiguousarray(bodies, dtype=params.dtype)
    cache = []
    layer_means = np.zeros((out, m), dtype=params.dtype)
    for layer in range(hierarchy.layer_count):
        taps = hierarchy.taps[layer]
        names = tap_weight_names(hierarchy, layer)
        bias = params[f"tree.layer{layer + 1}.bias"]
        c_in = act.shape[0]
        pre = np.empty((2 * out, J, m), dtype=params.dtype)
        pre[...] = bias[:, None, None]
        # Tap 0 is always the node itself.
        pre += (params[names[0]] @ act.reshape(c_in, J * m)).reshape(2 * out, J, m)
        for k in range(1, taps.shape[1]):
            dst = np.nonzero(taps[:, k] != PAD)[0]
            if dst.size == 0:
                continue
            src = taps[dst, k]
            sub = act[:, src, :].reshape(c_in, dst.size * m)
            contrib = (params[names[k]] @ sub).reshape(2 * out, dst.size, m)
            pre[:, dst, :] += contrib
        val = pre[:out]
        sig = sigmoid(pre[out:])
        new_act = val * sig
        cache.append((act, val, sig))
        act = new_act
        layer_means += act.mean(axis=1)
    reprs = layer_means / hierarchy.layer_count
    return reprs, cache


def backward(
    params: ParamStore, hierarchy: TreeHierarchy, cache: list, grad_reprs: np.ndarray
) -> None:
    """Accumulate parameter gradients for upstream (3J, M) grad_reprs.

    Input-coordinate gradients are computed internally for the chain but
    discarded (frames are data, not parameters).
    """
    J = hierarchy.joint_count
    out = hierarchy.out_channels
    m = grad_reprs.shape[1]
    node_share = (grad_reprs / (hierarchy.layer_count * J)).astype(params.dtype)

    grad_above: np.ndarray | None = None
    for layer in range(hierarchy.layer_count - 1, -1, -1):
        act_in, val, sig = cache[layer]
        c_in = act_in.shape[0]
        taps = hierarchy.taps[layer]
        names = tap_weight_names(hierarchy, layer)

        grad_act = node_share[:, None, :] if grad_above is None else (
            grad_above + node_share[:, None, :]
        )
        grad_pre = np.empty((2 * out, J, m), dtype=params.dtype)
        grad_pre[:out] = grad_act * sig
        grad_pre[out:] = grad_act * val * sig * (1.0 - sig)
        cache[layer] = None  # free val/sig as soon as consumed

        params.grads[f"tree.layer{layer + 1}.bias"] += grad_pre.sum(axis=(1, 2))
        flat_pre = grad_pre.reshape(2 * out, J * m)
        params.grads[names[0]] += flat_pre @ act_in.reshape(c_in, J * m).T
        grad_in = (params[names[0]].T @ flat_pre).reshape(c_in, J, m)
        for k in range(1, taps.shape[1]):
            dst = np.nonzero(taps[:, k] != PAD)[0]
            if dst.size == 0:
                continue
            src = taps[dst, k]
            sub = act_in[:, src, :].reshape(c_in, dst.size * m)
            g_dst = np.ascontiguousarray(grad_pre[:, dst, :]).reshape(2 * out, dst.size * m)
            params.grads[names[k]] += g_dst @ sub.T
            # Tap sources are distinct nodes, so fancy-index += is safe.
            grad_in[:, src, :] += (params[names[k]].T @ g_dst).reshape(c_in, dst.size, m)
        grad_above = grad_in


def spatial_forward(
    bodies: list[np.ndarray] | np.ndarray,
    params: ParamStore,
    hierarchy: TreeHierarchy,
) -> tuple[np.ndarray, tuple]:
    """Frame representation: per-body tree conv, averaged over 1-2 bodies.

    bodies: sequence of flat (3J,) poses (or an (n, 3J) array).
    """
    J = hierarchy.joint_count
    arr = np.asarray(bodies, dtype=params.dtype)
    if arr.ndim == 1:
        arr = arr[None, :]
    n = arr.shape[0]
    stacked = arr.reshape(n, J, 3).transpose(2, 1, 0)  # (3, J, n)
    reprs, cache = forward(params, hierarchy, stacked)
    return reprs.mean(axis=1), (cache, n)


def spatial_backward(grad_repr: np.ndarray, cache: tuple, params: ParamStore, hierarchy: TreeHierarchy) -> None:
    layer_cache, n = cache
    grad_bodies = np.repeat(grad_repr[:, None] / n, n, axis=1)
    backward(params, hierarchy, layer_cache, grad_bodies)
