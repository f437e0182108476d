"""Dilated causal temporal stack with per-step layer selection and two heads.

Layer l computes C(t,l) = GLU(W1*C(t-d_l, l-1) + W2*C(t, l-1) + b) + C(t, l-1),
with out-of-range past columns reading as zero. The class head averages the
final column of layers 1..l_sel; the regression head averages all layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ParamStore, relu, sigmoid

DEFAULT_DILATIONS = (1, 2, 4, 8, 16, 32, 64, 1, 2, 4, 8, 16, 32, 64)
DEFAULT_CHANNELS = 50


@dataclass(frozen=True)
class TemporalSpec:
    dilations: tuple[int, ...] = DEFAULT_DILATIONS
    channels: int = DEFAULT_CHANNELS

    @property
    def layer_count(self) -> int:
        return len(self.dilations)

    @property
    def window(self) -> int:
        """Perception scale of the top layer; also the training clip length."""
        return 1 + sum(self.dilations)


def scale_table(spec: TemporalSpec) -> list[int]:
    """Perception window scale of every layer: scale(l) = 1 + sum(d_1..d_l)."""
    scales = []
    acc = 1
    for d in spec.dilations:
        acc += d
        scales.append(acc)
    return scales


def proper_layer(s_prev: float, spec: TemporalSpec) -> int:
    """Lowest layer whose scale covers round(s_prev) + 1 frames (1-based)."""
    target = max(1, int(np.floor(s_prev + 0.5)) + 1)
    for l, scale in enumerate(scale_table(spec), start=1):
        if scale >= target:
            return l
    return spec.layer_count


def param_spec(spec: TemporalSpec, input_dim: int, class_count: int) -> list[tuple[str, tuple[int, ...]]]:
    c = spec.channels
    names: list[tuple[str, tuple[int, ...]]] = [("temporal.embed", (c, input_dim))]
    for l in range(1, spec.layer_count + 1):
        names.append((f"temporal.layer{l}.w1", (2 * c, c)))
        names.append((f"temporal.layer{l}.w2", (2 * c, c)))
        names.append((f"temporal.layer{l}.bias", (2 * c,)))
    names += [
        ("head.fc1.w", (c, c)),
        ("head.fc1.b", (c,)),
        ("head.fc2.w", (class_count, c)),
        ("head.fc2.b", (class_count,)),
        ("head.fc3.w", (c, c)),
        ("head.fc3.b", (c,)),
        ("head.fc4.w", (c, c)),
        ("head.fc4.b", (c,)),
        ("head.fc5.w", (1, c)),
        ("head.fc5.b", (1,)),
    ]
    return names


def stack_forward(
    params: ParamStore,
    spec: TemporalSpec,
    x0: np.ndarray,
    valid_from: np.ndarray | None = None,
) -> tuple[list[np.ndarray], dict]:
    """Run the conv stack over (C, B, T) embedded inputs.

    valid_from[b] marks the first real column of clip b; everything to its
    left stays zero at every layer, which reproduces both stream start and
    training-clip left padding.
    """
    c, b, t = x0.shape
    mask = None
    if valid_from is not None and np.any(valid_from > 0):
        mask = (np.arange(t)[None, :] >= valid_from[:, None]).astype(params.dtype)
        x0 = x0 * mask[None, :, :]
    acts = [x0]
    cache: dict = {"mask": mask, "layers": []}
    for l, d in enumerate(spec.dilations, start=1):
        prev = acts[-1]
        shifted = np.zeros_like(prev)
        shifted[:, :, d:] = prev[:, :, :-d]
        flat_prev = prev.reshape(c, b * t)
        flat_shift = shifted.reshape(c, b * t)
        pre = (
            params[f"temporal.layer{l}.w1"] @ flat_shift
            + params[f"temporal.layer{l}.w2"] @ flat_prev
            + params[f"temporal.layer{l}.bias"][:, None]
        ).reshape(2 * c, b, t)
        val = pre[:c]
        sig = sigmoid(pre[c:])
        out = val * sig + prev
        if mask is not None:
            out *= mask[None, :, :]
        cache["layers"].append((val, sig))
        acts.append(out)
    return acts, cache


def stack_backward(
    params: ParamStore,
    spec: TemporalSpec,
    acts: list[np.ndarray],
    cache: dict,
    grad_final: np.ndarray,
) -> np.ndarray:
    """Backprop the stack; grad_final is (L, C, B) onto each layer's last column.

    Returns the gradient w.r.t. the embedded input x0. Parameter gradients
    accumulate into params.grads.
    """
    c, b, t = acts[0].shape
    mask = cache["mask"]
    grad = np.zeros((c, b, t), dtype=params.dtype)
    for l in range(spec.layer_count, 0, -1):
        d = spec.dilations[l - 1]
        val, sig = cache["layers"][l - 1]
        cache["layers"][l - 1] = None
        grad[:, :, t - 1] += grad_final[l - 1]
        if mask is not None:
            grad *= mask[None, :, :]
        grad_pre = np.empty((2 * c, b, t), dtype=params.dtype)
        grad_pre[:c] = grad * sig
        grad_pre[c:] = grad * val * sig * (1.0 - sig)

        prev = acts[l - 1]
        shifted = np.zeros_like(prev)
        shifted[:, :, d:] = prev[:, :, :-d]
        flat_gpre = grad_pre.reshape(2 * c, b * t)
        params.grads[f"temporal.layer{l}.bias"] += flat_gpre.sum(axis=1)
        params.grads[f"temporal.layer{l}.w1"] += flat_gpre @ shifted.reshape(c, b * t).T
        params.grads[f"temporal.layer{l}.w2"] += flat_gpre @ prev.reshape(c, b * t).T

        g_shift = (params[f"temporal.layer{l}.w1"].T @ flat_gpre).reshape(c, b, t)
        g_prev = (params[f"temporal.layer{l}.w2"].T @ flat_gpre).reshape(c, b, t)
        g_prev[:, :, :-d] += g_shift[:, :, d:]
        grad = g_prev + grad  # residual path
    if mask is not None:
        grad *= mask[None, :, :]
    return grad


def heads_forward(
    params: ParamStore, feats: np.ndarray, l_sel: np.ndarray
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Class and regression heads over (L, C, B) final-column features."""
    layer_count = feats.shape[0]
    sel_mask = (np.arange(1, layer_count + 1)[:, None] <= l_sel[None, :]).astype(feats.dtype)
    g_cls = (feats * sel_mask[:, None, :]).sum(axis=0) / l_sel[None, :].astype(feats.dtype)
    g_reg = feats.mean(axis=0)

    h1_pre = params["head.fc1.w"] @ g_cls + params["head.fc1.b"][:, None]
    h1 = relu(h1_pre)
    logits = params["head.fc2.w"] @ h1 + params["head.fc2.b"][:, None]

    h3_pre = params["head.fc3.w"] @ g_reg + params["head.fc3.b"][:, None]
    h3 = relu(h3_pre)
    h4_pre = params["head.fc4.w"] @ h3 + params["head.fc4.b"][:, None]
    h4 = relu(h4_pre)
    s_out = (params["head.fc5.w"] @ h4 + params["head.fc5.b"][:, None])[0]

    cache = {
        "sel_mask": sel_mask,
        "l_sel": l_sel,
        "g_cls": g_cls,
        "g_reg": g_reg,
        "h1_pre": h1_pre,
        "h1": h1,
        "h3_pre": h3_pre,
        "h3": h3,
        "h4_pre": h4_pre,
        "h4": h4,
    }
    return logits, s_out, cache


def heads_backward(
    params: ParamStore,
    cache: dict,
    grad_logits: np.ndarray,
    grad_s: np.ndarray,
) -> np.ndarray:
    """Returns (L, C, B) gradient onto the per-layer final-column features."""
    layer_count = cache["sel_mask"].shape[0]
    dtype = cache["g_cls"].dtype

    params.grads["head.fc2.w"] += grad_logits @ cache["h1"].T
    params.grads["head.fc2.b"] += grad_logits.sum(axis=1)
    dh1 = (params["head.fc2.w"].T @ grad_logits) * (cache["h1_pre"] > 0)
    params.grads["head.fc1.w"] += dh1 @ cache["g_cls"].T
    params.grads["head.fc1.b"] += dh1.sum(axis=1)
    dg_cls = params["head.fc1.w"].T @ dh1

    ds = grad_s[None, :]
    params.grads["head.fc5.w"] += ds @ cache["h4"].T
    params.grads["head.fc5.b"] += ds.sum(axis=1)
    dh4 = (params["head.fc5.w"].T @ ds) * (cache["h4_pre"] > 0)
    params.grads["head.fc4.w"] += dh4 @ cache["h3"].T
    params.grads["head.fc4.b"] += dh4.sum(axis=1)
    dh3 = (params["head.fc4.w"].T @ dh4) * (cache["h3_pre"] > 0)
    params.grads["head.fc3.w"] += dh3 @ cache["g_reg"].T
    params.grads["head.fc3.b"] += dh3.sum(axis=1)
    dg_reg = params["head.fc3.w"].T @ dh3

    per_sel = (dg_cls / cache["l_sel"][None, :].astype(dtype))[None, :, :]
    grad_feats = cache["sel_mask"][:, None, :] * per_sel
    grad_feats += (dg_reg / layer_count)[None, :, :]
    return grad_feats


def window_forward(
    reprs: np.ndarray,
    l_sel: int,
    params: ParamStore,
    spec: TemporalSpec,
    valid_from: int = 0,
) -> tuple[np.ndarray, float, dict]:
    """Single-window forward: (T, F) frame representations -> (logits, s_out).

    The window length must equal the top-layer scale; shorter streams are
    handled by left-zero-padding plus valid_from.
    """
    t, _ = reprs.shape
    if t != spec.window:
        raise ValueError(f"window length {t} != top-layer scale {spec.window}")
    if not 1 <= l_sel <= spec.layer_count:
        raise ValueError(f"l_sel {l_sel} out of range 1..{spec.layer_count}")
    x = np.ascontiguousarray(reprs, dtype=params.dtype)
    x0 = (params["temporal.embed"] @ x.T)[:, None, :]  # (C, 1, T)
    acts, stack_cache = stack_forward(
        params, spec, x0, np.asarray([valid_from], dtype=np.int64)
    )
    feats = np.stack([a[:, :, -1] for a in acts[1:]])  # (L, C, 1)
    logits, s_out, head_cache = heads_forward(
        params, feats, np.asarray([l_sel], dtype=np.int64)
    )
    cache = {"acts": acts, "stack": stack_cache, "heads": head_cache, "reprs": x}
    return logits[:, 0], float(s_out[0]), cache


def window_backward(
    cache: dict,
    grad_logits: np.ndarray,
    grad_s: float,
    params: ParamStore,
    spec: TemporalSpec,
) -> np.ndarray:
    """Backward for window_forward; returns (T, F) gradient on the reprs."""
    grad_feats = heads_backward(
        params, cache["heads"], grad_logits[:, None], np.asarray([grad_s], dtype=params.dtype)
    )
    grad_x0 = stack_backward(params, spec, cache["acts"], cache["stack"], grad_feats)
    x = cache["reprs"]
    params.grads["temporal.embed"] += grad_x0[:, 0, :] @ x
    return (params["temporal.embed"].T @ grad_x0[:, 0, :]).T
