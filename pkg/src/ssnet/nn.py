"""Minimal differentiable substrate: parameters, layer primitives, optimizer.

Every primitive has a hand-derived backward; there is no autodiff graph.
32-bit is the working precision, 64-bit is used for gradient checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


@dataclass(frozen=True)
class OptConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    decay: float = 0.95
    decay_unit: str = "per-epoch"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")
        if self.decay_unit != "per-epoch":
            raise ValueError(f"unknown decay unit {self.decay_unit!r}")


class ParamStore:
    """Named parameter tensors with parallel gradient and momentum buffers.

    Iteration order is the insertion order and stays fixed, which makes the
    optimizer step and checkpoint layout deterministic.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.momenta: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.values:
            raise ValueError(f"duplicate parameter name {name!r}")
        value = np.ascontiguousarray(value, dtype=self.dtype)
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        self.momenta[name] = np.zeros_like(value)

    def names(self) -> list[str]:
        return list(self.values)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0

    def param_count(self) -> int:
        return sum(v.size for v in self.values.values())

    def astype(self, dtype) -> "ParamStore":
        other = ParamStore(dtype)
        for name, v in self.values.items():
            other.add(name, v.astype(dtype))
        return other

    def copy(self) -> "ParamStore":
        return self.astype(self.dtype)


INIT_RANGE = 0.08  # uniform init bound for all learnable tensors


def init_params(spec: list[tuple[str, tuple[int, ...]]], seed: int, dtype=np.float32) -> ParamStore:
    """Draw every parameter i.i.d. uniform on [-0.08, 0.08] from a seeded RNG."""
    if not spec:
        raise ValueError("parameter spec is empty")
    rng = np.random.default_rng(seed)
    store = ParamStore(dtype)
    for name, shape in spec:
        if any(s <= 0 for s in shape):
            raise ValueError(f"non-positive dimension in shape of {name!r}")
        store.add(name, rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape))
    return store


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = Wx + b for a single vector x."""
    if w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise ValueError(f"affine shape mismatch: W{w.shape}, x{x.shape}, b{b.shape}")
    return w @ x + b


def affine_backward(grad_y: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Returns (grad_x, grad_W, grad_b) for upstream grad_y."""
    return w.T @ grad_y, np.outer(grad_y, x), grad_y.copy()


def glu(pre: np.ndarray) -> np.ndarray:
    """Gated linear unit over the leading axis: value half times sigmoid(gate half)."""
    n = pre.shape[0]
    if n % 2:
        raise ValueError("glu input length must be even")
    half = n // 2
    return pre[:half] * sigmoid(pre[half:])


def glu_backward(grad_out: np.ndarray, pre: np.ndarray) -> np.ndarray:
    half = pre.shape[0] // 2
    val, gate = pre[:half], pre[half:]
    sig = sigmoid(gate)
    grad = np.empty_like(pre)
    grad[:half] = grad_out * sig
    grad[half:] = grad_out * val * sig * (1.0 - sig)
    return grad


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def softmax_nll(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Stable softmax + negative log-likelihood of the target class."""
    k = logits.shape[0]
    if k < 2:
        raise ValueError("need at least 2 classes")
    if not 0 <= target < k:
        raise ValueError(f"target {target} out of range for {k} classes")
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    probs = np.exp(shifted - log_z)
    loss = float(log_z - shifted[target])
    return loss, probs


def softmax_nll_backward(probs: np.ndarray, target: int) -> np.ndarray:
    grad = probs.copy()
    grad[target] -= 1.0
    return grad


def sgd_momentum_step(params: ParamStore, cfg: OptConfig, lr: float | None = None) -> None:
    """Classical momentum: v <- m*v - lr*g; theta <- theta + v. Zeroes grads."""
    step_lr = cfg.learning_rate if lr is None else lr
    for name in params.names():
        g = params.grads[name]
        if not np.isfinite(g).all():
            raise FloatingPointError(f"NaN or Inf gradient in tensor '{name}'")
        v = params.momenta[name]
        v *= cfg.momentum
        v -= step_lr * g
        params.values[name] += v
        g[...] = 0


def finite_diff_check(loss_fn, params: ParamStore, epsilon: float) -> dict[str, float]:
    """Max relative error per tensor between analytic and central-difference grads.

    loss_fn(params) must return a scalar loss and leave the analytic gradients
    in params.grads. Requires 64-bit parameters; relative error is
    |a - n| / max(|a|, |n|, 1e-8).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if params.dtype != np.float64:
        raise ValueError("finite_diff_check requires float64 parameters")

    params.zero_grads()
    f0 = float(loss_fn(params))
    analytic = {name: params.grads[name].copy() for name in params.names()}
    params.zero_grads()
    f1 = float(loss_fn(params))
    if f0 != f1:
        raise ValueError("loss_fn is not deterministic: two evaluations differ")

    report: dict[str, float] = {}
    for name in params.names():
        value = params.values[name]
        flat = value.reshape(-1)
        ana = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = float(loss_fn(params))
            flat[i] = orig - epsilon
            f_minus = float(loss_fn(params))
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            rel = abs(ana[i] - numeric) / max(abs(ana[i]), abs(numeric), 1e-8)
            worst = max(worst, rel)
        report[name] = worst
    params.zero_grads()
    return report
