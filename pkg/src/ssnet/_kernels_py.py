"""Pure numpy fallback for the streaming step kernel.

Semantically identical to ssnet._speedups; used when the compiled extension
is unavailable or when the python backend is requested explicitly.
"""

from __future__ import annotations

import numpy as np

from .nn import sigmoid


def temporal_column_step(
    w1: np.ndarray,
    w2: np.ndarray,
    bias: np.ndarray,
    past: np.ndarray,
    x0: np.ndarray,
    out: np.ndarray,
) -> None:
    """One time column of the dilated stack.

    w1, w2: (L, 2C, C); bias: (L, 2C); past[i]: buffered activation of layer i
    from d_{i+1} steps back; x0: (C,) embedded input. Writes layer outputs
    (GLU plus residual) into out (L, C).
    """
    c = w1.shape[2]
    cur = x0
    for i in range(w1.shape[0]):
        pre = w1[i] @ past[i] + w2[i] @ cur + bias[i]
        out[i] = pre[:c] * sigmoid(pre[c:]) + cur
        cur = out[i]
