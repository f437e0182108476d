"""Backend selection for the streaming step kernel.

The compiled extension is preferred when present; the pure numpy fallback is
always available and semantically identical (numerics may differ at the
summation-order level only).
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _speedups
except ImportError:  # extension not built on this install
    _speedups = None

HAVE_COMPILED = _speedups is not None
DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "python"
BACKENDS = ("auto", "compiled", "python")


def get_backend(name: str = "auto"):
    """Resolve a backend name to the module implementing the kernels."""
    if name == "auto":
        name = DEFAULT_BACKEND
    if name == "compiled":
        if _speedups is None:
            raise RuntimeError("compiled kernel requested but ssnet._speedups is not built")
        return _speedups
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
