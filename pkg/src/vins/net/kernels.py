"""Backend selection for the convolution kernels.

The compiled extension is preferred when importable; the numpy fallback is
always available. Set ``VINS_BACKEND=python`` or ``VINS_BACKEND=cython`` to
force a backend (forcing cython raises if the extension is missing).

Both backends implement the same contracts and are individually
deterministic; tiny floating-point differences between them (summation
order) are expected.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ShapeMismatch
from . import _conv_py

try:
    from . import _conv_cy
except ImportError:
    _conv_cy = None


def _select():
    forced = os.environ.get("VINS_BACKEND", "").strip().lower()
    if forced in ("python", "py", "numpy"):
        return _conv_py, "python"
    if forced in ("cython", "cy", "c"):
        if _conv_cy is None:
            raise RuntimeError("VINS_BACKEND=cython but the compiled extension is not importable")
        return _conv_cy, "cython"
    if forced:
        raise RuntimeError(f"unknown VINS_BACKEND {forced!r}")
    if _conv_cy is not None:
        return _conv_cy, "cython"
    return _conv_py, "python"


_impl, BACKEND = _select()


def available_backends() -> dict[str, object]:
    out = {"python": _conv_py}
    if _conv_cy is not None:
        out["cython"] = _conv_cy
    return out


def _check(x: np.ndarray, w: np.ndarray, bias: np.ndarray, stride: int) -> None:
    if x.ndim != 3 or w.ndim != 3 or bias.ndim != 1:
        raise ShapeMismatch(f"bad ranks: x{x.shape}, w{w.shape}, bias{bias.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"input channels {x.shape[1]} != kernel channels {w.shape[1]}")
    if w.shape[0] != bias.shape[0]:
        raise ShapeMismatch(f"output channels {w.shape[0]} != bias length {bias.shape[0]}")
    if x.shape[2] < w.shape[2]:
        raise ShapeMismatch(f"input length {x.shape[2]} < kernel length {w.shape[2]}")
    if stride < 1:
        raise ShapeMismatch(f"stride must be >= 1, got {stride}")


def conv1d_forward(x: np.ndarray, w: np.ndarray, bias: np.ndarray, stride: int = 1) -> np.ndarray:
    """Valid cross-correlation: (B,Cin,Lin) -> (B,Cout,Lout)."""
    _check(x, w, bias, stride)
    return _impl.conv1d_forward(
        np.ascontiguousarray(x), np.ascontiguousarray(w), np.ascontiguousarray(bias), stride
    )


def conv1d_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray, stride: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db) of the valid cross-correlation."""
    if dy.shape[0] != x.shape[0] or dy.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"dy shape {dy.shape} inconsistent with x{x.shape}, w{w.shape}")
    return _impl.conv1d_backward(
        np.ascontiguousarray(x), np.ascontiguousarray(w), np.ascontiguousarray(dy), stride
    )
