"""Pure-numpy 1-D convolution kernels (fallback backend).

Valid (no-padding) cross-correlation via sliding windows and BLAS-backed
tensordot. Shapes: x (B, Cin, Lin), w (Cout, Cin, K), y (B, Cout, Lout)
with Lout = floor((Lin - K) / stride) + 1.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d_forward(x: np.ndarray, w: np.ndarray, bias: np.ndarray, stride: int = 1) -> np.ndarray:
    cols = sliding_window_view(x, w.shape[2], axis=2)[:, :, ::stride, :]  # (B,Cin,Lout,K)
    y = np.tensordot(cols, w, axes=[(1, 3), (1, 2)])  # (B,Lout,Cout)
    return np.ascontiguousarray(y.transpose(0, 2, 1)) + bias[None, :, None]


def conv1d_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray, stride: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = w.shape[2]
    db = dy.sum(axis=(0, 2))
    if stride > 1:
        # dilate dy so the stride-1 formulas below apply
        b, cout, lout = dy.shape
        dyd = np.zeros((b, cout, (lout - 1) * stride + 1), dtype=dy.dtype)
        dyd[:, :, ::stride] = dy
    else:
        dyd = dy
    cols = sliding_window_view(x, k, axis=2)[:, :, : dyd.shape[2], :]  # (B,Cin,Ld,K)
    dw = np.tensordot(dyd, cols, axes=[(0, 2), (0, 2)])  # (Cout,Cin,K)
    # Full correlation of dy with the kernel flipped along K gives dx.
    pad = np.zeros(dyd.shape[:2] + (k - 1,), dtype=dyd.dtype)
    dyp = np.concatenate([pad, dyd, pad], axis=2)
    n_missing = x.shape[2] - (dyp.shape[2] - k + 1)
    if n_missing > 0:  # strided output did not cover the tail of x
        dyp = np.concatenate([dyp, np.zeros(dyd.shape[:2] + (n_missing,), dtype=dy.dtype)], axis=2)
    cols_dy = sliding_window_view(dyp, k, axis=2)  # (B,Cout,Lin,K)
    dx = np.tensordot(cols_dy, w[:, :, ::-1], axes=[(1, 3), (0, 2)])  # (B,Lin,Cin)
    return np.ascontiguousarray(dx.transpose(0, 2, 1)), dw, db
