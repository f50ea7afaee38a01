"""Weight persistence.

File layout: magic ``VINS-NET1``, little-endian u32 layer count, then per
layer a u8 kind (0 = conv, 1 = dense), the u32 shape dims (3 for conv:
out, in, kernel; 2 for dense: out, in), the f64 weights row-major, and the
f64 biases. Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CorruptWeights
from .model import Conv1dLayer, DenseLayer, ModelParams

MAGIC = b"VINS-NET1"
KIND_CONV = 0
KIND_DENSE = 1


def save_weights(params: ModelParams, path) -> None:
    params.validate()
    layers = [params.conv1, params.conv2, params.conv3, params.fc1, params.fc2, params.fc3]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(layers)))
        for layer in layers:
            kind = KIND_CONV if isinstance(layer, Conv1dLayer) else KIND_DENSE
            fh.write(struct.pack("<B", kind))
            for dim in layer.weights.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(layer.weights.astype("<f8").tobytes(order="C"))
            fh.write(layer.bias.astype("<f8").tobytes(order="C"))


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise CorruptWeights(f"truncated file while reading {what}")
    return buf


def load_weights(path) -> ModelParams:
    with open(path, "rb") as fh:
        if _read_exact(fh, len(MAGIC), "magic") != MAGIC:
            raise CorruptWeights("bad magic bytes")
        (n_layers,) = struct.unpack("<I", _read_exact(fh, 4, "layer count"))
        if n_layers != 6:
            raise CorruptWeights(f"expected 6 layers, file declares {n_layers}")
        layers = []
        for i in range(n_layers):
            (kind,) = struct.unpack("<B", _read_exact(fh, 1, f"layer {i} kind"))
            if kind == KIND_CONV:
                ndim = 3
            elif kind == KIND_DENSE:
                ndim = 2
            else:
                raise CorruptWeights(f"unknown layer kind {kind}")
            shape = struct.unpack(
                "<" + "I" * ndim, _read_exact(fh, 4 * ndim, f"layer {i} shape")
            )
            n_w = int(np.prod(shape))
            w = np.frombuffer(
                _read_exact(fh, 8 * n_w, f"layer {i} weights"), dtype="<f8"
            ).reshape(shape)
            b = np.frombuffer(_read_exact(fh, 8 * shape[0], f"layer {i} biases"), dtype="<f8")
            if kind == KIND_CONV:
                layers.append(Conv1dLayer(w.astype(np.float64), b.astype(np.float64)))
            else:
                layers.append(DenseLayer(w.astype(np.float64), b.astype(np.float64)))
        if fh.read(1):
            raise CorruptWeights("trailing bytes after last layer")
    kinds = [isinstance(l, Conv1dLayer) for l in layers]
    if kinds != [True, True, True, False, False, False]:
        raise CorruptWeights("layer kinds are not conv,conv,conv,dense,dense,dense")
    params = ModelParams(*layers)
    try:
        params.validate()
    except Exception as e:
        raise CorruptWeights(f"inconsistent layer shapes: {e}") from None
    return params
