"""The 1-D convolutional speed regressor: layers, forward pass, and exact
analytic backpropagation.

Architecture: three valid (no-padding) convolutions with kernel length 10
and stride 1 growing the channels 6 -> 60 -> 120 -> 240, a flatten, and
dense layers 400 -> 40 -> 1. ReLU on every layer except the linear output,
which may go negative; clamping to >= 0 happens only at the INS consumer
boundary. No pooling. All arithmetic in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch, StaleCache
from . import kernels

KERNEL_LEN = 10
CONV_CHANNELS = (6, 60, 120, 240)
HIDDEN = (400, 40)


@dataclass
class Conv1dLayer:
    weights: np.ndarray  # (out_channels, in_channels, kernel_len)
    bias: np.ndarray  # (out_channels,)
    stride: int = 1

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_len(self) -> int:
        return self.weights.shape[2]

    def out_len(self, in_len: int) -> int:
        if in_len < self.kernel_len:
            raise ShapeMismatch(f"input length {in_len} < kernel length {self.kernel_len}")
        return (in_len - self.kernel_len) // self.stride + 1


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class ModelParams:
    """All weights and biases of the regressor, conv1..3 then fc1..3."""

    conv1: Conv1dLayer
    conv2: Conv1dLayer
    conv3: Conv1dLayer
    fc1: DenseLayer
    fc2: DenseLayer
    fc3: DenseLayer

    def tensors(self):
        """(name, array) pairs in a fixed order; arrays are live references."""
        for name in ("conv1", "conv2", "conv3"):
            layer = getattr(self, name)
            yield f"{name}.w", layer.weights
            yield f"{name}.b", layer.bias
        for name in ("fc1", "fc2", "fc3"):
            layer = getattr(self, name)
            yield f"{name}.w", layer.weights
            yield f"{name}.b", layer.bias

    @property
    def input_channels(self) -> int:
        return self.conv1.in_channels

    @property
    def input_len(self) -> int:
        """Window length implied by the flatten dimension of fc1."""
        l3 = self.fc1.in_dim // self.conv3.out_channels
        shrink = sum(
            (c.kernel_len - 1) for c in (self.conv1, self.conv2, self.conv3)
        )
        return l3 + shrink

    def validate(self) -> None:
        convs = (self.conv1, self.conv2, self.conv3)
        for a, b in zip(convs, convs[1:]):
            if a.out_channels != b.in_channels:
                raise ShapeMismatch(
                    f"conv chain broken: {a.out_channels} out vs {b.in_channels} in"
                )
        length = self.input_len
        for c in convs:
            length = c.out_len(length)
        if self.fc1.in_dim != self.conv3.out_channels * length:
            raise ShapeMismatch(
                f"flatten dim {self.conv3.out_channels * length} != fc1 input {self.fc1.in_dim}"
            )
        if self.fc2.in_dim != self.fc1.out_dim or self.fc3.in_dim != self.fc2.out_dim:
            raise ShapeMismatch("dense chain dimensions inconsistent")
        if self.fc3.out_dim != 1:
            raise ShapeMismatch(f"output layer must be scalar, got {self.fc3.out_dim}")


def _he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)


def build_model(
    input_len: int,
    conv_channels: tuple[int, ...] = CONV_CHANNELS,
    hidden: tuple[int, int] = HIDDEN,
    kernel_len: int = KERNEL_LEN,
    seed: int | np.random.Generator = 0,
) -> ModelParams:
    """Seeded He-uniform initialization of the full architecture.

    The fc1 input dimension is derived from the actual conv output shape
    for the given input length.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if len(conv_channels) != 4:
        raise ShapeMismatch("need four conv channel counts (input + three layers)")
    convs = []
    length = input_len
    for cin, cout in zip(conv_channels, conv_channels[1:]):
        convs.append(
            Conv1dLayer(
                weights=_he_uniform(rng, (cout, cin, kernel_len), cin * kernel_len),
                bias=np.zeros(cout, dtype=np.float64),
            )
        )
        length = convs[-1].out_len(length)
    flat = conv_channels[-1] * length
    dims = (flat, hidden[0], hidden[1], 1)
    denses = [
        DenseLayer(
            weights=_he_uniform(rng, (dout, din), din),
            bias=np.zeros(dout, dtype=np.float64),
        )
        for din, dout in zip(dims, dims[1:])
    ]
    params = ModelParams(*convs, *denses)
    params.validate()
    return params


@dataclass
class ForwardCache:
    """Intermediates needed by the backward pass, tied to one params object."""

    params: ModelParams
    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    a2: np.ndarray
    z3: np.ndarray
    a3: np.ndarray
    flat: np.ndarray
    z4: np.ndarray
    a4: np.ndarray
    z5: np.ndarray
    a5: np.ndarray
    pred: np.ndarray


def _check_input(params: ModelParams, x: np.ndarray) -> None:
    if x.ndim != 3 or x.shape[1] != params.input_channels or x.shape[2] != params.input_len:
        raise ShapeMismatch(
            f"expected (B, {params.input_channels}, {params.input_len}) input, got {x.shape}"
        )


def forward_batch(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Batched forward pass: x (B, C, L) -> predictions (B,) plus cache."""
    x = np.asarray(x, dtype=np.float64)
    _check_input(params, x)
    z1 = kernels.conv1d_forward(x, params.conv1.weights, params.conv1.bias, params.conv1.stride)
    a1 = np.maximum(z1, 0.0)
    z2 = kernels.conv1d_forward(a1, params.conv2.weights, params.conv2.bias, params.conv2.stride)
    a2 = np.maximum(z2, 0.0)
    z3 = kernels.conv1d_forward(a2, params.conv3.weights, params.conv3.bias, params.conv3.stride)
    a3 = np.maximum(z3, 0.0)
    flat = a3.reshape(a3.shape[0], -1)
    z4 = flat @ params.fc1.weights.T + params.fc1.bias
    a4 = np.maximum(z4, 0.0)
    z5 = a4 @ params.fc2.weights.T + params.fc2.bias
    a5 = np.maximum(z5, 0.0)
    pred = (a5 @ params.fc3.weights.T + params.fc3.bias)[:, 0]
    cache = ForwardCache(params, x, z1, a1, z2, a2, z3, a3, flat, z4, a4, z5, a5, pred)
    return pred, cache


def forward(params: ModelParams, window: np.ndarray) -> tuple[float, ForwardCache]:
    """Single-window forward pass returning the raw (unclamped) speed."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D (channels, L) window, got shape {window.shape}")
    pred, cache = forward_batch(params, window[None, :, :])
    return float(pred[0]), cache


def predict_batch(params: ModelParams, x: np.ndarray) -> np.ndarray:
    pred, _ = forward_batch(params, x)
    return pred


def predict(params: ModelParams, window: np.ndarray) -> float:
    """Forward pass without keeping the cache."""
    pred, _ = forward(params, window)
    return pred


def loss(speed_pred: float, label_speed: float) -> float:
    """Squared error of the momentary speed; batch loss is the mean."""
    d = speed_pred - label_speed
    return d * d


def batch_loss(preds: np.ndarray, labels: np.ndarray) -> float:
    d = np.asarray(preds) - np.asarray(labels)
    return float(np.mean(d * d))


def backward_batch(
    params: ModelParams, cache: ForwardCache, labels: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of the mean squared error over the batch.

    Returns arrays keyed like ModelParams.tensors().
    """
    if cache.params is not params:
        raise StaleCache("cache was produced by a different ModelParams object")
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if labels.shape[0] != cache.pred.shape[0]:
        raise ShapeMismatch(f"{labels.shape[0]} labels for batch of {cache.pred.shape[0]}")
    b = labels.shape[0]
    grads: dict[str, np.ndarray] = {}

    dpred = (2.0 / b) * (cache.pred - labels)  # (B,)
    grads["fc3.w"] = dpred[None, :] @ cache.a5
    grads["fc3.b"] = np.array([dpred.sum()])
    da5 = dpred[:, None] @ params.fc3.weights  # (B, h2)

    dz5 = da5 * (cache.z5 > 0.0)
    grads["fc2.w"] = dz5.T @ cache.a4
    grads["fc2.b"] = dz5.sum(axis=0)
    da4 = dz5 @ params.fc2.weights

    dz4 = da4 * (cache.z4 > 0.0)
    grads["fc1.w"] = dz4.T @ cache.flat
    grads["fc1.b"] = dz4.sum(axis=0)
    dflat = dz4 @ params.fc1.weights

    da3 = dflat.reshape(cache.a3.shape)
    dz3 = da3 * (cache.z3 > 0.0)
    da2, grads["conv3.w"], grads["conv3.b"] = kernels.conv1d_backward(
        cache.a2, params.conv3.weights, dz3, params.conv3.stride
    )
    dz2 = da2 * (cache.z2 > 0.0)
    da1, grads["conv2.w"], grads["conv2.b"] = kernels.conv1d_backward(
        cache.a1, params.conv2.weights, dz2, params.conv2.stride
    )
    dz1 = da1 * (cache.z1 > 0.0)
    _, grads["conv1.w"], grads["conv1.b"] = kernels.conv1d_backward(
        cache.x, params.conv1.weights, dz1, params.conv1.stride
    )
    return grads


def backward(params: ModelParams, cache: ForwardCache, label: float) -> dict[str, np.ndarray]:
    """Gradients of the single-sample squared error."""
    return backward_batch(params, cache, np.array([label], dtype=np.float64))
