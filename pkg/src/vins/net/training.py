"""Adam optimization, the training loop, and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datapipe import FoldPlan, Window
from ..errors import InsufficientData, ShapeMismatch
from .model import (
    ModelParams,
    backward_batch,
    batch_loss,
    build_model,
    forward_batch,
    predict_batch,
)


@dataclass
class AdamState:
    """First/second moment tensors mirroring ModelParams, plus hyperparameters."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def for_params(params: ModelParams, lr: float = 1e-4) -> AdamState:
        state = AdamState(lr=lr)
        for name, arr in params.tensors():
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        return state


def adam_step(
    params: ModelParams, grads: dict[str, np.ndarray], state: AdamState
) -> tuple[ModelParams, AdamState]:
    """Standard Adam update with bias correction; mutates params and state."""
    state.step += 1
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    for name, arr in params.tensors():
        g = grads[name].reshape(arr.shape)
        if g.shape != arr.shape:
            raise ShapeMismatch(f"gradient {name} shape {g.shape} != parameter {arr.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        arr -= state.lr * (m / b1c) / (np.sqrt(v / b2c) + state.eps)
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2000
    batch_size: int = 10
    learning_rate: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")


@dataclass
class LossTrace:
    """Per-epoch mean training loss and (optional) validation loss."""

    train: np.ndarray
    validation: np.ndarray | None = None


def _stack(windows: list[Window]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([w.data for w in windows]).astype(np.float64)
    y = np.array([w.label_speed for w in windows], dtype=np.float64)
    return x, y


def train(
    windows: list[Window],
    cfg: TrainConfig,
    fold: FoldPlan | None = None,
    fold_index: int = 0,
    params: ModelParams | None = None,
) -> tuple[ModelParams, LossTrace]:
    """Train the regressor with shuffled mini-batches, deterministically per seed.

    With a FoldPlan, the given fold is held out and traced as validation
    loss. When ``params`` is None the standard architecture is initialized
    for the windows' length, seeded from the same generator that drives the
    epoch shuffles, so identical (data, config, seed) give identical weights.
    """
    if fold is not None:
        train_idx = fold.train_indices(fold_index)
        val_idx = fold.fold_indices(fold_index)
        train_windows = [windows[i] for i in train_idx]
        val_windows = [windows[i] for i in val_idx]
    else:
        train_windows = list(windows)
        val_windows = []
    if len(train_windows) < cfg.batch_size:
        raise InsufficientData(
            f"{len(train_windows)} training windows < batch size {cfg.batch_size}"
        )

    rng = np.random.default_rng(cfg.seed)
    x, y = _stack(train_windows)
    if params is None:
        params = build_model(input_len=x.shape[2], seed=rng)
    xv, yv = _stack(val_windows) if val_windows else (None, None)

    state = AdamState.for_params(params, lr=cfg.learning_rate)
    n = len(train_windows)
    train_trace = np.empty(cfg.epochs, dtype=np.float64)
    val_trace = np.empty(cfg.epochs, dtype=np.float64) if val_windows else None
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            preds, cache = forward_batch(params, x[idx])
            losses.append(batch_loss(preds, y[idx]))
            grads = backward_batch(params, cache, y[idx])
            adam_step(params, grads, state)
        train_trace[epoch] = float(np.mean(losses))
        if val_trace is not None:
            val_trace[epoch] = batch_loss(predict_batch(params, xv), yv)
    return params, LossTrace(train=train_trace, validation=val_trace)


@dataclass(frozen=True)
class EvalRecord:
    label: float
    prediction: float
    mode: str | None


def evaluate(params: ModelParams, windows: list[Window]) -> tuple[float, list[EvalRecord]]:
    """RMSE of raw predictions against labels, plus per-window records."""
    if not windows:
        raise InsufficientData("no windows to evaluate")
    x, y = _stack(windows)
    preds = predict_batch(params, x)
    rmse = float(np.sqrt(np.mean((preds - y) ** 2)))
    records = [
        EvalRecord(float(lab), float(pred), w.mode.name.lower() if w.mode else None)
        for lab, pred, w in zip(y, preds, windows)
    ]
    return rmse, records
