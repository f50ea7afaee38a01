"""Convolutional speed regressor: inference, backprop, Adam training, persistence."""

from .kernels import BACKEND, available_backends, conv1d_backward, conv1d_forward
from .model import (
    Conv1dLayer,
    DenseLayer,
    ForwardCache,
    ModelParams,
    backward,
    backward_batch,
    batch_loss,
    build_model,
    forward,
    forward_batch,
    loss,
    predict,
    predict_batch,
)
from .training import AdamState, EvalRecord, LossTrace, TrainConfig, adam_step, evaluate, train
from .weights_io import load_weights, save_weights

__all__ = [
    "BACKEND",
    "AdamState",
    "Conv1dLayer",
    "DenseLayer",
    "EvalRecord",
    "ForwardCache",
    "LossTrace",
    "ModelParams",
    "TrainConfig",
    "adam_step",
    "available_backends",
    "backward",
    "backward_batch",
    "batch_loss",
    "build_model",
    "conv1d_backward",
    "conv1d_forward",
    "evaluate",
    "forward",
    "forward_batch",
    "load_weights",
    "loss",
    "predict",
    "predict_batch",
    "save_weights",
    "train",
]
