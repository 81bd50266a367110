"""Minimal differentiable-operator library backing all model architectures."""

from .adam import Adam, AdamState, adam_step
from .functional import (
    cross_entropy,
    cross_entropy_backward,
    mse,
    mse_backward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    softmax,
    softmax_backward,
    tanh,
    tanh_backward,
)
from .gradcheck import GradCheckReport, check_layer_like, gradient_check
from .layers import (
    BatchNorm,
    Conv1d,
    Conv2d,
    Dense,
    Dropout,
    Embedding,
    Layer,
    MaxPool2d,
    ShapeError,
)
from .recurrent import BidirectionalLast, GRUCell, LSTMCell, LSTMState

__all__ = [
    "Adam",
    "AdamState",
    "adam_step",
    "BatchNorm",
    "BidirectionalLast",
    "check_layer_like",
    "Conv1d",
    "Conv2d",
    "cross_entropy",
    "cross_entropy_backward",
    "Dense",
    "Dropout",
    "Embedding",
    "GradCheckReport",
    "gradient_check",
    "GRUCell",
    "Layer",
    "LSTMCell",
    "LSTMState",
    "MaxPool2d",
    "mse",
    "mse_backward",
    "relu",
    "relu_backward",
    "ShapeError",
    "sigmoid",
    "sigmoid_backward",
    "softmax",
    "softmax_backward",
    "tanh",
    "tanh_backward",
]
