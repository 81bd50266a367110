"""Elementwise activations and losses with exact analytic backward passes.

Arrays are plain float64 ndarrays; an ndarray's shape plus flat buffer is
the tensor representation used throughout (and serialized as float32 in
checkpoints). Forward functions return values only; each has a paired
*_backward taking the upstream gradient plus whatever the forward needs
cached.
"""

from __future__ import annotations

import numpy as np


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad * (x > 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to stay overflow-free on large |x|.
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(grad: np.ndarray, y: np.ndarray) -> np.ndarray:
    return grad * y * (1.0 - y)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(grad: np.ndarray, y: np.ndarray) -> np.ndarray:
    return grad * (1.0 - y * y)


def softmax(x: np.ndarray) -> np.ndarray:
    """Softmax over the last axis; rows sum to 1."""
    shifted = np.exp(x - x.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def softmax_backward(grad: np.ndarray, y: np.ndarray) -> np.ndarray:
    inner = (grad * y).sum(axis=-1, keepdims=True)
    return y * (grad - inner)


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared element error over every entry."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def mse_backward(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


CE_CLAMP = 1e-12


def cross_entropy(pred_probs: np.ndarray, hard_labels: np.ndarray) -> float:
    """Mean negative log probability of the true (1-based) label.

    Probabilities are clamped at 1e-12 before the log so a vanishing
    prediction yields a large finite loss instead of infinity.
    """
    idx = np.asarray(hard_labels) - 1
    picked = pred_probs[np.arange(pred_probs.shape[0]), idx]
    return float(np.mean(-np.log(np.maximum(picked, CE_CLAMP))))


def cross_entropy_backward(pred_probs: np.ndarray, hard_labels: np.ndarray) -> np.ndarray:
    idx = np.asarray(hard_labels) - 1
    grad = np.zeros_like(pred_probs)
    rows = np.arange(pred_probs.shape[0])
    picked = pred_probs[rows, idx]
    live = picked > CE_CLAMP
    grad[rows[live], idx[live]] = -1.0 / (pred_probs.shape[0] * picked[live])
    return grad
