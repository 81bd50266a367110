"""Adam optimizer with bias-corrected moment estimates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment buffers and step counter for one parameter set."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], **hyper) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **hyper,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> AdamState:
    """One in-place update: theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must align")
    state.step += 1
    t = state.step
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    return state


class Adam:
    """Convenience wrapper binding an AdamState to (param, grad) pairs."""

    def __init__(self, param_grad_pairs: list[tuple[np.ndarray, np.ndarray]], **hyper):
        self.pairs = param_grad_pairs
        self.state = AdamState.for_params([p for p, _ in param_grad_pairs], **hyper)

    def step(self) -> None:
        adam_step([p for p, _ in self.pairs], [g for _, g in self.pairs], self.state)

    def zero_grad(self) -> None:
        for _, g in self.pairs:
            g[...] = 0.0
