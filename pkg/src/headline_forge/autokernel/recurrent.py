"""GRU and LSTM cells plus a masked bidirectional last-state reader.

Cells are parameter containers with pure step functions: step() returns
the new state and a cache, step_backward() consumes that cache, adds into
the parameter gradients, and returns gradients for the step inputs.
bidirectional_last runs one forward and one reversed pass over a padded
batch, gating state updates by the mask so padded positions leave the
state untouched.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .functional import sigmoid, tanh
from .layers import Layer, ShapeError


class GRUCell(Layer):
    """Gated recurrent unit.

    r = sigmoid(x W_r + h U_r + b_r)
    z = sigmoid(x W_z + h U_z + b_z)
    h~ = tanh(x W_h + r * (h U_h) + b_h)
    h_t = (1 - z) * h_prev + z * h~
    """

    GATES = ("r", "z", "h")

    def __init__(self, params: dict[str, np.ndarray]):
        super().__init__()
        for gate in self.GATES:
            self._register(f"W_{gate}", params[f"W_{gate}"])
            self._register(f"U_{gate}", params[f"U_{gate}"])
            self._register(f"b_{gate}", params[f"b_{gate}"])
        self.input_dim = self.params["W_r"].shape[0]
        self.hidden_dim = self.params["W_r"].shape[1]

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> "GRUCell":
        bound_w = np.sqrt(6.0 / (input_dim + hidden_dim))
        bound_u = np.sqrt(6.0 / (2 * hidden_dim))
        params = {}
        for gate in cls.GATES:
            params[f"W_{gate}"] = rng.uniform(-bound_w, bound_w, (input_dim, hidden_dim))
            params[f"U_{gate}"] = rng.uniform(-bound_u, bound_u, (hidden_dim, hidden_dim))
            params[f"b_{gate}"] = np.zeros(hidden_dim)
        return cls(params)

    def initial_state(self, batch: int) -> np.ndarray:
        return np.zeros((batch, self.hidden_dim))

    def step(self, x: np.ndarray, h_prev: np.ndarray) -> tuple[np.ndarray, tuple]:
        if x.shape[1] != self.input_dim or h_prev.shape[1] != self.hidden_dim:
            raise ShapeError(f"gru step got x {x.shape}, h {h_prev.shape}")
        p = self.params
        r = sigmoid(x @ p["W_r"] + h_prev @ p["U_r"] + p["b_r"])
        z = sigmoid(x @ p["W_z"] + h_prev @ p["U_z"] + p["b_z"])
        a = h_prev @ p["U_h"]
        h_cand = tanh(x @ p["W_h"] + r * a + p["b_h"])
        h_t = (1.0 - z) * h_prev + z * h_cand
        return h_t, (x, h_prev, r, z, a, h_cand)

    def step_backward(self, cache: tuple, grad_h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, h_prev, r, z, a, h_cand = cache
        p, g = self.params, self.grads

        dz = grad_h * (h_cand - h_prev)
        dh_cand = grad_h * z
        dh_prev = grad_h * (1.0 - z)

        dpre_h = dh_cand * (1.0 - h_cand * h_cand)
        g["W_h"] += x.T @ dpre_h
        g["b_h"] += dpre_h.sum(axis=0)
        dx = dpre_h @ p["W_h"].T
        dr = dpre_h * a
        da = dpre_h * r
        g["U_h"] += h_prev.T @ da
        dh_prev = dh_prev + da @ p["U_h"].T

        for gate, dgate in (("z", dz), ("r", dr)):
            y = z if gate == "z" else r
            dpre = dgate * y * (1.0 - y)
            g[f"W_{gate}"] += x.T @ dpre
            g[f"U_{gate}"] += h_prev.T @ dpre
            g[f"b_{gate}"] += dpre.sum(axis=0)
            dx += dpre @ p[f"W_{gate}"].T
            dh_prev += dpre @ p[f"U_{gate}"].T
        return dx, dh_prev


class LSTMState(NamedTuple):
    h: np.ndarray
    c: np.ndarray


class LSTMCell(Layer):
    """Standard LSTM with input/forget/output gates and a tanh candidate.

    c_t = f * c_prev + i * c~;  h_t = o * tanh(c_t)
    """

    GATES = ("i", "f", "o", "c")

    def __init__(self, params: dict[str, np.ndarray]):
        super().__init__()
        for gate in self.GATES:
            self._register(f"W_{gate}", params[f"W_{gate}"])
            self._register(f"U_{gate}", params[f"U_{gate}"])
            self._register(f"b_{gate}", params[f"b_{gate}"])
        self.input_dim = self.params["W_i"].shape[0]
        self.hidden_dim = self.params["W_i"].shape[1]

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> "LSTMCell":
        bound_w = np.sqrt(6.0 / (input_dim + hidden_dim))
        bound_u = np.sqrt(6.0 / (2 * hidden_dim))
        params = {}
        for gate in cls.GATES:
            params[f"W_{gate}"] = rng.uniform(-bound_w, bound_w, (input_dim, hidden_dim))
            params[f"U_{gate}"] = rng.uniform(-bound_u, bound_u, (hidden_dim, hidden_dim))
            params[f"b_{gate}"] = np.zeros(hidden_dim)
        return cls(params)

    def initial_state(self, batch: int) -> LSTMState:
        return LSTMState(np.zeros((batch, self.hidden_dim)), np.zeros((batch, self.hidden_dim)))

    def step(self, x: np.ndarray, state: LSTMState) -> tuple[LSTMState, tuple]:
        if x.shape[1] != self.input_dim:
            raise ShapeError(f"lstm step got x {x.shape}")
        p = self.params
        h_prev, c_prev = state
        i = sigmoid(x @ p["W_i"] + h_prev @ p["U_i"] + p["b_i"])
        f = sigmoid(x @ p["W_f"] + h_prev @ p["U_f"] + p["b_f"])
        o = sigmoid(x @ p["W_o"] + h_prev @ p["U_o"] + p["b_o"])
        c_cand = tanh(x @ p["W_c"] + h_prev @ p["U_c"] + p["b_c"])
        c_t = f * c_prev + i * c_cand
        tanh_c = tanh(c_t)
        h_t = o * tanh_c
        cache = (x, h_prev, c_prev, i, f, o, c_cand, tanh_c)
        return LSTMState(h_t, c_t), cache

    def step_backward(
        self, cache: tuple, grad_h: np.ndarray, grad_c: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, h_prev, c_prev, i, f, o, c_cand, tanh_c = cache
        p, g = self.params, self.grads

        do = grad_h * tanh_c
        dc = grad_c + grad_h * o * (1.0 - tanh_c * tanh_c)
        df = dc * c_prev
        di = dc * c_cand
        dcand = dc * i
        dc_prev = dc * f

        dx = np.zeros_like(x)
        dh_prev = np.zeros_like(h_prev)
        pre_grads = {
            "i": di * i * (1.0 - i),
            "f": df * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "c": dcand * (1.0 - c_cand * c_cand),
        }
        for gate, dpre in pre_grads.items():
            g[f"W_{gate}"] += x.T @ dpre
            g[f"U_{gate}"] += h_prev.T @ dpre
            g[f"b_{gate}"] += dpre.sum(axis=0)
            dx += dpre @ p[f"W_{gate}"].T
            dh_prev += dpre @ p[f"U_{gate}"].T
        return dx, dh_prev, dc_prev


class _DirectionTrace(NamedTuple):
    order: list[int]
    caches: list[tuple]
    masks: list[np.ndarray]


def _run_direction(cell: Layer, xs: np.ndarray, mask: np.ndarray, order: list[int]):
    """March the cell over `order`, gating updates by the mask column."""
    batch = xs.shape[0]
    is_lstm = isinstance(cell, LSTMCell)
    state = cell.initial_state(batch)
    caches: list[tuple] = []
    masks: list[np.ndarray] = []
    for t in order:
        m = mask[:, t : t + 1]
        new_state, cache = cell.step(xs[:, t, :], state)
        if is_lstm:
            state = LSTMState(
                m * new_state.h + (1.0 - m) * state.h,
                m * new_state.c + (1.0 - m) * state.c,
            )
        else:
            state = m * new_state + (1.0 - m) * state
        caches.append(cache)
        masks.append(m)
    h_last = state.h if is_lstm else state
    return h_last, _DirectionTrace(order, caches, masks)


def _backprop_direction(
    cell: Layer, trace: _DirectionTrace, grad_h: np.ndarray, dxs: np.ndarray
) -> None:
    is_lstm = isinstance(cell, LSTMCell)
    gh = grad_h
    gc = np.zeros_like(grad_h) if is_lstm else None
    for t, cache, m in zip(reversed(trace.order), reversed(trace.caches), reversed(trace.masks)):
        if is_lstm:
            dx, dh_cell, dc_cell = cell.step_backward(cache, gh * m, gc * m)
            gh = gh * (1.0 - m) + dh_cell
            gc = gc * (1.0 - m) + dc_cell
        else:
            dx, dh_cell = cell.step_backward(cache, gh * m)
            gh = gh * (1.0 - m) + dh_cell
        dxs[:, t, :] += dx


class BidirectionalLast(Layer):
    """Concatenated final states of a forward and a backward recurrent pass.

    Padded positions (mask 0) are skipped: the state carries through them
    unchanged in both directions, so trailing pads never alter the result.
    """

    def __init__(self, forward_cell: Layer, backward_cell: Layer):
        super().__init__()
        self.fwd = forward_cell
        self.bwd = backward_cell
        self.params = {}
        self.grads = {}
        for prefix, cell in (("fwd", self.fwd), ("bwd", self.bwd)):
            for name in cell.params:
                self.params[f"{prefix}.{name}"] = cell.params[name]
                self.grads[f"{prefix}.{name}"] = cell.grads[name]
        self._traces: tuple[_DirectionTrace, _DirectionTrace] | None = None
        self._x_shape: tuple[int, ...] | None = None

    def forward(self, xs: np.ndarray, mask: np.ndarray, train: bool = False) -> np.ndarray:
        if xs.ndim != 3 or mask.shape != xs.shape[:2]:
            raise ShapeError(f"sequence {xs.shape} and mask {mask.shape} disagree")
        if np.any(mask.sum(axis=1) == 0):
            raise ValueError("all-pad sequence in batch")
        length = xs.shape[1]
        h_fwd, trace_fwd = _run_direction(self.fwd, xs, mask, list(range(length)))
        h_bwd, trace_bwd = _run_direction(self.bwd, xs, mask, list(range(length - 1, -1, -1)))
        self._traces = (trace_fwd, trace_bwd)
        self._x_shape = xs.shape
        return np.concatenate([h_fwd, h_bwd], axis=1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._traces is not None and self._x_shape is not None
        hidden = grad.shape[1] // 2
        dxs = np.zeros(self._x_shape)
        _backprop_direction(self.fwd, self._traces[0], grad[:, :hidden], dxs)
        _backprop_direction(self.bwd, self._traces[1], grad[:, hidden:], dxs)
        return dxs

    def zero_grad(self) -> None:
        self.fwd.zero_grad()
        self.bwd.zero_grad()
