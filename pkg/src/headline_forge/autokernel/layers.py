"""Layer operators: parameter containers with forward/backward passes.

Each layer keeps its parameters in `params` (name -> ndarray) and
accumulates matching-shape gradients in `grads`. forward() caches whatever
backward() needs; backward() must follow the matching forward. Layers are
immutable after construction apart from gradient buffers, batch-norm
running statistics, and in-place optimizer updates of the parameter
arrays.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .functional import relu


class ShapeError(ValueError):
    """Raised when operator input shapes disagree with parameters."""


class Layer:
    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def _register(self, name: str, value: np.ndarray) -> np.ndarray:
        array = np.asarray(value, dtype=np.float64)
        self.params[name] = array
        self.grads[name] = np.zeros_like(array)
        return array

    def zero_grad(self) -> None:
        for grad in self.grads.values():
            grad[...] = 0.0

    def parameter_list(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.params[name], self.grads[name]) for name in sorted(self.params)]


class Dense(Layer):
    """Affine map y = x W + b over the last axis of a [batch, in] input."""

    def __init__(self, w: np.ndarray, b: np.ndarray):
        super().__init__()
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise ShapeError(f"inconsistent dense shapes {w.shape} / {b.shape}")
        self.w = self._register("w", w)
        self.b = self._register("b", b)
        self._x: np.ndarray | None = None

    @classmethod
    def init(cls, fan_in: int, fan_out: int, rng: np.random.Generator) -> "Dense":
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return cls(rng.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out))

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.shape[-1] != self.w.shape[0]:
            raise ShapeError(f"dense expected {self.w.shape[0]} inputs, got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._x
        assert x is not None, "backward before forward"
        self.grads["w"] += x.T @ grad
        self.grads["b"] += grad.sum(axis=0)
        return grad @ self.w.T


class Embedding(Layer):
    """Row lookup into a trainable table; id 0 is a frozen all-zero row."""

    def __init__(self, table: np.ndarray):
        super().__init__()
        if table.ndim != 2:
            raise ShapeError("embedding table must be 2-d")
        table = np.asarray(table, dtype=np.float64).copy()
        table[0] = 0.0
        self.table = self._register("table", table)
        self._ids: np.ndarray | None = None

    @classmethod
    def init(
        cls, vocab_size: int, dim: int, rng: np.random.Generator, scale: float = 0.05
    ) -> "Embedding":
        return cls(rng.uniform(-scale, scale, (vocab_size, dim)))

    def forward(self, ids: np.ndarray, train: bool = False) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= self.table.shape[0]):
            raise ShapeError("token id out of embedding range")
        self._ids = ids
        return self.table[ids]

    def backward(self, grad: np.ndarray) -> None:
        ids = self._ids
        assert ids is not None, "backward before forward"
        flat_ids = ids.reshape(-1)
        if flat_ids.size == 0:
            return
        flat_grad = grad.reshape(-1, self.table.shape[1])
        # Segment-sum duplicate ids instead of np.add.at, which scatters
        # one element at a time.
        order = np.argsort(flat_ids, kind="stable")
        sorted_ids = flat_ids[order]
        starts = np.flatnonzero(
            np.concatenate(([True], sorted_ids[1:] != sorted_ids[:-1]))
        )
        sums = np.add.reduceat(flat_grad[order], starts, axis=0)
        self.grads["table"][sorted_ids[starts]] += sums
        self.grads["table"][0] = 0.0


def _pad_hw(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


class Conv2d(Layer):
    """Stride-1 cross-correlation with bias and fused ReLU.

    Kernels are [ch_out, ch_in, kh, kw] with odd kh, kw; padding is either
    "valid" or "same". No kernel flip: this is correlation, not
    mathematical convolution.
    """

    def __init__(self, kernels: np.ndarray, bias: np.ndarray, padding: str = "same"):
        super().__init__()
        if kernels.ndim != 4:
            raise ShapeError("kernels must be [ch_out, ch_in, kh, kw]")
        kh, kw = kernels.shape[2], kernels.shape[3]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError("kernel dims must be odd")
        if bias.shape != (kernels.shape[0],):
            raise ShapeError("bias must match ch_out")
        if padding not in ("same", "valid"):
            raise ValueError(f"unknown padding mode {padding!r}")
        self.kernels = self._register("kernels", kernels)
        self.bias = self._register("bias", bias)
        self.padding = padding
        self._cache: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def init(
        cls,
        ch_in: int,
        ch_out: int,
        kh: int,
        kw: int,
        rng: np.random.Generator,
        padding: str = "same",
    ) -> "Conv2d":
        fan_in = ch_in * kh * kw
        bound = np.sqrt(6.0 / (fan_in + ch_out))
        kernels = rng.uniform(-bound, bound, (ch_out, ch_in, kh, kw))
        return cls(kernels, np.zeros(ch_out), padding)

    def _pads(self) -> tuple[int, int]:
        kh, kw = self.kernels.shape[2], self.kernels.shape[3]
        if self.padding == "same":
            return (kh - 1) // 2, (kw - 1) // 2
        return 0, 0

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.kernels.shape[1]:
            raise ShapeError(f"conv2d expected [batch, {self.kernels.shape[1]}, h, w], got {x.shape}")
        co, ci, kh, kw = self.kernels.shape
        ph, pw = self._pads()
        xp = _pad_hw(x, ph, pw)
        if xp.shape[2] < kh or xp.shape[3] < kw:
            raise ShapeError("kernel larger than padded input")
        # Flatten windows into [batch*h*w, ch_in*kh*kw] so both passes are
        # plain matrix products against the flattened kernel bank.
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
        b, h, w = xp.shape[0], windows.shape[2], windows.shape[3]
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, ci * kh * kw)
        wmat = self.kernels.reshape(co, ci * kh * kw)
        z = (cols @ wmat.T + self.bias).reshape(b, h, w, co).transpose(0, 3, 1, 2)
        self._cache = (cols, z)
        return relu(z)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._cache is not None, "backward before forward"
        cols, z = self._cache
        co, ci, kh, kw = self.kernels.shape
        ph, pw = self._pads()
        b, _, h, w = z.shape

        gz = grad * (z > 0.0)
        self.grads["bias"] += gz.sum(axis=(0, 2, 3))
        gz_cols = gz.transpose(0, 2, 3, 1).reshape(b * h * w, co)
        wmat = self.kernels.reshape(co, ci * kh * kw)
        self.grads["kernels"] += (gz_cols.T @ cols).reshape(self.kernels.shape)

        # Scatter the per-window input gradients back onto the padded
        # canvas, then crop away the forward padding.
        dcols = (gz_cols @ wmat).reshape(b, h, w, ci, kh, kw)
        dxp = np.zeros((b, ci, h + kh - 1, w + kw - 1))
        for u in range(kh):
            for v in range(kw):
                dxp[:, :, u : u + h, v : v + w] += dcols[:, :, :, :, u, v].transpose(
                    0, 3, 1, 2
                )
        if ph or pw:
            dxp = dxp[:, :, ph : dxp.shape[2] - ph, pw : dxp.shape[3] - pw]
        return dxp


class Conv1d(Layer):
    """One-dimensional convolution over [batch, len, ch_in] sequences.

    Implemented as a height-1 Conv2d; inherits its fused ReLU and padding
    semantics.
    """

    def __init__(self, kernels: np.ndarray, bias: np.ndarray, padding: str = "same"):
        super().__init__()
        if kernels.ndim != 3:
            raise ShapeError("kernels must be [ch_out, ch_in, width]")
        self._conv = Conv2d(kernels[:, :, None, :], bias, padding)
        self.params = self._conv.params
        self.grads = self._conv.grads

    @classmethod
    def init(
        cls,
        ch_in: int,
        ch_out: int,
        width: int,
        rng: np.random.Generator,
        padding: str = "same",
    ) -> "Conv1d":
        fan_in = ch_in * width
        bound = np.sqrt(6.0 / (fan_in + ch_out))
        kernels = rng.uniform(-bound, bound, (ch_out, ch_in, width))
        return cls(kernels, np.zeros(ch_out), padding)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 3:
            raise ShapeError("conv1d expects [batch, len, ch_in]")
        # [B, L, C] -> [B, C, 1, L]
        y = self._conv.forward(x.transpose(0, 2, 1)[:, :, None, :], train)
        return y[:, :, 0, :].transpose(0, 2, 1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        g4 = grad.transpose(0, 2, 1)[:, :, None, :]
        dx = self._conv.backward(g4)
        return dx[:, :, 0, :].transpose(0, 2, 1)

    def zero_grad(self) -> None:
        self._conv.zero_grad()


class MaxPool2d(Layer):
    """Non-overlapping window max with ceil semantics at ragged edges.

    Backward routes each window's gradient to the first row-major argmax.
    """

    def __init__(self, pool: tuple[int, int] = (2, 2)):
        super().__init__()
        self.pool = pool
        self._cache: tuple[tuple[int, ...], np.ndarray, tuple[int, int]] | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        ph, pw = self.pool
        if x.ndim != 4 or x.shape[2] < 1 or x.shape[3] < 1:
            raise ShapeError("maxpool2d expects [batch, ch, h, w]")
        b, c, h, w = x.shape
        ho, wo = -(-h // ph), -(-w // pw)
        pad_h, pad_w = ho * ph - h, wo * pw - w
        xp = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), constant_values=-np.inf)
        windows = xp.reshape(b, c, ho, ph, wo, pw).transpose(0, 1, 2, 4, 3, 5)
        flat = windows.reshape(b, c, ho, wo, ph * pw)
        arg = flat.argmax(axis=-1)
        self._cache = (x.shape, arg, (pad_h, pad_w))
        return np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._cache is not None, "backward before forward"
        (b, c, h, w), arg, (pad_h, pad_w) = self._cache
        ph, pw = self.pool
        ho, wo = arg.shape[2], arg.shape[3]
        flat = np.zeros((b, c, ho, wo, ph * pw))
        np.put_along_axis(flat, arg[..., None], grad[..., None], axis=-1)
        windows = flat.reshape(b, c, ho, wo, ph, pw).transpose(0, 1, 2, 4, 3, 5)
        dxp = windows.reshape(b, c, ho * ph, wo * pw)
        return dxp[:, :, :h, :w]


class BatchNorm(Layer):
    """Per-feature standardization with learned scale and shift.

    Train mode standardizes by batch moments and folds them into running
    statistics; infer mode is a frozen affine map using those statistics.
    """

    def __init__(self, features: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.gamma = self._register("gamma", np.ones(features))
        self.beta = self._register("beta", np.zeros(features))
        self.eps = eps
        self.momentum = momentum
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)
        self._cache: tuple[np.ndarray, np.ndarray] | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.gamma.shape[0]:
            raise ShapeError(f"batch_norm expected [batch, {self.gamma.shape[0]}], got {x.shape}")
        if train:
            if x.shape[0] < 2:
                raise ValueError("train-mode batch norm needs batch size >= 2")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        if train:
            self._cache = (xhat, inv_std)
        return self.gamma * xhat + self.beta

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._cache is not None, "backward before train-mode forward"
        xhat, inv_std = self._cache
        n = grad.shape[0]
        self.grads["gamma"] += (grad * xhat).sum(axis=0)
        self.grads["beta"] += grad.sum(axis=0)
        dxhat = grad * self.gamma
        return (
            inv_std
            / n
            * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        )


class Dropout(Layer):
    """Inverted dropout: zero with probability `rate`, scale survivors.

    Identity in infer mode, where it draws no randomness at all.
    """

    def __init__(self, rate: float, rng: np.random.Generator | None = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate {rate} outside [0, 1)")
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) >= self.rate) / keep
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return grad
        return grad * self._mask
