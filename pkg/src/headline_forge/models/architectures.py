"""The proposed multi-branch model and the four baselines.

Every architecture is a fixed computation graph over autokernel layers:
forward(batch) yields a [batch, 4] probability matrix and backward(grad)
accumulates parameter gradients in reverse order through the exact same
graph. Parameter initialization draws from per-component seed streams so
that removing one branch leaves every other branch's parameters (and hence
outputs) bit-identical for the same seed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..autokernel import (
    BatchNorm,
    BidirectionalLast,
    Conv1d,
    Conv2d,
    Dense,
    Dropout,
    Embedding,
    GRUCell,
    Layer,
    LSTMCell,
    MaxPool2d,
    ShapeError,
    relu,
    relu_backward,
    softmax,
    softmax_backward,
)
from .features import EMBED_STREAM, Batch

ARCHITECTURES = (
    "proposed",
    "proposed_no_similarity",
    "tfidf_ffnn",
    "emb_cnn1d_ffnn",
    "emb_bgru_ffnn",
    "emb_blstm_ffnn",
)

# Component seed streams; each component draws from default_rng([seed, tag]).
_SIM_STREAM = 2
_HVEC_STREAM = 3
_BVEC_STREAM = 4
_HEAD_STREAM = 5
_DROPOUT_STREAM = 6
_CNN1D_STREAM = 7
_RNN_STREAM = 8
_TFIDF_STREAM = 9


@dataclass(frozen=True)
class ModelSpec:
    """Architecture id plus every dimension needed to rebuild the graph."""

    architecture: str
    vocab_size: int
    seed: int = 0
    embed_dim: int = 100
    doc_vec_dim: int = 100
    headline_len: int = 20
    body_len: int = 200
    topic_dim: int = 50
    head_sizes: tuple[int, int] = (200, 50)
    dropout_rate: float = 0.2
    conv_filters: tuple[int, int, int] = (8, 16, 32)
    conv_kernels: tuple[int, int, int] = (5, 3, 3)
    cnn1d_filters: tuple[int, int] = (64, 64)
    cnn1d_width: int = 3
    rnn_hidden: int = 64

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must cover pad and unknown ids")
        positive = (
            self.embed_dim,
            self.doc_vec_dim,
            self.headline_len,
            self.body_len,
            self.topic_dim,
            *self.head_sizes,
            *self.conv_filters,
            *self.cnn1d_filters,
            self.cnn1d_width,
            self.rnn_hidden,
        )
        if any(int(v) <= 0 for v in positive):
            raise ValueError("all dimensions must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout rate {self.dropout_rate} outside [0, 1)")
        if any(int(k) % 2 == 0 for k in self.conv_kernels):
            raise ValueError("conv kernels must be odd for same padding")

    def to_json(self) -> dict:
        payload = dataclasses.asdict(self)
        for key, value in payload.items():
            if isinstance(value, tuple):
                payload[key] = list(value)
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "ModelSpec":
        kwargs = dict(payload)
        for key in ("head_sizes", "dropout_rate", "conv_filters", "conv_kernels", "cnn1d_filters"):
            if key in kwargs and isinstance(kwargs[key], list):
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


def _cosine_grid(
    He: np.ndarray, Be: np.ndarray, h_mask: np.ndarray, b_mask: np.ndarray
) -> tuple[np.ndarray, tuple]:
    """Batched cosine-similarity grid with masked and zero-vector cells at 0."""
    dot = He @ Be.transpose(0, 2, 1)
    nh = np.linalg.norm(He, axis=2)
    nb = np.linalg.norm(Be, axis=2)
    denom = nh[:, :, None] * nb[:, None, :]
    valid = (h_mask[:, :, None] > 0) & (b_mask[:, None, :] > 0) & (denom > 0)
    S = np.where(valid, np.divide(dot, denom, out=np.zeros_like(dot), where=valid), 0.0)
    return S, (He, Be, nh, nb, S, valid, denom)


def _cosine_grid_backward(grad: np.ndarray, cache: tuple) -> tuple[np.ndarray, np.ndarray]:
    He, Be, nh, nb, S, valid, denom = cache
    G = np.where(valid, grad, 0.0)
    scaled = np.divide(G, denom, out=np.zeros_like(G), where=valid)
    GS = G * S
    inv_nh2 = np.divide(1.0, nh * nh, out=np.zeros_like(nh), where=nh > 0)
    inv_nb2 = np.divide(1.0, nb * nb, out=np.zeros_like(nb), where=nb > 0)
    dHe = scaled @ Be
    dHe -= He * (GS.sum(axis=2) * inv_nh2)[:, :, None]
    dBe = scaled.transpose(0, 2, 1) @ He
    dBe -= Be * (GS.sum(axis=1) * inv_nb2)[:, :, None]
    return dHe, dBe


def similarity_matrix(
    h_emb: np.ndarray,
    a_emb: np.ndarray,
    h_mask: np.ndarray,
    a_mask: np.ndarray,
) -> np.ndarray:
    """Cosine grid between one headline's and one body's token embeddings.

    Returns a single-channel [1, headline_len, body_len] image; masked
    positions and zero vectors produce 0 entries, everything else lies in
    [-1, 1].
    """
    if h_emb.ndim != 2 or a_emb.ndim != 2:
        raise ShapeError("similarity_matrix expects unbatched [len, dim] embeddings")
    S, _ = _cosine_grid(h_emb[None], a_emb[None], h_mask[None], a_mask[None])
    return S


class Architecture:
    """Shared plumbing: layer registry, gradients, and state (de)serialization."""

    arch_id: str = ""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self._layers: dict[str, Layer] = {}

    def _add(self, name: str, layer: Layer) -> Layer:
        self._layers[name] = layer
        return layer

    def forward(self, batch: Batch, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_probs: np.ndarray) -> None:
        raise NotImplementedError

    def zero_grad(self) -> None:
        for layer in self._layers.values():
            layer.zero_grad()

    def parameter_pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        pairs: list[tuple[np.ndarray, np.ndarray]] = []
        seen: set[int] = set()
        for name in self._layers:
            for param, grad in self._layers[name].parameter_list():
                if id(param) not in seen:
                    seen.add(id(param))
                    pairs.append((param, grad))
        return pairs

    def state_dict(self) -> dict[str, np.ndarray]:
        state: dict[str, np.ndarray] = {}
        for name, layer in self._layers.items():
            for pname in sorted(layer.params):
                state[f"{name}.{pname}"] = layer.params[pname]
            if isinstance(layer, BatchNorm):
                state[f"{name}.running_mean"] = layer.running_mean
                state[f"{name}.running_var"] = layer.running_var
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        expected = self.state_dict()
        missing = sorted(set(expected) - set(state))
        extra = sorted(set(state) - set(expected))
        if missing or extra:
            raise ShapeError(f"state mismatch: missing {missing}, unexpected {extra}")
        for key, target in expected.items():
            value = np.asarray(state[key], dtype=np.float64)
            if value.shape != target.shape:
                raise ShapeError(
                    f"tensor {key} has shape {value.shape}, expected {target.shape}"
                )
            target[...] = value

    def predict(self, batch: Batch) -> np.ndarray:
        return self.forward(batch, train=False)


class ProposedModel(Architecture):
    """Fusion of similarity, headline/body doc-vector, and topic branches.

    The no-similarity variant drops the embedding table, the cosine grid,
    and the conv stack; the head then reads a 300-wide concatenation. All
    remaining components draw their parameters from the same seed streams
    in both variants.
    """

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self.arch_id = spec.architecture
        self.with_similarity = spec.architecture == "proposed"
        seed = spec.seed

        if self.with_similarity:
            self.embedding = self._add(
                "embedding",
                Embedding.init(spec.vocab_size, spec.embed_dim, _stream(seed, EMBED_STREAM)),
            )
            sim_rng = _stream(seed, _SIM_STREAM)
            f1, f2, f3 = spec.conv_filters
            k1, k2, k3 = spec.conv_kernels
            self.conv1 = self._add("conv1", Conv2d.init(1, f1, k1, k1, sim_rng))
            self.conv2 = self._add("conv2", Conv2d.init(f1, f2, k2, k2, sim_rng))
            self.conv3 = self._add("conv3", Conv2d.init(f2, f3, k3, k3, sim_rng))
            self.pool1 = MaxPool2d((2, 2))
            self.pool2 = MaxPool2d((2, 2))
            self.pool3 = MaxPool2d((2, 2))
            h, w = spec.headline_len, spec.body_len
            for _ in range(3):
                h, w = -(-h // 2), -(-w // 2)
            self.flat_dim = f3 * h * w
            self.sim_dense = self._add("sim_dense", Dense.init(self.flat_dim, 100, sim_rng))
            self.sim_dropout = Dropout(spec.dropout_rate, _stream(seed, _DROPOUT_STREAM))

        self.hvec_dense = self._add(
            "hvec_dense", Dense.init(spec.doc_vec_dim, 100, _stream(seed, _HVEC_STREAM))
        )
        self.bvec_dense = self._add(
            "bvec_dense", Dense.init(spec.doc_vec_dim, 100, _stream(seed, _BVEC_STREAM))
        )

        head_in = 200 + 2 * spec.topic_dim + (100 if self.with_similarity else 0)
        self.head_in = head_in
        h1, h2 = spec.head_sizes
        head_rng = _stream(seed, _HEAD_STREAM)
        self.dense1 = self._add("dense1", Dense.init(head_in, h1, head_rng))
        self.bn1 = self._add("bn1", BatchNorm(h1))
        self.dense2 = self._add("dense2", Dense.init(h1, h2, head_rng))
        self.bn2 = self._add("bn2", BatchNorm(h2))
        self.dense3 = self._add("dense3", Dense.init(h2, 4, head_rng))
        self._cache: dict | None = None

    def similarity_features(self, batch: Batch, train: bool = False) -> np.ndarray:
        """Similarity branch output [batch, 100]; caches for backward."""
        spec = self.spec
        ids = np.concatenate([batch.headline_ids, batch.body_ids], axis=1)
        E = self.embedding.forward(ids, train)
        He, Be = E[:, : spec.headline_len], E[:, spec.headline_len :]
        S, sim_cache = _cosine_grid(He, Be, batch.headline_mask, batch.body_mask)
        p1 = self.pool1.forward(self.conv1.forward(S[:, None, :, :], train))
        p2 = self.pool2.forward(self.conv2.forward(p1, train))
        p3 = self.pool3.forward(self.conv3.forward(p2, train))
        flat = p3.reshape(len(batch), -1)
        dropped = self.sim_dropout.forward(flat, train)
        z_sim = self.sim_dense.forward(dropped, train)
        self._sim_cache = (sim_cache, p3.shape, z_sim)
        return relu(z_sim)

    def _similarity_backward(self, grad: np.ndarray) -> None:
        sim_cache, p3_shape, z_sim = self._sim_cache
        g = self.sim_dense.backward(relu_backward(grad, z_sim))
        g = self.sim_dropout.backward(g)
        g = self.pool3.backward(g.reshape(p3_shape))
        g = self.conv3.backward(g)
        g = self.pool2.backward(g)
        g = self.conv2.backward(g)
        g = self.pool1.backward(g)
        g = self.conv1.backward(g)
        dHe, dBe = _cosine_grid_backward(g[:, 0, :, :], sim_cache)
        self.embedding.backward(np.concatenate([dHe, dBe], axis=1))

    def branch_outputs(self, batch: Batch, train: bool = False) -> dict[str, np.ndarray]:
        """Every branch's activation, keyed by branch name."""
        out: dict[str, np.ndarray] = {}
        if self.with_similarity:
            out["similarity"] = self.similarity_features(batch, train)
        z_hv = self.hvec_dense.forward(batch.headline_vec, train)
        z_bv = self.bvec_dense.forward(batch.body_vec, train)
        out["headline_vec"] = relu(z_hv)
        out["body_vec"] = relu(z_bv)
        out["headline_topics"] = batch.headline_topics
        out["body_topics"] = batch.body_topics
        self._vec_cache = (z_hv, z_bv)
        return out

    def forward(self, batch: Batch, train: bool = False) -> np.ndarray:
        branches = self.branch_outputs(batch, train)
        order = (
            ["similarity"] if self.with_similarity else []
        ) + ["headline_vec", "body_vec", "headline_topics", "body_topics"]
        x = np.concatenate([branches[name] for name in order], axis=1)
        if x.shape[1] != self.head_in:
            raise ShapeError(f"head expected {self.head_in} features, got {x.shape[1]}")
        b1 = self.bn1.forward(self.dense1.forward(x, train), train)
        r1 = relu(b1)
        b2 = self.bn2.forward(self.dense2.forward(r1, train), train)
        r2 = relu(b2)
        probs = softmax(self.dense3.forward(r2, train))
        self._cache = {"b1": b1, "b2": b2, "probs": probs}
        return probs

    def backward(self, grad_probs: np.ndarray) -> None:
        assert self._cache is not None, "backward before forward"
        c = self._cache
        g = softmax_backward(grad_probs, c["probs"])
        g = self.dense3.backward(g)
        g = self.bn2.backward(relu_backward(g, c["b2"]))
        g = self.dense2.backward(g)
        g = self.bn1.backward(relu_backward(g, c["b1"]))
        g = self.dense1.backward(g)

        offset = 0
        if self.with_similarity:
            self._similarity_backward(g[:, offset : offset + 100])
            offset += 100
        z_hv, z_bv = self._vec_cache
        self.hvec_dense.backward(relu_backward(g[:, offset : offset + 100], z_hv))
        self.bvec_dense.backward(relu_backward(g[:, offset + 100 : offset + 200], z_bv))
        # Remaining columns belong to the static topic inputs.


class TfidfFFNN(Architecture):
    """Document tf-idf vector through a two-hidden-layer ReLU network."""

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self.arch_id = spec.architecture
        h1, h2 = spec.head_sizes
        rng = _stream(spec.seed, _TFIDF_STREAM)
        self.dense1 = self._add("dense1", Dense.init(spec.vocab_size, h1, rng))
        self.dense2 = self._add("dense2", Dense.init(h1, h2, rng))
        self.dense3 = self._add("dense3", Dense.init(h2, 4, rng))
        self._cache: dict | None = None

    def forward(self, batch: Batch, train: bool = False) -> np.ndarray:
        z1 = self.dense1.forward(batch.tfidf, train)
        z2 = self.dense2.forward(relu(z1), train)
        probs = softmax(self.dense3.forward(relu(z2), train))
        self._cache = {"z1": z1, "z2": z2, "probs": probs}
        return probs

    def backward(self, grad_probs: np.ndarray) -> None:
        assert self._cache is not None, "backward before forward"
        c = self._cache
        g = softmax_backward(grad_probs, c["probs"])
        g = relu_backward(self.dense3.backward(g), c["z2"])
        g = relu_backward(self.dense2.backward(g), c["z1"])
        self.dense1.backward(g)


class EmbCnn1dFFNN(Architecture):
    """Token embeddings through two 1-d conv layers and a global max pool."""

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self.arch_id = spec.architecture
        self.embedding = self._add(
            "embedding",
            Embedding.init(spec.vocab_size, spec.embed_dim, _stream(spec.seed, EMBED_STREAM)),
        )
        rng = _stream(spec.seed, _CNN1D_STREAM)
        f1, f2 = spec.cnn1d_filters
        self.conv1 = self._add("conv1", Conv1d.init(spec.embed_dim, f1, spec.cnn1d_width, rng))
        self.conv2 = self._add("conv2", Conv1d.init(f1, f2, spec.cnn1d_width, rng))
        self.dense = self._add("dense", Dense.init(f2, 4, rng))
        self.dropout = Dropout(spec.dropout_rate, _stream(spec.seed, _DROPOUT_STREAM))
        self._cache: dict | None = None

    def forward(self, batch: Batch, train: bool = False) -> np.ndarray:
        E = self.embedding.forward(batch.stream_ids, train)
        d = self.dropout.forward(E, train)
        c1 = self.conv1.forward(d, train)
        c2 = self.conv2.forward(c1, train)
        arg = c2.argmax(axis=1)
        pooled = np.take_along_axis(c2, arg[:, None, :], axis=1)[:, 0, :]
        probs = softmax(self.dense.forward(pooled, train))
        self._cache = {"c2_shape": c2.shape, "arg": arg, "probs": probs}
        return probs

    def backward(self, grad_probs: np.ndarray) -> None:
        assert self._cache is not None, "backward before forward"
        c = self._cache
        g = softmax_backward(grad_probs, c["probs"])
        g = self.dense.backward(g)
        gc2 = np.zeros(c["c2_shape"])
        np.put_along_axis(gc2, c["arg"][:, None, :], g[:, None, :], axis=1)
        g = self.conv2.backward(gc2)
        g = self.conv1.backward(g)
        self.embedding.backward(self.dropout.backward(g))


class EmbBiRnn(Architecture):
    """Token embeddings through a bidirectional recurrent last-state encoder."""

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self.arch_id = spec.architecture
        cell_cls = GRUCell if spec.architecture == "emb_bgru_ffnn" else LSTMCell
        self.embedding = self._add(
            "embedding",
            Embedding.init(spec.vocab_size, spec.embed_dim, _stream(spec.seed, EMBED_STREAM)),
        )
        rng = _stream(spec.seed, _RNN_STREAM)
        self.birnn = self._add(
            "birnn",
            BidirectionalLast(
                cell_cls.init(spec.embed_dim, spec.rnn_hidden, rng),
                cell_cls.init(spec.embed_dim, spec.rnn_hidden, rng),
            ),
        )
        self.dense = self._add("dense", Dense.init(2 * spec.rnn_hidden, 4, rng))
        self._cache: np.ndarray | None = None

    def forward(self, batch: Batch, train: bool = False) -> np.ndarray:
        E = self.embedding.forward(batch.stream_ids, train)
        h = self.birnn.forward(E, batch.stream_mask, train)
        probs = softmax(self.dense.forward(h, train))
        self._cache = probs
        return probs

    def backward(self, grad_probs: np.ndarray) -> None:
        assert self._cache is not None, "backward before forward"
        g = softmax_backward(grad_probs, self._cache)
        g = self.dense.backward(g)
        self.embedding.backward(self.birnn.backward(g))


def build_model(
    spec: ModelSpec,
    word_vectors: dict[str, np.ndarray] | None = None,
    vocab=None,
) -> Architecture:
    """Instantiate the architecture named by ``spec.architecture``.

    Optional pretrained word vectors overwrite matching rows of the
    trainable embedding table; this needs the vocabulary to resolve token
    ids and leaves the frozen pad row untouched.
    """
    if spec.architecture in ("proposed", "proposed_no_similarity"):
        model: Architecture = ProposedModel(spec)
    elif spec.architecture == "tfidf_ffnn":
        model = TfidfFFNN(spec)
    elif spec.architecture == "emb_cnn1d_ffnn":
        model = EmbCnn1dFFNN(spec)
    else:
        model = EmbBiRnn(spec)

    if word_vectors:
        table = getattr(model, "embedding", None)
        if table is None:
            raise ValueError(f"{spec.architecture} has no embedding table to initialize")
        if vocab is None:
            raise ValueError("word-vector initialization needs the vocabulary")
        for token, vec in word_vectors.items():
            if token in vocab and vec.shape == (spec.embed_dim,):
                table.params["table"][vocab.id_of(token)] = vec
    return model
