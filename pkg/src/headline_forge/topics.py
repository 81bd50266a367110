"""Nonnegative matrix factorization of TF-IDF matrices.

Factorizes A (documents x vocabulary) into W (documents x topics) and
H (topics x vocabulary) with everything elementwise nonnegative, using the
classical multiplicative update rules for the Frobenius objective. Those
updates never increase ||A - WH||_F, which the fit verifies by recording
the loss after every iteration. Headlines and bodies get separate models.
"""

from __future__ import annotations

import numpy as np

from .textprep import Vocabulary

DEFAULT_TOPICS = 50
DEFAULT_ITERS = 200
REL_LOSS_TOL = 1e-5

# Guard against exact-zero denominators in the multiplicative updates.
_DENOM_FLOOR = 1e-12


class TopicModel:
    """Frozen topic->word factor H plus fit metadata."""

    def __init__(
        self,
        H: np.ndarray,
        vocab: Vocabulary | None,
        loss_history: list[float],
    ):
        if np.any(H < 0):
            raise ValueError("topic factor H must be nonnegative")
        self.H = H
        self.t = H.shape[0]
        self.vocab = vocab
        self.loss_history = loss_history

    def top_words(self, k: int = 10) -> list[list[str]]:
        if self.vocab is None:
            raise ValueError("topic model has no vocabulary attached")
        words = []
        for row in self.H:
            top = np.argsort(row)[::-1][:k]
            words.append([self.vocab.token_of(int(i)) for i in top if row[i] > 0])
        return words


def _frobenius_loss(A: np.ndarray, W: np.ndarray, H: np.ndarray) -> float:
    return float(np.linalg.norm(A - W @ H))


def nnmf_fit(
    A: np.ndarray,
    t: int = DEFAULT_TOPICS,
    iters: int = DEFAULT_ITERS,
    seed: int = 0,
    vocab: Vocabulary | None = None,
) -> tuple[np.ndarray, TopicModel]:
    """Fit A ~ W H with multiplicative updates; returns (W, model holding H).

    Initialization draws uniform (0, 1] entries scaled by mean(A)/t so the
    initial product is on the data's scale; a fixed seed makes the whole
    fit bit-reproducible. Stops early once the relative loss change drops
    below REL_LOSS_TOL.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    if np.any(A < 0):
        raise ValueError("A must be elementwise nonnegative")
    if t < 1 or iters < 1:
        raise ValueError("t and iters must be positive")

    n, v = A.shape
    rng = np.random.default_rng(seed)
    scale = max(float(A.mean()), _DENOM_FLOOR) / t
    # 1 - uniform[0,1) keeps entries strictly positive.
    W = (1.0 - rng.random((n, t))) * scale
    H = (1.0 - rng.random((t, v))) * scale

    history = [_frobenius_loss(A, W, H)]
    for _ in range(iters):
        H *= (W.T @ A) / np.maximum(W.T @ W @ H, _DENOM_FLOOR)
        W *= (A @ H.T) / np.maximum(W @ (H @ H.T), _DENOM_FLOOR)
        loss = _frobenius_loss(A, W, H)
        history.append(loss)
        if history[-2] > 0 and abs(history[-2] - loss) / history[-2] < REL_LOSS_TOL:
            break

    return W, TopicModel(H, vocab, history)


def nnmf_transform(
    x: np.ndarray, model: TopicModel, iters: int = 100, seed: int = 0
) -> np.ndarray:
    """Project a nonnegative vector onto the frozen topic factor.

    Minimizes ||x - w H||_2 over w >= 0 with H held fixed, using the same
    multiplicative update restricted to w. A zero input maps to the zero
    topic vector.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.H.shape[1],):
        raise ValueError(
            f"input dimension {x.shape} does not match vocabulary size {model.H.shape[1]}"
        )
    if np.any(x < 0):
        raise ValueError("input must be nonnegative")
    if not np.any(x > 0):
        return np.zeros(model.t)

    H = model.H
    rng = np.random.default_rng(seed)
    scale = max(float(x.mean()), _DENOM_FLOOR) / model.t
    w = (1.0 - rng.random(model.t)) * scale
    HHt = H @ H.T
    xHt = x @ H.T
    for _ in range(iters):
        w *= xHt / np.maximum(w @ HHt, _DENOM_FLOOR)
    return w


def transform_matrix(
    X: np.ndarray, model: TopicModel, iters: int = 100, seed: int = 0
) -> np.ndarray:
    """Row-wise nnmf_transform over a matrix of documents."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.H.shape[1]:
        raise ValueError("X must be documents x vocabulary")
    return np.stack([nnmf_transform(row, model, iters=iters, seed=seed) for row in X])
