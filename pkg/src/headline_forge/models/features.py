"""Model inputs and the featurization pipeline that produces them.

A Featurizer owns everything fitted on the training corpus: vocabulary,
tf-idf, the two topic models, and a document-vector provider. It turns a
(headline, body) pair into the fixed-dimension ModelInput consumed by
every architecture. Fitted state is immutable, so featurization can run
concurrently and is byte-reproducible from a checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from ..textprep import (
    DEFAULT_BODY_LEN,
    DEFAULT_HEADLINE_LEN,
    Document,
    TfidfModel,
    Vocabulary,
    encode,
    tfidf_fit,
    tfidf_matrix,
    tfidf_transform,
    tokenize,
)
from ..topics import TopicModel, nnmf_fit, nnmf_transform

DOC_VEC_DIM = 100
TOPIC_DIM = 50

# Seed-stream tag of the trainable embedding table. The default provider
# draws from the same stream so, for equal seeds, its table is bit-identical
# to the table the full model starts training from.
EMBED_STREAM = 1


class DocVectorProvider(Protocol):
    """Deterministic source of fixed-length document vectors."""

    dimension: int

    def vector(self, article_id: str | None, text: str) -> np.ndarray: ...

    def descriptor(self) -> dict: ...


class MeanEmbeddingProvider:
    """Masked mean of a frozen seeded word-embedding table.

    Stands in for the external pretrained encoder: always available, needs
    only the vocabulary, and rebuilds bit-identically from (vocab, seed).
    Unknown and pad tokens are excluded from the mean; a text with no
    in-vocabulary tokens maps to the zero vector.
    """

    kind = "embedding_mean"

    def __init__(
        self,
        vocab: Vocabulary,
        dimension: int = DOC_VEC_DIM,
        seed: int = 0,
        word_vectors: dict[str, np.ndarray] | None = None,
        table: np.ndarray | None = None,
    ):
        self.vocab = vocab
        self.dimension = dimension
        self.seed = seed
        if table is not None:
            if table.shape != (len(vocab), dimension):
                raise ValueError(f"provider table shape {table.shape} does not match vocabulary")
            self.table = np.asarray(table, dtype=np.float64).copy()
            self._seed_rebuildable = False
        else:
            rng = np.random.default_rng([seed, EMBED_STREAM])
            self.table = rng.uniform(-0.05, 0.05, (len(vocab), dimension))
            self._seed_rebuildable = not word_vectors
            if word_vectors:
                for token, vec in word_vectors.items():
                    if token in vocab and vec.shape == (dimension,):
                        self.table[vocab.id_of(token)] = vec
        self.table[0] = 0.0

    def vector(self, article_id: str | None, text: str) -> np.ndarray:
        ids = [self.vocab.id_of(t) for t in tokenize(text)]
        real = [i for i in ids if i >= 2]
        if not real:
            return np.zeros(self.dimension)
        return self.table[real].mean(axis=0)

    def descriptor(self) -> dict:
        """Reconstruction recipe; a non-seed table must ride in the checkpoint."""
        if self._seed_rebuildable:
            return {"kind": self.kind, "dimension": self.dimension, "seed": self.seed}
        return {"kind": "embedding_mean_table", "dimension": self.dimension}


class FileDocVectorProvider:
    """Precomputed external-encoder vectors keyed by article id or exact text.

    A lookup miss yields the zero vector so scoring unseen candidates stays
    deterministic even when the encoder's vectors are unavailable.
    """

    kind = "file"

    def __init__(self, vectors: dict[str, np.ndarray], dimension: int):
        for key, vec in vectors.items():
            if vec.shape != (dimension,):
                raise ValueError(f"vector for {key!r} has dimension {vec.shape}, expected {dimension}")
        self.vectors = vectors
        self.dimension = dimension

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "FileDocVectorProvider":
        import json

        vectors: dict[str, np.ndarray] = {}
        dimension = None
        with Path(path).open("r", encoding="utf-8") as stream:
            for line in stream:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                vec = np.asarray(record["vector"], dtype=np.float64)
                if dimension is None:
                    dimension = vec.shape[0]
                vectors[record["key"]] = vec
        if dimension is None:
            raise ValueError(f"no vectors found in {path}")
        return cls(vectors, dimension)

    def vector(self, article_id: str | None, text: str) -> np.ndarray:
        if article_id is not None and article_id in self.vectors:
            return self.vectors[article_id]
        if text in self.vectors:
            return self.vectors[text]
        return np.zeros(self.dimension)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension, "keys": len(self.vectors)}


@dataclass
class ModelInput:
    """All branch inputs for one (headline, body) pair."""

    headline_ids: np.ndarray
    headline_mask: np.ndarray
    body_ids: np.ndarray
    body_mask: np.ndarray
    stream_ids: np.ndarray
    stream_mask: np.ndarray
    headline_vec: np.ndarray
    body_vec: np.ndarray
    headline_topics: np.ndarray
    body_topics: np.ndarray
    tfidf: np.ndarray


@dataclass
class Batch:
    """Stacked ModelInputs; one array per field, batch first."""

    headline_ids: np.ndarray
    headline_mask: np.ndarray
    body_ids: np.ndarray
    body_mask: np.ndarray
    stream_ids: np.ndarray
    stream_mask: np.ndarray
    headline_vec: np.ndarray
    body_vec: np.ndarray
    headline_topics: np.ndarray
    body_topics: np.ndarray
    tfidf: np.ndarray

    def __len__(self) -> int:
        return self.headline_ids.shape[0]

    def take(self, indices: np.ndarray) -> "Batch":
        return Batch(**{name: getattr(self, name)[indices] for name in _BATCH_FIELDS})


_BATCH_FIELDS = (
    "headline_ids",
    "headline_mask",
    "body_ids",
    "body_mask",
    "stream_ids",
    "stream_mask",
    "headline_vec",
    "body_vec",
    "headline_topics",
    "body_topics",
    "tfidf",
)


def stack_inputs(inputs: Sequence[ModelInput]) -> Batch:
    if not inputs:
        raise ValueError("cannot stack an empty input list")
    return Batch(
        **{name: np.stack([getattr(x, name) for x in inputs]) for name in _BATCH_FIELDS}
    )


@dataclass
class BodyFeatures:
    """Body-side features shared by all candidate headlines of one article."""

    body_ids: np.ndarray
    body_mask: np.ndarray
    body_tokens: list[str]
    body_vec: np.ndarray
    body_topics: np.ndarray
    body_tfidf: np.ndarray


class Featurizer:
    """Frozen preprocessing pipeline shared by training and serving."""

    def __init__(
        self,
        vocab: Vocabulary,
        tfidf: TfidfModel,
        headline_topic_model: TopicModel,
        body_topic_model: TopicModel,
        provider: DocVectorProvider,
        headline_len: int = DEFAULT_HEADLINE_LEN,
        body_len: int = DEFAULT_BODY_LEN,
    ):
        self.vocab = vocab
        self.tfidf = tfidf
        self.headline_topic_model = headline_topic_model
        self.body_topic_model = body_topic_model
        self.provider = provider
        self.headline_len = headline_len
        self.body_len = body_len

    @classmethod
    def fit(
        cls,
        documents: Sequence[Document],
        provider: DocVectorProvider | None = None,
        topic_count: int = TOPIC_DIM,
        nnmf_iters: int = 200,
        min_count: int = 2,
        max_vocab: int = 50_000,
        seed: int = 0,
        headline_len: int = DEFAULT_HEADLINE_LEN,
        body_len: int = DEFAULT_BODY_LEN,
        word_vectors: dict[str, np.ndarray] | None = None,
    ) -> "Featurizer":
        """Fit vocabulary, tf-idf, and both topic models on one corpus.

        Call on the training split only; validation/test documents go
        through the frozen transforms.
        """
        if not documents:
            raise ValueError("cannot fit a featurizer on an empty corpus")
        headline_tokens = [tokenize(d.headline) for d in documents]
        body_tokens = [tokenize(d.body) for d in documents]
        all_tokens = [h + b for h, b in zip(headline_tokens, body_tokens)]
        vocab = Vocabulary.build(all_tokens, min_count=min_count, max_size=max_vocab)
        tfidf = tfidf_fit(all_tokens, vocab)
        _, headline_topic_model = nnmf_fit(
            tfidf_matrix(headline_tokens, tfidf), t=topic_count, iters=nnmf_iters,
            seed=seed, vocab=vocab,
        )
        _, body_topic_model = nnmf_fit(
            tfidf_matrix(body_tokens, tfidf), t=topic_count, iters=nnmf_iters,
            seed=seed + 1, vocab=vocab,
        )
        if provider is None:
            provider = MeanEmbeddingProvider(vocab, DOC_VEC_DIM, seed, word_vectors)
        return cls(vocab, tfidf, headline_topic_model, body_topic_model, provider,
                   headline_len, body_len)

    def body_features(self, body: str, article_id: str | None = None) -> BodyFeatures:
        tokens = tokenize(body)
        ids, mask = encode(tokens, self.vocab, self.body_len)
        body_tfidf = tfidf_transform(tokens, self.tfidf)
        return BodyFeatures(
            body_ids=ids,
            body_mask=mask,
            body_tokens=tokens,
            body_vec=self.provider.vector(article_id, body),
            body_topics=nnmf_transform(body_tfidf, self.body_topic_model),
            body_tfidf=body_tfidf,
        )

    def featurize_candidate(
        self,
        headline: str,
        body_feats: BodyFeatures,
        article_id: str | None = None,
    ) -> ModelInput:
        """Features for one candidate headline over precomputed body features."""
        tokens = tokenize(headline)
        h_ids, h_mask = encode(tokens, self.vocab, self.headline_len)
        headline_tfidf = tfidf_transform(tokens, self.tfidf)
        stream_tokens = tokens + body_feats.body_tokens
        stream_ids, stream_mask = encode(
            stream_tokens, self.vocab, self.headline_len + self.body_len
        )
        doc_tfidf = headline_tfidf + body_feats.body_tfidf
        norm = float(np.linalg.norm(doc_tfidf))
        if norm > 0:
            doc_tfidf = doc_tfidf / norm
        return ModelInput(
            headline_ids=h_ids,
            headline_mask=h_mask,
            body_ids=body_feats.body_ids,
            body_mask=body_feats.body_mask,
            stream_ids=stream_ids,
            stream_mask=stream_mask,
            headline_vec=self.provider.vector(article_id, headline),
            body_vec=body_feats.body_vec,
            headline_topics=nnmf_transform(headline_tfidf, self.headline_topic_model),
            body_topics=body_feats.body_topics,
            tfidf=doc_tfidf,
        )

    def featurize(self, doc: Document) -> ModelInput:
        return self.featurize_candidate(
            doc.headline, self.body_features(doc.body, doc.article_id), doc.article_id
        )

    def featurize_corpus(self, documents: Sequence[Document]) -> list[ModelInput]:
        return [self.featurize(doc) for doc in documents]


def load_word_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Plain-text token -> vector file: one token and its floats per line."""
    vectors: dict[str, np.ndarray] = {}
    with Path(path).open("r", encoding="utf-8") as stream:
        for line in stream:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            vectors[parts[0]] = np.asarray([float(v) for v in parts[1:]], dtype=np.float64)
    return vectors
