"""Text preparation: tokenization, vocabulary, id encoding, TF-IDF, splits."""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD_ID = 0
UNK_ID = 1
NUM_TOKEN = "<num>"

DEFAULT_HEADLINE_LEN = 20
DEFAULT_BODY_LEN = 200

# Unicode letter runs or digit runs; underscores and punctuation split tokens.
_TOKEN_RE = re.compile(r"[^\W\d_]+|\d+", re.UNICODE)


@dataclass(frozen=True)
class Document:
    article_id: str
    headline: str
    body: str

    @property
    def has_body(self) -> bool:
        return bool(self.body.strip())


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric boundaries, digits -> <num>."""
    tokens = []
    for match in _TOKEN_RE.finditer(text.lower()):
        token = match.group(0)
        tokens.append(NUM_TOKEN if token[0].isdigit() else token)
    return tokens


class Vocabulary:
    """Frozen token -> id map. Id 0 is padding, id 1 is unknown."""

    def __init__(self, token_to_id: dict[str, int]):
        self._token_to_id = dict(token_to_id)
        self._id_to_token = {i: t for t, i in self._token_to_id.items()}
        if len(self._id_to_token) != len(self._token_to_id):
            raise ValueError("token -> id map must be injective")

    @classmethod
    def build(
        cls,
        token_lists: Iterable[Sequence[str]],
        min_count: int = 2,
        max_size: int = 50_000,
    ) -> "Vocabulary":
        counts: Counter[str] = Counter()
        for tokens in token_lists:
            counts.update(tokens)
        eligible = [(t, c) for t, c in counts.items() if c >= min_count]
        eligible.sort(key=lambda item: (-item[1], item[0]))
        mapping: dict[str, int] = {}
        for token, _ in eligible[: max_size - 2]:
            mapping[token] = len(mapping) + 2
        return cls(mapping)

    def __len__(self) -> int:
        return len(self._token_to_id) + 2

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        if token_id == PAD_ID:
            return "<pad>"
        if token_id == UNK_ID:
            return "<unk>"
        return self._id_to_token[token_id]

    def tokens(self) -> list[str]:
        """Real tokens ordered by id."""
        return [self._id_to_token[i] for i in sorted(self._id_to_token)]

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for token in self.tokens():
            digest.update(token.encode("utf-8"))
            digest.update(b"\x00")
        return digest.hexdigest()[:16]

    def to_json(self) -> dict:
        return {"tokens": self.tokens()}

    @classmethod
    def from_json(cls, payload: dict) -> "Vocabulary":
        return cls({t: i + 2 for i, t in enumerate(payload["tokens"])})


def encode(
    tokens: Sequence[str], vocab: Vocabulary, max_len: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-length id sequence plus a 0/1 mask of real positions."""
    ids = np.zeros(max_len, dtype=np.int64)
    mask = np.zeros(max_len, dtype=np.float64)
    for position, token in enumerate(tokens[:max_len]):
        ids[position] = vocab.id_of(token)
        mask[position] = 1.0
    return ids, mask


class TfidfModel:
    """Smoothed idf over a frozen vocabulary.

    idf_w = ln((1 + n) / (1 + df_w)) + 1, so a token present in every
    fitted document has idf exactly 1. Pad and unknown ids carry idf 0 and
    never contribute to a transform.
    """

    def __init__(self, vocab: Vocabulary, idf: np.ndarray, corpus_size: int):
        if idf.shape != (len(vocab),):
            raise ValueError("idf vector length must match vocabulary size")
        self.vocab = vocab
        self.idf = idf
        self.corpus_size = corpus_size


def tfidf_fit(token_lists: Sequence[Sequence[str]], vocab: Vocabulary) -> TfidfModel:
    if not token_lists:
        raise ValueError("cannot fit tf-idf on an empty corpus")
    n = len(token_lists)
    df = np.zeros(len(vocab), dtype=np.float64)
    for tokens in token_lists:
        seen = {vocab.id_of(t) for t in tokens if t in vocab}
        for token_id in seen:
            df[token_id] += 1.0
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    idf[PAD_ID] = 0.0
    idf[UNK_ID] = 0.0
    return TfidfModel(vocab, idf, n)


def tfidf_transform(tokens: Sequence[str], model: TfidfModel) -> np.ndarray:
    """Dense tf-idf vector over the vocabulary, scaled to unit L2 norm.

    A document with no in-vocabulary tokens stays the zero vector.
    """
    vector = np.zeros(len(model.vocab), dtype=np.float64)
    for token, count in Counter(tokens).items():
        token_id = model.vocab.id_of(token)
        if token_id != UNK_ID:
            vector[token_id] = count * model.idf[token_id]
    norm = float(np.linalg.norm(vector))
    if norm > 0.0:
        vector /= norm
    return vector


def tfidf_matrix(token_lists: Sequence[Sequence[str]], model: TfidfModel) -> np.ndarray:
    return np.stack([tfidf_transform(tokens, model) for tokens in token_lists])


@dataclass(frozen=True)
class CorpusSplit:
    train: frozenset[str]
    validation: frozenset[str]
    test: frozenset[str]
    seed: int

    def to_json(self) -> dict:
        return {
            "train": sorted(self.train),
            "validation": sorted(self.validation),
            "test": sorted(self.test),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "CorpusSplit":
        return cls(
            frozenset(payload["train"]),
            frozenset(payload["validation"]),
            frozenset(payload["test"]),
            int(payload["seed"]),
        )


def split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Rounded train/validation sizes; the remainder goes to test."""
    train = round(n * ratios[0])
    validation = round(n * ratios[1])
    return train, validation, n - train - validation


def split_corpus(
    article_ids: Sequence[str],
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> CorpusSplit:
    """Uniform random 70/10/20 partition, deterministic for a fixed seed."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios {ratios} do not sum to 1")
    if len(article_ids) < 10:
        raise ValueError("corpus must hold at least 10 documents to split")
    if len(set(article_ids)) != len(article_ids):
        raise ValueError("duplicate article ids in corpus")
    order = sorted(article_ids)
    rng = np.random.default_rng(seed)
    rng.shuffle(order)
    n_train, n_val, _ = split_sizes(len(order), ratios)
    return CorpusSplit(
        train=frozenset(order[:n_train]),
        validation=frozenset(order[n_train : n_train + n_val]),
        test=frozenset(order[n_train + n_val :]),
        seed=seed,
    )


def read_corpus(path: str | Path) -> list[Document]:
    documents = []
    with Path(path).open("r", encoding="utf-8") as stream:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            documents.append(
                Document(
                    article_id=record["article_id"],
                    headline=record["headline"],
                    body=record.get("body", ""),
                )
            )
    return documents


def write_corpus(documents: Iterable[Document], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as out:
        for doc in documents:
            out.write(
                json.dumps(
                    {"article_id": doc.article_id, "headline": doc.headline, "body": doc.body},
                    ensure_ascii=False,
                )
                + "\n"
            )
