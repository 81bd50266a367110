"""Single-file model checkpoints with bit-exact round trips.

Container layout: 4 magic bytes, a little-endian u32 format version, then
length-prefixed named sections until end of file. Tensor payloads are a
u8 rank, u64 dimensions, and flat 32-bit little-endian values; model
parameters are snapped onto the float32 grid when a ScoringModel is
assembled, so save -> load reproduces scores bit for bit.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autokernel import ShapeError
from .models import (
    Architecture,
    Featurizer,
    FileDocVectorProvider,
    MeanEmbeddingProvider,
    ModelSpec,
    TrainedModel,
    build_model,
    finalize_parameters,
)
from .textprep import TfidfModel, Vocabulary
from .topics import TopicModel

MAGIC = b"HFCK"
VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint persistence failures."""


class CheckpointFormatError(CheckpointError):
    """File is not a checkpoint or its structure is malformed."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version."""


class CheckpointTruncatedError(CheckpointError):
    """File ends in the middle of a declared section."""


class CheckpointShapeError(CheckpointError):
    """Stored tensors do not validate against the architecture."""


@dataclass
class ScoringModel:
    """Everything scoring needs: frozen preprocessing plus a trained net."""

    spec: ModelSpec
    featurizer: Featurizer
    model: Architecture
    fingerprint: str = "unspecified"
    train_seed: int = 0


def _snap32(array: np.ndarray) -> None:
    array[...] = array.astype(np.float32).astype(np.float64)


def build_scoring_model(
    featurizer: Featurizer, trained: TrainedModel, fingerprint: str = "unspecified"
) -> ScoringModel:
    """Bind a featurizer to a trained model and fix serialization precision.

    The idf vector, both topic factors, and any explicit provider table
    are snapped onto the float32 grid here, matching how the checkpoint
    stores them; parameters were already snapped at the end of training.
    """
    _snap32(featurizer.tfidf.idf)
    _snap32(featurizer.headline_topic_model.H)
    _snap32(featurizer.body_topic_model.H)
    provider = featurizer.provider
    if isinstance(provider, MeanEmbeddingProvider) and not provider._seed_rebuildable:
        _snap32(provider.table)
    if isinstance(provider, FileDocVectorProvider):
        for vec in provider.vectors.values():
            _snap32(vec)
    finalize_parameters(trained.model)
    return ScoringModel(
        spec=trained.spec,
        featurizer=featurizer,
        model=trained.model,
        fingerprint=fingerprint,
        train_seed=trained.config.seed,
    )


def _tensor_bytes(array: np.ndarray) -> bytes:
    array = np.asarray(array, dtype=np.float64)
    out = io.BytesIO()
    out.write(struct.pack("<B", array.ndim))
    for dim in array.shape:
        out.write(struct.pack("<Q", dim))
    out.write(array.astype("<f4").tobytes())
    return out.getvalue()


def _tensor_from(payload: bytes, name: str) -> np.ndarray:
    try:
        ndim = struct.unpack_from("<B", payload, 0)[0]
        shape = struct.unpack_from(f"<{ndim}Q", payload, 1)
        offset = 1 + 8 * ndim
        count = int(np.prod(shape)) if ndim else 1
        if len(payload) - offset != 4 * count:
            raise CheckpointTruncatedError(
                f"tensor {name}: payload holds {len(payload) - offset} bytes, "
                f"expected {4 * count}"
            )
        flat = np.frombuffer(payload, dtype="<f4", offset=offset, count=count)
        return flat.astype(np.float64).reshape(shape)
    except struct.error as exc:
        raise CheckpointTruncatedError(f"tensor {name}: header incomplete") from exc


def _write_section(out, name: str, payload: bytes) -> None:
    encoded = name.encode("utf-8")
    out.write(struct.pack("<I", len(encoded)))
    out.write(encoded)
    out.write(struct.pack("<Q", len(payload)))
    out.write(payload)


def _read_exact(stream, count: int, context: str) -> bytes:
    data = stream.read(count)
    if len(data) != count:
        raise CheckpointTruncatedError(f"unexpected end of file while reading {context}")
    return data


def save_checkpoint(scoring: ScoringModel, path: str | Path) -> None:
    """Write a self-contained checkpoint; scoring needs no other files."""
    f = scoring.featurizer
    meta = {
        "spec": scoring.spec.to_json(),
        "corpus_size": f.tfidf.corpus_size,
        "headline_len": f.headline_len,
        "body_len": f.body_len,
        "provider": f.provider.descriptor(),
        "fingerprint": scoring.fingerprint,
        "train_seed": scoring.train_seed,
    }
    with Path(path).open("wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<I", VERSION))
        _write_section(out, "meta", json.dumps(meta, sort_keys=True).encode("utf-8"))
        _write_section(out, "vocab", json.dumps(f.vocab.to_json()).encode("utf-8"))
        _write_section(out, "t:idf", _tensor_bytes(f.tfidf.idf))
        _write_section(out, "t:topics_headline", _tensor_bytes(f.headline_topic_model.H))
        _write_section(out, "t:topics_body", _tensor_bytes(f.body_topic_model.H))
        provider = f.provider
        if isinstance(provider, MeanEmbeddingProvider) and not provider._seed_rebuildable:
            _write_section(out, "t:provider.table", _tensor_bytes(provider.table))
        if isinstance(provider, FileDocVectorProvider):
            keys = sorted(provider.vectors)
            _write_section(out, "provider.keys", json.dumps(keys).encode("utf-8"))
            matrix = np.stack([provider.vectors[k] for k in keys])
            _write_section(out, "t:provider.vectors", _tensor_bytes(matrix))
        for key, tensor in sorted(scoring.model.state_dict().items()):
            _write_section(out, f"t:param:{key}", _tensor_bytes(tensor))


def _read_sections(stream) -> dict[str, bytes]:
    sections: dict[str, bytes] = {}
    while True:
        head = stream.read(4)
        if not head:
            return sections
        if len(head) != 4:
            raise CheckpointTruncatedError("unexpected end of file in section header")
        (name_len,) = struct.unpack("<I", head)
        if name_len == 0 or name_len > 4096:
            raise CheckpointFormatError(f"implausible section name length {name_len}")
        name = _read_exact(stream, name_len, "section name").decode("utf-8", "replace")
        (payload_len,) = struct.unpack(
            "<Q", _read_exact(stream, 8, f"length of section {name}")
        )
        sections[name] = _read_exact(stream, payload_len, f"section {name}")


def _rebuild_provider(meta: dict, sections: dict[str, bytes], vocab: Vocabulary):
    desc = meta["provider"]
    kind = desc.get("kind")
    if kind == "embedding_mean":
        return MeanEmbeddingProvider(vocab, int(desc["dimension"]), int(desc["seed"]))
    if kind == "embedding_mean_table":
        if "t:provider.table" not in sections:
            raise CheckpointFormatError("provider table section missing")
        table = _tensor_from(sections["t:provider.table"], "provider.table")
        return MeanEmbeddingProvider(vocab, int(desc["dimension"]), table=table)
    if kind == "file":
        if "provider.keys" not in sections or "t:provider.vectors" not in sections:
            raise CheckpointFormatError("file provider sections missing")
        keys = json.loads(sections["provider.keys"].decode("utf-8"))
        matrix = _tensor_from(sections["t:provider.vectors"], "provider.vectors")
        if matrix.shape[0] != len(keys):
            raise CheckpointShapeError("provider vector count does not match key count")
        return FileDocVectorProvider(
            {k: matrix[i] for i, k in enumerate(keys)}, int(desc["dimension"])
        )
    raise CheckpointFormatError(f"unknown provider kind {kind!r}")


def load_checkpoint(path: str | Path) -> ScoringModel:
    """Parse, validate, and rebuild a full scoring model from one file."""
    with Path(path).open("rb") as stream:
        magic = stream.read(4)
        if magic != MAGIC:
            raise CheckpointFormatError(f"bad magic bytes {magic!r}")
        raw_version = _read_exact(stream, 4, "format version")
        (version,) = struct.unpack("<I", raw_version)
        if version != VERSION:
            raise CheckpointVersionError(f"format version {version}, supported {VERSION}")
        sections = _read_sections(stream)

    for required in ("meta", "vocab", "t:idf", "t:topics_headline", "t:topics_body"):
        if required not in sections:
            raise CheckpointFormatError(f"missing section {required}")
    try:
        meta = json.loads(sections["meta"].decode("utf-8"))
        vocab = Vocabulary.from_json(json.loads(sections["vocab"].decode("utf-8")))
        spec = ModelSpec.from_json(meta["spec"])
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointFormatError(f"malformed metadata: {exc}") from exc

    if spec.vocab_size != len(vocab):
        raise CheckpointShapeError(
            f"spec vocab size {spec.vocab_size} != stored vocabulary {len(vocab)}"
        )
    idf = _tensor_from(sections["t:idf"], "idf")
    if idf.shape != (len(vocab),):
        raise CheckpointShapeError(f"idf length {idf.shape} does not match vocabulary")
    topics = {}
    for side in ("headline", "body"):
        H = _tensor_from(sections[f"t:topics_{side}"], f"topics_{side}")
        if H.ndim != 2 or H.shape != (spec.topic_dim, len(vocab)):
            raise CheckpointShapeError(
                f"{side} topic factor shape {H.shape}, expected {(spec.topic_dim, len(vocab))}"
            )
        topics[side] = TopicModel(H, vocab, [])

    featurizer = Featurizer(
        vocab=vocab,
        tfidf=TfidfModel(vocab, idf, int(meta["corpus_size"])),
        headline_topic_model=topics["headline"],
        body_topic_model=topics["body"],
        provider=_rebuild_provider(meta, sections, vocab),
        headline_len=int(meta["headline_len"]),
        body_len=int(meta["body_len"]),
    )

    model = build_model(spec)
    state = {}
    for name, payload in sections.items():
        if name.startswith("t:param:"):
            state[name[len("t:param:") :]] = _tensor_from(payload, name)
    try:
        model.load_state_dict(state)
    except ShapeError as exc:
        raise CheckpointShapeError(str(exc)) from exc

    return ScoringModel(
        spec=spec,
        featurizer=featurizer,
        model=model,
        fingerprint=str(meta.get("fingerprint", "unspecified")),
        train_seed=int(meta.get("train_seed", 0)),
    )
