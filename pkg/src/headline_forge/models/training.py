"""Mini-batch Adam training with early stopping on validation loss."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autokernel import (
    Adam,
    cross_entropy,
    cross_entropy_backward,
    mse,
    mse_backward,
)
from ..labeler import LabeledExample
from .architectures import Architecture, ModelSpec, build_model
from .features import Batch, ModelInput, stack_inputs

LOSS_KINDS = ("mse_soft", "ce_hard")

# Seed-stream tag for batch shuffling, disjoint from model parameter streams.
_SHUFFLE_STREAM = 11
_SPLIT_STREAM = 12


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "mse_soft"
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    patience: int | None = 5
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be None or at least 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None


@dataclass
class TrainedModel:
    """A frozen architecture plus the record of how it got its parameters."""

    spec: ModelSpec
    model: Architecture
    config: TrainConfig
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None

    def predict(self, inputs: Sequence[ModelInput] | Batch) -> np.ndarray:
        batch = inputs if isinstance(inputs, Batch) else stack_inputs(list(inputs))
        return self.model.forward(batch, train=False)


def _targets(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    soft = np.array([ex.target.p for ex in examples], dtype=np.float64)
    hard = np.array([ex.hard_label for ex in examples], dtype=np.int64)
    return soft, hard


def _batch_loss(
    model: Architecture,
    batch: Batch,
    soft: np.ndarray,
    hard: np.ndarray,
    loss_kind: str,
    train: bool,
) -> tuple[float, np.ndarray | None]:
    probs = model.forward(batch, train=train)
    if loss_kind == "mse_soft":
        return mse(probs, soft), mse_backward(probs, soft) if train else None
    return cross_entropy(probs, hard), cross_entropy_backward(probs, hard) if train else None


def evaluate_loss(
    model: Architecture,
    dataset: Sequence[tuple[ModelInput, LabeledExample]],
    loss_kind: str,
    chunk: int = 256,
) -> float:
    """Infer-mode loss averaged over every sample."""
    if not dataset:
        raise ValueError("cannot evaluate on an empty dataset")
    total = 0.0
    for start in range(0, len(dataset), chunk):
        part = dataset[start : start + chunk]
        batch = stack_inputs([inp for inp, _ in part])
        soft, hard = _targets([ex for _, ex in part])
        loss, _ = _batch_loss(model, batch, soft, hard, loss_kind, train=False)
        total += loss * len(part)
    return total / len(dataset)


def _carve_validation(
    dataset: list[tuple[ModelInput, LabeledExample]],
    fraction: float,
    seed: int,
) -> tuple[list, list]:
    if len(dataset) < 2:
        raise ValueError("need at least two samples to carve a validation subset")
    rng = np.random.default_rng([seed, _SPLIT_STREAM])
    order = rng.permutation(len(dataset))
    n_val = max(1, round(fraction * len(dataset)))
    if n_val >= len(dataset):
        n_val = len(dataset) - 1
    val_idx = set(order[:n_val].tolist())
    train_part = [dataset[i] for i in range(len(dataset)) if i not in val_idx]
    val_part = [dataset[i] for i in sorted(val_idx)]
    return train_part, val_part


def finalize_parameters(model: Architecture) -> None:
    """Snap parameters and running statistics onto the float32 grid.

    Checkpoints store tensors as 32-bit floats; snapping here makes a
    save/load round trip reproduce the in-memory model bit for bit.
    """
    for array in model.state_dict().values():
        array[...] = array.astype(np.float32).astype(np.float64)


def train(
    spec: ModelSpec,
    dataset: Sequence[tuple[ModelInput, LabeledExample]],
    config: TrainConfig,
    validation: Sequence[tuple[ModelInput, LabeledExample]] | None = None,
    word_vectors: dict[str, np.ndarray] | None = None,
    vocab=None,
) -> TrainedModel:
    """Train the architecture described by `spec` on labeled inputs.

    When `validation` is omitted and early stopping is active, a fraction
    of `dataset` is carved off deterministically. Early stopping restores
    the parameters of the best validation epoch. With `patience=None` the
    model trains for the full epoch budget on all of `dataset` and no
    validation subset is required. Training is bit-deterministic for a
    fixed (spec, config, data) triple; remainder mini-batches of a single
    sample are dropped so batch statistics stay defined.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("training dataset is empty")

    if validation is not None:
        train_part, val_part = dataset, list(validation)
        if config.patience is not None and not val_part:
            raise ValueError("early stopping needs a nonempty validation subset")
    elif config.patience is not None:
        train_part, val_part = _carve_validation(dataset, config.val_fraction, config.seed)
    else:
        train_part, val_part = dataset, []
    if not train_part:
        raise ValueError("training subset is empty")

    model = build_model(spec, word_vectors=word_vectors, vocab=vocab)
    optimizer = Adam(model.parameter_pairs(), lr=config.lr)
    rng = np.random.default_rng([config.seed, _SHUFFLE_STREAM])
    soft_all, hard_all = _targets([ex for _, ex in train_part])
    inputs_all = stack_inputs([inp for inp, _ in train_part])

    history: list[EpochRecord] = []
    best_val = np.inf
    best_state: dict[str, np.ndarray] | None = None
    best_epoch: int | None = None
    stale = 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_part))
        epoch_loss = 0.0
        seen = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            if len(idx) < 2 <= config.batch_size:
                continue
            batch = inputs_all.take(idx)
            loss, grad = _batch_loss(
                model, batch, soft_all[idx], hard_all[idx], config.loss, train=True
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite {config.loss} loss {loss} at epoch {epoch}"
                )
            model.zero_grad()
            model.backward(grad)
            optimizer.step()
            epoch_loss += loss * len(idx)
            seen += len(idx)
        train_loss = epoch_loss / max(seen, 1)

        val_loss: float | None = None
        if val_part:
            val_loss = evaluate_loss(model, val_part, config.loss)
            if not np.isfinite(val_loss):
                raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        history.append(EpochRecord(epoch, train_loss, val_loss))

        if config.patience is not None:
            assert val_loss is not None
            if val_loss < best_val:
                best_val = val_loss
                best_state = {k: v.copy() for k, v in model.state_dict().items()}
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break

    if best_state is not None:
        model.load_state_dict(best_state)
    finalize_parameters(model)
    return TrainedModel(spec=spec, model=model, config=config,
                        history=history, best_epoch=best_epoch)
