"""Model assembly: featurization, architectures, and training."""

from .architectures import (
    ARCHITECTURES,
    Architecture,
    EmbBiRnn,
    EmbCnn1dFFNN,
    ModelSpec,
    ProposedModel,
    TfidfFFNN,
    build_model,
    similarity_matrix,
)
from .features import (
    Batch,
    BodyFeatures,
    DocVectorProvider,
    Featurizer,
    FileDocVectorProvider,
    MeanEmbeddingProvider,
    ModelInput,
    load_word_vectors,
    stack_inputs,
)
from .training import (
    EpochRecord,
    TrainConfig,
    TrainedModel,
    TrainingDiverged,
    evaluate_loss,
    finalize_parameters,
    train,
)

__all__ = [
    "ARCHITECTURES",
    "Architecture",
    "Batch",
    "BodyFeatures",
    "DocVectorProvider",
    "EmbBiRnn",
    "EmbCnn1dFFNN",
    "EpochRecord",
    "Featurizer",
    "FileDocVectorProvider",
    "MeanEmbeddingProvider",
    "ModelInput",
    "ModelSpec",
    "ProposedModel",
    "TfidfFFNN",
    "TrainConfig",
    "TrainedModel",
    "TrainingDiverged",
    "build_model",
    "evaluate_loss",
    "finalize_parameters",
    "load_word_vectors",
    "similarity_matrix",
    "stack_inputs",
    "train",
]
