"""Headline quality from clickstream engagement.

The pipeline turns raw page-view logs into soft four-way quality labels
(click count x dwell time), trains neural models that predict those
labels from headline and body text alone, and serves ranked candidate
headlines over HTTP.
"""

from .ingest import (
    EngagementAggregate,
    PageViewEvent,
    RejectReason,
    aggregate_engagement,
    filter_noise,
    parse_log_file,
    parse_log_stream,
)
from .labeler import (
    INDICATOR_NAMES,
    LabeledExample,
    QualityDistribution,
    hard_label,
    indicator_distribution,
    label_corpus,
    normalize,
)
from .textprep import Document, Vocabulary, read_corpus, split_corpus, tokenize
from .topics import TopicModel, nnmf_fit, nnmf_transform

__version__ = "0.1.0"

__all__ = [
    "Document",
    "EngagementAggregate",
    "INDICATOR_NAMES",
    "LabeledExample",
    "PageViewEvent",
    "QualityDistribution",
    "RejectReason",
    "TopicModel",
    "Vocabulary",
    "__version__",
    "aggregate_engagement",
    "filter_noise",
    "hard_label",
    "indicator_distribution",
    "label_corpus",
    "nnmf_fit",
    "nnmf_transform",
    "normalize",
    "parse_log_file",
    "parse_log_stream",
    "read_corpus",
    "split_corpus",
    "tokenize",
]
