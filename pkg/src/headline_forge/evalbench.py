"""Metrics, synthetic data generation, and the experiment runner.

The synthetic world plants a per-article engagement point (c*, d*) and
manufactures both the clickstream and the text so that each signal is
recoverable by design: click counts scale with c*, per-event dwell times
scale with d*, headline lure-words appear at a rate driven by c*, and
headline tokens are copied out of the article body at a rate driven by
d*. The dwell signal therefore lives in the headline-body *relation*, not
in either text alone, which is exactly the structure the similarity
branch exists to exploit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterator, Sequence

import numpy as np

from .ingest import EngagementAggregate, PageViewEvent, serialize_event
from .labeler import (
    EngagementPoint,
    LabeledExample,
    hard_label,
    indicator_distribution,
    label_corpus,
)
from .models import (
    DocVectorProvider,
    Featurizer,
    ModelInput,
    ModelSpec,
    TrainConfig,
    TrainedModel,
    stack_inputs,
    train,
)
from .textprep import DEFAULT_BODY_LEN, DEFAULT_HEADLINE_LEN, Document, split_corpus

DWELL_FLOOR = 1.0
DWELL_CAP = 600.0
_DWELL_BASE = 30.0
_DWELL_SPAN = 270.0
_DWELL_SIGMA = 0.25

_TOPIC_COUNT = 20
_WORDS_PER_TOPIC = 50
_LURE_WORDS = 30
_BODY_TOKENS = 60
_HEADLINE_TOKENS = 10
_MAX_OVERLAP = 6
_MAX_LURES = 3

_EVENT_STREAM = 3
_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


def mae(preds: np.ndarray, truths: np.ndarray) -> float:
    """Mean absolute error over every entry of N x 4 distribution arrays."""
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {truths.shape}")
    if preds.ndim != 2 or preds.shape[0] < 1:
        raise ValueError("need at least one N x 4 row")
    return float(np.abs(preds - truths).mean())


def rae(preds: np.ndarray, truths: np.ndarray) -> float:
    """Total absolute error relative to the column-mean predictor, in percent.

    The reference predictor emits each truth column's mean over this same
    evaluation set; 100 therefore means "no better than the mean".
    """
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {truths.shape}")
    if preds.ndim != 2 or preds.shape[0] < 2:
        raise ValueError("need at least two rows")
    col_means = truths.mean(axis=0)
    denom = float(np.abs(truths - col_means).sum())
    if denom <= 0.0:
        raise ValueError("constant truth columns: mean-predictor denominator is zero")
    return 100.0 * float(np.abs(preds - truths).sum()) / denom


def _letters(value: int) -> str:
    """Nonnegative integer as a lowercase base-26 letter string."""
    digits = []
    value = int(value)
    while True:
        digits.append(chr(ord("a") + value % 26))
        value //= 26
        if value == 0:
            break
    return "".join(reversed(digits))


def _topic_word(topic: int, word: int) -> str:
    return f"z{_letters(topic)}q{_letters(word)}"


def _lure_word(index: int) -> str:
    return f"lure{_letters(index)}"


@dataclass(frozen=True)
class SyntheticArticle:
    article_id: str
    c_star: float
    d_star: float
    topic: int
    headline: str
    body: str
    click_count: int
    total_dwell_seconds: float
    event_seed: int


@dataclass(frozen=True)
class SyntheticWorld:
    """Planted engagement, generated text, and a regenerable event log."""

    articles: tuple[SyntheticArticle, ...]
    seed: int
    events_per_article_mean: int

    def documents(self) -> list[Document]:
        return [Document(a.article_id, a.headline, a.body) for a in self.articles]

    def planted_labels(self) -> list[LabeledExample]:
        labels = []
        for a in self.articles:
            dist = indicator_distribution(a.c_star, a.d_star)
            labels.append(
                LabeledExample(
                    article_id=a.article_id,
                    engagement=EngagementPoint(a.article_id, a.c_star, a.d_star),
                    target=dist,
                    hard_label=hard_label(dist),
                )
            )
        return labels

    def aggregates(self) -> list[EngagementAggregate]:
        return [
            EngagementAggregate(a.article_id, a.click_count, a.total_dwell_seconds)
            for a in self.articles
        ]

    def total_events(self) -> int:
        return sum(a.click_count for a in self.articles)

    def events(self) -> Iterator[PageViewEvent]:
        """Page-view events, article by article, bit-identical per seed."""
        for index, article in enumerate(self.articles):
            dwells = _article_dwells(article)
            base = _EPOCH + timedelta(seconds=7200 * index)
            for k, dwell in enumerate(dwells):
                yield PageViewEvent(
                    event_id=f"e{index}x{k}",
                    user_id=f"u{_letters((index * 131 + k * 17) % 9973)}",
                    article_id=article.article_id,
                    timestamp=base + timedelta(seconds=5 * k),
                    dwell_seconds=float(dwell),
                )

    def event_lines(self) -> Iterator[str]:
        for event in self.events():
            yield serialize_event(event)


def _article_dwells(article: SyntheticArticle) -> np.ndarray:
    rng = np.random.default_rng([article.event_seed, _EVENT_STREAM])
    mean = _DWELL_BASE + _DWELL_SPAN * article.d_star
    mu = np.log(mean) - 0.5 * _DWELL_SIGMA**2
    draws = rng.lognormal(mu, _DWELL_SIGMA, article.click_count)
    return np.clip(draws, DWELL_FLOOR, DWELL_CAP)


def generate_synthetic(
    n_articles: int, events_per_article_mean: int = 1000, seed: int = 0
) -> SyntheticWorld:
    """Build a synthetic corpus, clickstream, and exact soft-label truth.

    Per article: click count = max(1, round(c* x 2 x mean events)); dwell
    per event is lognormal with mean 30 + 270 d* seconds (sigma 0.25 in
    log space), clamped to [1, 600]. Headlines copy round(6 d*) tokens out
    of the body, carry round(3 c*) lure-lexicon words, and pad with words
    from other topics, shuffled.
    """
    if n_articles < 10:
        raise ValueError("need at least 10 articles")
    if events_per_article_mean < 1:
        raise ValueError("events_per_article_mean must be at least 1")
    rng = np.random.default_rng([seed, 1])

    articles = []
    for index in range(n_articles):
        c_star = float(rng.random())
        d_star = float(rng.random())
        topic = int(rng.integers(_TOPIC_COUNT))

        body_words = rng.integers(_WORDS_PER_TOPIC, size=_BODY_TOKENS)
        body_tokens = [_topic_word(topic, w) for w in body_words]

        n_overlap = round(d_star * _MAX_OVERLAP)
        n_lure = round(c_star * _MAX_LURES)
        n_noise = _HEADLINE_TOKENS - n_overlap - n_lure
        head_tokens = [body_tokens[i] for i in rng.integers(_BODY_TOKENS, size=n_overlap)]
        head_tokens += [_lure_word(int(i)) for i in rng.integers(_LURE_WORDS, size=n_lure)]
        for _ in range(n_noise):
            other = int(rng.integers(_TOPIC_COUNT - 1))
            if other >= topic:
                other += 1
            head_tokens.append(_topic_word(other, int(rng.integers(_WORDS_PER_TOPIC))))
        head_order = rng.permutation(len(head_tokens))
        head_tokens = [head_tokens[i] for i in head_order]

        click_count = max(1, round(c_star * 2 * events_per_article_mean))
        article = SyntheticArticle(
            article_id=f"art{_letters(index)}",
            c_star=c_star,
            d_star=d_star,
            topic=topic,
            headline=" ".join(head_tokens),
            body=" ".join(body_tokens),
            click_count=click_count,
            total_dwell_seconds=0.0,
            event_seed=seed * 1_000_003 + index,
        )
        total = float(_article_dwells(article).sum())
        articles.append(dataclasses.replace(article, total_dwell_seconds=total))

    return SyntheticWorld(
        articles=tuple(articles),
        seed=seed,
        events_per_article_mean=events_per_article_mean,
    )


def recovered_label_errors(world: SyntheticWorld) -> np.ndarray:
    """Per-article L1 gap between pipeline-recovered and planted labels.

    This is the Monte Carlo oracle behind the recovery tolerance: run the
    labeler over the world's aggregated engagement and measure how far the
    recovered soft distributions drift from the planted ones. Rows follow
    world.articles order.
    """
    recovered = label_corpus({agg.article_id: agg for agg in world.aggregates()})
    by_id = {ex.article_id: np.asarray(ex.target.p) for ex in recovered}
    planted = world.planted_labels()
    return np.array(
        [np.abs(by_id[ex.article_id] - np.asarray(ex.target.p)).sum() for ex in planted]
    )


@dataclass(frozen=True)
class ArchResult:
    architecture: str
    mae: float
    rae: float
    best_epoch: int | None
    epochs_run: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ArchResult, ...]
    split_sizes: tuple[int, int, int]
    seed: int
    config: dict

    def to_json(self) -> dict:
        return {
            "rows": [dataclasses.asdict(row) for row in self.rows],
            "split_sizes": list(self.split_sizes),
            "seed": self.seed,
            "config": self.config,
        }


def _predict_chunked(trained: TrainedModel, inputs: Sequence[ModelInput], chunk: int = 256) -> np.ndarray:
    parts = []
    for start in range(0, len(inputs), chunk):
        parts.append(trained.predict(stack_inputs(list(inputs[start : start + chunk]))))
    return np.concatenate(parts, axis=0)


def run_experiment(
    data: SyntheticWorld | tuple[Sequence[Document], Sequence[LabeledExample]],
    architectures: Sequence[str],
    seed: int = 0,
    config: TrainConfig | None = None,
    topic_count: int = 50,
    nnmf_iters: int = 200,
    headline_len: int = DEFAULT_HEADLINE_LEN,
    body_len: int = DEFAULT_BODY_LEN,
    provider: DocVectorProvider | None = None,
) -> EvalReport:
    """Train each architecture on one shared split and report test metrics.

    The corpus is split 70/10/20 once; the featurizer is fitted on the
    training split only; every architecture sees identical features and
    targets. A "mean_predictor" reference row is always appended.
    """
    if isinstance(data, SyntheticWorld):
        documents, labels = data.documents(), data.planted_labels()
    else:
        documents, labels = list(data[0]), list(data[1])
    if config is None:
        config = TrainConfig(seed=seed)

    by_id = {doc.article_id: doc for doc in documents}
    labeled = [ex for ex in labels if ex.article_id in by_id]
    if len(labeled) < 10:
        raise ValueError("need at least 10 labeled documents")

    split = split_corpus([ex.article_id for ex in labeled], seed=seed)
    parts: dict[str, list[LabeledExample]] = {"train": [], "val": [], "test": []}
    for ex in labeled:
        if ex.article_id in split.train:
            parts["train"].append(ex)
        elif ex.article_id in split.validation:
            parts["val"].append(ex)
        else:
            parts["test"].append(ex)

    featurizer = Featurizer.fit(
        [by_id[ex.article_id] for ex in parts["train"]],
        provider=provider,
        topic_count=topic_count,
        nnmf_iters=nnmf_iters,
        seed=seed,
        headline_len=headline_len,
        body_len=body_len,
    )
    features: dict[str, list[tuple[ModelInput, LabeledExample]]] = {
        name: [(featurizer.featurize(by_id[ex.article_id]), ex) for ex in examples]
        for name, examples in parts.items()
    }

    test_inputs = [inp for inp, _ in features["test"]]
    truths = np.array([ex.target.p for _, ex in features["test"]])

    rows: list[ArchResult] = []
    for arch in architectures:
        spec = ModelSpec(
            architecture=arch,
            vocab_size=len(featurizer.vocab),
            seed=seed,
            topic_dim=topic_count,
            headline_len=headline_len,
            body_len=body_len,
            doc_vec_dim=featurizer.provider.dimension,
        )
        trained = train(spec, features["train"], config, validation=features["val"])
        preds = _predict_chunked(trained, test_inputs)
        rows.append(
            ArchResult(
                architecture=arch,
                mae=mae(preds, truths),
                rae=rae(preds, truths),
                best_epoch=trained.best_epoch,
                epochs_run=len(trained.history),
            )
        )

    mean_preds = np.tile(truths.mean(axis=0), (truths.shape[0], 1))
    rows.append(
        ArchResult(
            architecture="mean_predictor",
            mae=mae(mean_preds, truths),
            rae=rae(mean_preds, truths),
            best_epoch=None,
            epochs_run=0,
        )
    )

    return EvalReport(
        rows=tuple(rows),
        split_sizes=(len(parts["train"]), len(parts["val"]), len(parts["test"])),
        seed=seed,
        config={
            "loss": config.loss,
            "lr": config.lr,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "patience": config.patience,
            "topic_count": topic_count,
            "nnmf_iters": nnmf_iters,
            "architectures": list(architectures),
        },
    )
