"""Soft quality labels from engagement aggregates.

An article's engagement is reduced to two numbers: average dwell seconds
per visit and click count, each normalized to [0, 1] over the whole
population. The four quality indicators sit at the corners of that unit
square (1: loyal-but-unclicked, 2: ideal, 3: misleading, 4: ignored) and
an article's soft label is the softmax of sqrt(2) minus its distance to
each corner.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import EngagementAggregate

# Corner order matches the indicator numbering: (click, dwell) coordinates.
INDICATOR_CORNERS = np.array(
    [
        [0.0, 1.0],  # 1: low click, high dwell
        [1.0, 1.0],  # 2: high click, high dwell
        [1.0, 0.0],  # 3: high click, low dwell (misleading)
        [0.0, 0.0],  # 4: low click, low dwell
    ]
)

INDICATOR_NAMES = (
    "loyal but unclicked",
    "ideal",
    "misleading",
    "ignored",
)


@dataclass(frozen=True)
class EngagementPoint:
    article_id: str
    c_norm: float
    d_norm: float


@dataclass(frozen=True)
class QualityDistribution:
    """Probability 4-vector over the quality indicators."""

    p: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.p) != 4:
            raise ValueError("quality distribution must have four components")
        total = sum(self.p)
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"distribution sums to {total}, expected 1")
        if any(not (0.0 < value < 1.0) for value in self.p):
            raise ValueError("each probability must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class LabeledExample:
    article_id: str
    engagement: EngagementPoint
    target: QualityDistribution
    hard_label: int


def raw_dwell(agg: EngagementAggregate) -> float:
    """Average dwell seconds per visit (total dwell over click count)."""
    if agg.click_count < 1:
        raise ValueError("aggregate must have at least one click")
    return agg.total_dwell_seconds / agg.click_count


def normalize(values: Sequence[float], clip_percentile: float = 99.0) -> list[float]:
    """Clip at the given upper percentile, then min-max map onto [0, 1].

    A degenerate population (max == min after clipping) maps everything to
    0.5, the center of the indicator square.
    """
    if len(values) == 0:
        raise ValueError("cannot normalize an empty population")
    if not 0.0 < clip_percentile <= 100.0:
        raise ValueError("clip_percentile must lie in (0, 100]")
    arr = np.asarray(values, dtype=np.float64)
    ceiling = float(np.percentile(arr, clip_percentile))
    clipped = np.minimum(arr, ceiling)
    low = float(clipped.min())
    high = float(clipped.max())
    if high == low:
        return [0.5] * len(values)
    return ((clipped - low) / (high - low)).tolist()


def indicator_distribution(c_norm: float, d_norm: float) -> QualityDistribution:
    """Soft indicator probabilities for a normalized (click, dwell) point.

    Each corner's score is sqrt(2) minus the Euclidean distance from the
    point to that corner; softmax converts the four scores into
    probabilities.
    """
    if not (0.0 <= c_norm <= 1.0 and 0.0 <= d_norm <= 1.0):
        raise ValueError(f"point ({c_norm}, {d_norm}) outside the unit square")
    point = np.array([c_norm, d_norm])
    scores = math.sqrt(2.0) - np.linalg.norm(point - INDICATOR_CORNERS, axis=1)
    shifted = np.exp(scores - scores.max())
    probs = shifted / shifted.sum()
    return QualityDistribution(tuple(float(v) for v in probs))


def hard_label(dist: QualityDistribution) -> int:
    """1-based index of the largest probability; ties go to the lowest index."""
    return 1 + int(np.argmax(dist.p))


def label_corpus(
    aggregates: dict[str, EngagementAggregate],
    clip_percentile: float = 99.0,
) -> list[LabeledExample]:
    """Label every aggregated article with its soft indicator distribution.

    Click counts and raw dwell times are normalized independently, each
    over the full population.
    """
    if not aggregates:
        raise ValueError("cannot label an empty aggregate map")
    article_ids = sorted(aggregates)
    counts = [float(aggregates[a].click_count) for a in article_ids]
    dwells = [raw_dwell(aggregates[a]) for a in article_ids]
    c_norms = normalize(counts, clip_percentile)
    d_norms = normalize(dwells, clip_percentile)
    examples = []
    for article_id, c, d in zip(article_ids, c_norms, d_norms):
        dist = indicator_distribution(c, d)
        examples.append(
            LabeledExample(
                article_id=article_id,
                engagement=EngagementPoint(article_id, c, d),
                target=dist,
                hard_label=hard_label(dist),
            )
        )
    return examples


def write_labels(examples: Iterable[LabeledExample], path: str | Path) -> None:
    """One JSON object per labeled article."""
    with Path(path).open("w", encoding="utf-8") as out:
        for ex in examples:
            p1, p2, p3, p4 = ex.target.p
            out.write(
                json.dumps(
                    {
                        "article_id": ex.article_id,
                        "c_norm": ex.engagement.c_norm,
                        "d_norm": ex.engagement.d_norm,
                        "p1": p1,
                        "p2": p2,
                        "p3": p3,
                        "p4": p4,
                        "hard_label": ex.hard_label,
                    }
                )
                + "\n"
            )


def read_labels(path: str | Path) -> list[LabeledExample]:
    examples = []
    with Path(path).open("r", encoding="utf-8") as stream:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            dist = QualityDistribution((record["p1"], record["p2"], record["p3"], record["p4"]))
            examples.append(
                LabeledExample(
                    article_id=record["article_id"],
                    engagement=EngagementPoint(
                        record["article_id"], record["c_norm"], record["d_norm"]
                    ),
                    target=dist,
                    hard_label=int(record["hard_label"]),
                )
            )
    return examples
