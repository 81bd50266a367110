"""Clickstream log ingestion: parse, denoise, and aggregate per-article engagement.

Input logs are newline-delimited JSON objects with five fields (event_id,
user_id, article_id, ts, dwell_seconds); everything else a record may carry
is ignored. Parsing never aborts on a bad line: each line lands either in
the event list or in the reject list with the first failing check as its
reason. Aggregation is a commutative/associative reduction so disjoint
partitions can be processed independently and merged.
"""

from __future__ import annotations

import gzip
import io
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator


class RejectReason(str, Enum):
    MALFORMED = "malformed"
    MISSING_FIELD = "missing_field"
    NEGATIVE_DWELL = "negative_dwell"
    BAD_TIMESTAMP = "bad_timestamp"


REQUIRED_FIELDS = ("event_id", "user_id", "article_id", "ts", "dwell_seconds")


@dataclass(frozen=True)
class PageViewEvent:
    """One reader interaction with one article."""

    event_id: str
    user_id: str
    article_id: str
    timestamp: datetime
    dwell_seconds: float


@dataclass(frozen=True)
class RejectRecord:
    line_number: int
    raw_line: str
    reason: RejectReason


@dataclass(frozen=True)
class EngagementAggregate:
    """Per-article click count and summed dwell seconds."""

    article_id: str
    click_count: int
    total_dwell_seconds: float


class IngestConfigError(ValueError):
    """Raised for invalid denoising configuration (cap <= floor)."""


def _parse_timestamp(raw: str) -> datetime | None:
    # Python 3.10 fromisoformat rejects the trailing 'Z'; normalize it.
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        return None
    if parsed.tzinfo is None:
        return None
    return parsed.astimezone(timezone.utc)


def _classify_line(line: str) -> PageViewEvent | RejectReason:
    """Validate one line; checks run in the fixed reject-reason order."""
    try:
        record = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError):
        return RejectReason.MALFORMED
    if not isinstance(record, dict):
        return RejectReason.MALFORMED
    for name in ("event_id", "user_id", "article_id", "ts"):
        if name in record and not isinstance(record[name], str):
            return RejectReason.MALFORMED
    if "dwell_seconds" in record and not isinstance(record["dwell_seconds"], (int, float)):
        return RejectReason.MALFORMED
    if isinstance(record.get("dwell_seconds"), bool):
        return RejectReason.MALFORMED

    for name in REQUIRED_FIELDS:
        if name not in record:
            return RejectReason.MISSING_FIELD
    if not record["event_id"] or not record["user_id"] or not record["article_id"]:
        return RejectReason.MISSING_FIELD

    dwell = float(record["dwell_seconds"])
    if dwell < 0:
        return RejectReason.NEGATIVE_DWELL

    timestamp = _parse_timestamp(record["ts"])
    if timestamp is None:
        return RejectReason.BAD_TIMESTAMP

    return PageViewEvent(
        event_id=record["event_id"],
        user_id=record["user_id"],
        article_id=record["article_id"],
        timestamp=timestamp,
        dwell_seconds=dwell,
    )


def parse_log_stream(stream: Iterable[bytes | str]) -> tuple[list[PageViewEvent], list[RejectRecord]]:
    """Split a log line stream into parsed events and per-line rejects.

    Every input line ends up in exactly one of the two outputs; input order
    is preserved on the event side. Blank lines are skipped entirely.
    """
    events: list[PageViewEvent] = []
    rejects: list[RejectRecord] = []
    for line_number, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                rejects.append(RejectRecord(line_number, repr(raw), RejectReason.MALFORMED))
                continue
        else:
            line = raw
        stripped = line.strip()
        if not stripped:
            continue
        outcome = _classify_line(stripped)
        if isinstance(outcome, PageViewEvent):
            events.append(outcome)
        else:
            rejects.append(RejectRecord(line_number, stripped, outcome))
    return events, rejects


def serialize_event(event: PageViewEvent) -> str:
    """One-line JSON form accepted back by parse_log_stream."""
    return json.dumps(
        {
            "event_id": event.event_id,
            "user_id": event.user_id,
            "article_id": event.article_id,
            "ts": event.timestamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "dwell_seconds": event.dwell_seconds,
        },
        ensure_ascii=False,
    )


def open_log(path: str | Path) -> IO[bytes]:
    """Open a log file for line iteration, transparently handling gzip."""
    path = Path(path)
    raw = path.open("rb")
    head = raw.read(2)
    raw.seek(0)
    if head == b"\x1f\x8b":
        return gzip.open(raw, "rb")  # type: ignore[return-value]
    return raw


def parse_log_file(path: str | Path) -> tuple[list[PageViewEvent], list[RejectRecord]]:
    with open_log(path) as stream:
        return parse_log_stream(stream)


def filter_noise(
    events: Iterable[PageViewEvent],
    cap_seconds: float = 600.0,
    floor_seconds: float = 1.0,
) -> list[PageViewEvent]:
    """Drop events below the dwell floor; clamp dwell above the cap.

    A clamped event still counts as a click: only its duration is
    untrusted (the open-tab artifact), not the visit itself.
    """
    if cap_seconds <= floor_seconds:
        raise IngestConfigError(
            f"cap_seconds ({cap_seconds}) must exceed floor_seconds ({floor_seconds})"
        )
    kept: list[PageViewEvent] = []
    for event in events:
        if event.dwell_seconds < floor_seconds:
            continue
        if event.dwell_seconds > cap_seconds:
            event = PageViewEvent(
                event.event_id,
                event.user_id,
                event.article_id,
                event.timestamp,
                cap_seconds,
            )
        kept.append(event)
    return kept


def aggregate_engagement(events: Iterable[PageViewEvent]) -> dict[str, EngagementAggregate]:
    """Reduce events to one aggregate per article.

    Dwell accumulates in 64-bit floats regardless of serving precision.
    """
    counts: dict[str, int] = {}
    dwell: dict[str, float] = {}
    for event in events:
        counts[event.article_id] = counts.get(event.article_id, 0) + 1
        dwell[event.article_id] = dwell.get(event.article_id, 0.0) + float(event.dwell_seconds)
    return {
        article_id: EngagementAggregate(article_id, counts[article_id], dwell[article_id])
        for article_id in counts
    }


def merge_aggregates(
    left: dict[str, EngagementAggregate],
    right: dict[str, EngagementAggregate],
) -> dict[str, EngagementAggregate]:
    """Merge two aggregate maps by adding counts and dwell sums."""
    merged = dict(left)
    for article_id, agg in right.items():
        prior = merged.get(article_id)
        if prior is None:
            merged[article_id] = agg
        else:
            merged[article_id] = EngagementAggregate(
                article_id,
                prior.click_count + agg.click_count,
                prior.total_dwell_seconds + agg.total_dwell_seconds,
            )
    return merged


def aggregate_partitioned(
    partitions: Iterable[Iterable[PageViewEvent]],
) -> dict[str, EngagementAggregate]:
    """Aggregate each partition independently, then merge. Deterministic
    for any partitioning of the same event multiset up to float summation
    order in the dwell totals."""
    result: dict[str, EngagementAggregate] = {}
    for chunk in partitions:
        result = merge_aggregates(result, aggregate_engagement(chunk))
    return result


def write_aggregates(aggregates: dict[str, EngagementAggregate], path: str | Path) -> None:
    """Emit one JSON object per aggregate, sorted by article id."""
    with Path(path).open("w", encoding="utf-8") as out:
        for article_id in sorted(aggregates):
            agg = aggregates[article_id]
            out.write(
                json.dumps(
                    {
                        "article_id": agg.article_id,
                        "click_count": agg.click_count,
                        "total_dwell_seconds": agg.total_dwell_seconds,
                    }
                )
                + "\n"
            )


def read_aggregates(path: str | Path) -> dict[str, EngagementAggregate]:
    aggregates: dict[str, EngagementAggregate] = {}
    with Path(path).open("r", encoding="utf-8") as stream:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            agg = EngagementAggregate(
                record["article_id"],
                int(record["click_count"]),
                float(record["total_dwell_seconds"]),
            )
            aggregates[agg.article_id] = agg
    return aggregates
