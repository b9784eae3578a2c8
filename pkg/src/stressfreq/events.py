"""Rated-event ingestion, day-window filtering and likelihood bucketing.

Event tables are comma-separated text with the header::

    participant_id,time_of_day_min,likelihood,responded,category

An optional ``day`` column disambiguates repeated clock times across study
days. The same schema is accepted as JSON (a list of objects, an object with
an ``events`` list, or JSON lines).
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .categories import StressorCategory, parse_category
from .errors import EmptyBucketError, IngestError, InvalidWindow, UnknownCategoryError

N_BUCKETS = 20
MINUTES_PER_DAY = 1440
DEFAULT_WINDOW = (480.0, 1200.0)

COLUMNS = ("participant_id", "time_of_day_min", "likelihood", "responded", "category")
OPTIONAL_COLUMNS = ("day",)

_TRUE = {"true", "1", "yes"}
_FALSE = {"false", "0", "no"}


@dataclass(frozen=True, slots=True)
class RatedEvent:
    participant_id: str
    time_of_day: float
    likelihood: float
    responded: bool
    category: StressorCategory | None = None
    day: int | None = None

    def __post_init__(self):
        if not 0 <= self.time_of_day < MINUTES_PER_DAY:
            raise ValueError(f"time_of_day {self.time_of_day} outside [0, 1440)")
        if not math.isfinite(self.likelihood):
            raise ValueError(f"likelihood must be finite, got {self.likelihood}")
        if self.category is not None and not self.responded:
            raise ValueError("category present on an event that was not responded to")

    @property
    def has_stressor(self) -> bool:
        return self.category is not None


# --------------------------------------------------------------------------
# ingestion


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"responded must be true/false, got {value!r}")


def _parse_float(name: str, value) -> float:
    if isinstance(value, bool):
        raise ValueError(f"{name} must be numeric, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be numeric, got {value!r}") from None
    if not math.isfinite(out):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return out


def _parse_record(rec: Mapping) -> RatedEvent:
    pid = rec.get("participant_id")
    if pid is None or str(pid).strip() == "":
        raise ValueError("participant_id is empty")
    category = rec.get("category")
    if category is None or str(category).strip() == "":
        cat = None
    else:
        cat = parse_category(str(category))
    day = rec.get("day")
    if day is None or str(day).strip() == "":
        day = None
    else:
        day = int(_parse_float("day", day))
    return RatedEvent(
        participant_id=str(pid).strip(),
        time_of_day=_parse_float("time_of_day_min", rec.get("time_of_day_min")),
        likelihood=_parse_float("likelihood", rec.get("likelihood")),
        responded=_parse_bool(rec.get("responded")),
        category=cat,
        day=day,
    )


def _csv_records(stream: IO[str]) -> Iterator[tuple[int, Mapping]]:
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise IngestError([(1, f"missing columns {missing}")])
    for rec in reader:
        if None in rec:
            yield reader.line_num, {"__error__": "too many fields"}
            continue
        yield reader.line_num, rec


def _json_records(text: str) -> Iterator[tuple[int, Mapping]]:
    stripped = text.lstrip()
    if stripped.startswith("[") or stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError:
            doc = None
        if doc is not None:
            if isinstance(doc, dict):
                doc = doc.get("events")
            if not isinstance(doc, list):
                raise IngestError([(1, "expected a list of event objects")])
            for i, rec in enumerate(doc, start=1):
                yield i, rec
            return
    # JSON lines
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield i, json.loads(line)
        except json.JSONDecodeError as exc:
            yield i, {"__error__": f"invalid JSON: {exc.msg}"}


def _records(source) -> Iterator[tuple[int, Mapping]]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() in (".json", ".jsonl"):
            yield from _json_records(text)
        else:
            yield from _csv_records(io.StringIO(text))
        return
    if hasattr(source, "read"):
        text = source.read()
        if text.lstrip().startswith(("[", "{")):
            yield from _json_records(text)
        else:
            yield from _csv_records(io.StringIO(text))
        return
    # already-structured records
    for i, rec in enumerate(source, start=1):
        yield i, rec


def ingest_with_diagnostics(source) -> tuple[list[RatedEvent], list[tuple[int, str]]]:
    """Parse an event table, returning good events and per-row problems.

    ``source`` is a path, a text stream, or an iterable of mappings.
    Duplicate ``(participant, day, time)`` keys are rejected after the first.
    """
    events: list[RatedEvent] = []
    problems: list[tuple[int, str]] = []
    seen: dict[tuple, int] = {}
    for line, rec in _records(source):
        if not isinstance(rec, Mapping):
            problems.append((line, "record is not an object"))
            continue
        if "__error__" in rec:
            problems.append((line, rec["__error__"]))
            continue
        try:
            ev = _parse_record(rec)
        except UnknownCategoryError as exc:
            problems.append((line, str(exc)))
            continue
        except ValueError as exc:
            problems.append((line, f"malformed row: {exc}"))
            continue
        key = (ev.participant_id, ev.day, ev.time_of_day)
        if key in seen:
            problems.append((line, f"duplicate of line {seen[key]} for {key}"))
            continue
        seen[key] = line
        events.append(ev)
    return events, problems


def ingest(source) -> list[RatedEvent]:
    """Parse an event table; raise :class:`IngestError` if any row is rejected."""
    events, problems = ingest_with_diagnostics(source)
    if problems:
        raise IngestError(problems)
    return events


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def emit(events: Iterable[RatedEvent], dest, fmt: str = "csv") -> None:
    """Write events to ``dest`` (path or text stream) as CSV or JSON."""
    events = list(events)
    with_day = any(ev.day is not None for ev in events)
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            emit(events, fh, fmt)
        return
    if fmt == "json":
        recs = []
        for ev in events:
            rec = {
                "participant_id": ev.participant_id,
                "time_of_day_min": ev.time_of_day,
                "likelihood": ev.likelihood,
                "responded": ev.responded,
                "category": ev.category.value if ev.category else None,
            }
            if with_day:
                rec["day"] = ev.day
            recs.append(rec)
        json.dump({"events": recs}, dest, indent=1)
        dest.write("\n")
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(COLUMNS + (("day",) if with_day else ()))
    for ev in events:
        row = [
            ev.participant_id,
            _fmt(ev.time_of_day),
            _fmt(ev.likelihood),
            "true" if ev.responded else "false",
            ev.category.value if ev.category else "",
        ]
        if with_day:
            row.append("" if ev.day is None else str(ev.day))
        writer.writerow(row)


# --------------------------------------------------------------------------
# window filtering and bucketing


def filter_window(
    events: Iterable[RatedEvent],
    start: float = DEFAULT_WINDOW[0],
    end: float = DEFAULT_WINDOW[1],
) -> list[RatedEvent]:
    """Keep events with ``start <= time_of_day < end`` (minutes since midnight)."""
    if not (0 <= start < end <= MINUTES_PER_DAY):
        raise InvalidWindow(f"window [{start}, {end}) must satisfy 0 <= start < end <= 1440")
    return [ev for ev in events if start <= ev.time_of_day < end]


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=float)
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], len(xs)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    return ranks


def bucket_indices(ranks: np.ndarray, n: int) -> np.ndarray:
    """Bucket of each rank: percentile ``100*rank/n`` in ``(5j, 5(j+1)]`` maps to j.

    Done in integer arithmetic on doubled ranks so bucket edges are exact.
    """
    twice = np.rint(2 * np.asarray(ranks)).astype(np.int64)
    b = (N_BUCKETS * twice + 2 * n - 1) // (2 * n) - 1
    return np.clip(b, 0, N_BUCKETS - 1)


@dataclass(frozen=True)
class ParticipantBuckets:
    """Events of one participant split into 20 percentile buckets.

    ``percentiles[j][i]`` is the person-specific percentile in (0, 100] of
    ``buckets[j][i]``.
    """

    participant_id: str
    buckets: tuple[tuple[RatedEvent, ...], ...]
    percentiles: tuple[tuple[float, ...], ...]

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.buckets)

    @property
    def n_events(self) -> int:
        return sum(self.counts)

    @property
    def empty_buckets(self) -> tuple[int, ...]:
        return tuple(j for j, b in enumerate(self.buckets) if not b)

    @property
    def eligible(self) -> bool:
        return not self.empty_buckets


def bucketize(
    events: Iterable[RatedEvent], participant_id: str, *, allow_empty: bool = False
) -> ParticipantBuckets:
    """Stratify one participant's events into 20 five-percentile buckets.

    Percentiles are average ranks scaled to (0, 100]; a percentile lying
    exactly on a multiple of 5 belongs to the lower bucket. Raises
    :class:`EmptyBucketError` when some bucket is empty, unless
    ``allow_empty``.
    """
    own = [ev for ev in events if ev.participant_id == participant_id]
    if not own:
        raise EmptyBucketError(participant_id, range(N_BUCKETS))
    # stable order inside buckets: by likelihood, then time
    own.sort(key=lambda ev: (ev.likelihood, ev.day if ev.day is not None else -1, ev.time_of_day))
    n = len(own)
    ranks = average_ranks([ev.likelihood for ev in own])
    idx = bucket_indices(ranks, n)
    pct = 100.0 * ranks / n
    buckets: list[list[RatedEvent]] = [[] for _ in range(N_BUCKETS)]
    pcts: list[list[float]] = [[] for _ in range(N_BUCKETS)]
    for ev, j, p in zip(own, idx, pct):
        buckets[j].append(ev)
        pcts[j].append(float(p))
    out = ParticipantBuckets(
        participant_id,
        tuple(tuple(b) for b in buckets),
        tuple(tuple(p) for p in pcts),
    )
    if not allow_empty and out.empty_buckets:
        raise EmptyBucketError(participant_id, out.empty_buckets)
    return out


@dataclass(frozen=True)
class CohortSummary:
    n_participants: int
    n_retained: int
    excluded: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def describe(self) -> str:
        lines = [f"{self.n_retained} of {self.n_participants} participants retained"]
        for pid, empty in self.excluded.items():
            lines.append(f"  excluded {pid}: empty buckets {list(empty)}")
        return "\n".join(lines)


def eligible_cohort(
    all_buckets: Iterable[ParticipantBuckets],
) -> tuple[list[ParticipantBuckets], CohortSummary]:
    """Keep participants with every bucket populated."""
    all_buckets = list(all_buckets)
    kept = [pb for pb in all_buckets if pb.eligible]
    excluded = {pb.participant_id: pb.empty_buckets for pb in all_buckets if not pb.eligible}
    return kept, CohortSummary(len(all_buckets), len(kept), excluded)


def build_cohort(
    events: Iterable[RatedEvent],
    window: tuple[float, float] = DEFAULT_WINDOW,
    *,
    rated_only: bool = True,
) -> tuple[list[ParticipantBuckets], CohortSummary]:
    """Window-filter, bucket every participant and keep the eligible ones.

    With ``rated_only`` (default) events without a response are dropped
    first, since their stressor outcome is unknown.
    """
    kept = filter_window(events, *window)
    if rated_only:
        kept = [ev for ev in kept if ev.responded]
    by_pid: dict[str, list[RatedEvent]] = defaultdict(list)
    for ev in kept:
        by_pid[ev.participant_id].append(ev)
    buckets = [
        bucketize(evs, pid, allow_empty=True) for pid, evs in sorted(by_pid.items())
    ]
    return eligible_cohort(buckets)
