"""Time slots, raw/normalized scores and per-user temporal activity maps.

Timestamps are integer seconds in the server-site timezone. A candidate set
is the list of contiguous slots obtained by cutting a request's execution
range into pieces of equal length.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import EmptyCandidateError, InvalidArgumentError

HOUR = 3600
DAY = 86400

MAP_CSV_HEADER = ("user", "metric", "slot_index", "score")


@dataclass(frozen=True, order=True)
class TimeSlot:
    index: int
    start: int
    length: int

    def __post_init__(self):
        if self.length <= 0:
            raise InvalidArgumentError(f"slot length must be positive, got {self.length}")

    @property
    def end(self) -> int:
        return self.start + self.length

    def contains(self, timestamp) -> bool:
        return self.start <= timestamp < self.end


@dataclass(frozen=True)
class MetricBounds:
    """Global min/max of a metric. ``provenance`` records the window the
    bounds were computed over (e.g. ``"2024-01-01/28d"``)."""

    metric: str
    min: float
    max: float
    provenance: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise InvalidArgumentError("metric bounds must be finite")
        if self.max < self.min:
            raise InvalidArgumentError(
                f"bounds for {self.metric!r} have max {self.max} < min {self.min}")

    @classmethod
    def from_values(cls, metric, values, provenance=""):
        arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                         dtype=float)
        if arr.size == 0:
            raise EmptyCandidateError("cannot compute bounds from no values")
        return cls(metric, float(arr.min()), float(arr.max()), provenance)


def partition_range(t_start: int, t_end: int, length: int) -> list[TimeSlot]:
    """Cut ``[t_start, t_end)`` into contiguous slots of ``length`` seconds.

    A trailing remainder shorter than ``length`` is dropped.
    """
    if length <= 0:
        raise InvalidArgumentError(f"slot length must be positive, got {length}")
    if t_end <= t_start:
        raise InvalidArgumentError(f"empty execution range [{t_start}, {t_end})")
    k = (t_end - t_start) // length
    if k == 0:
        raise EmptyCandidateError(
            f"range of {t_end - t_start}s holds no slot of length {length}s")
    return [TimeSlot(i, t_start + i * length, length) for i in range(k)]


def normalize(raw: float, bounds: MetricBounds) -> float:
    if not math.isfinite(raw):
        raise InvalidArgumentError(f"raw score must be finite, got {raw}")
    span = bounds.max - bounds.min
    if span == 0:
        return 0.5
    # stale bounds: clamp rather than reject
    if raw <= bounds.min:
        return 0.0
    if raw >= bounds.max:
        return 1.0
    return (raw - bounds.min) / span


def normalize_array(raw, bounds: MetricBounds) -> np.ndarray:
    """Vectorized :func:`normalize`; same clamping and degenerate-bounds rule."""
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise InvalidArgumentError("raw scores must be finite")
    span = bounds.max - bounds.min
    if span == 0:
        return np.full(raw.shape, 0.5)
    out = (raw - bounds.min) / span
    out[raw <= bounds.min] = 0.0
    out[raw >= bounds.max] = 1.0
    return out


@dataclass(frozen=True)
class TemporalActivityMap:
    """Normalized per-slot scores for one (user, metric) pair.

    Instances are immutable; policies work on :meth:`scores`, which returns
    a fresh mutable copy.
    """

    user: str
    metric: str
    entries: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for slot, score in sorted(dict(self.entries).items()):
            score = float(score)
            if not 0.0 <= score <= 1.0:
                raise InvalidArgumentError(
                    f"score {score} for slot {slot} is outside [0, 1]")
            clean[int(slot)] = score
        object.__setattr__(self, "entries", MappingProxyType(clean))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, slot):
        return slot in self.entries

    def __getitem__(self, slot):
        return self.entries[slot]

    @property
    def slots(self) -> list[int]:
        return list(self.entries)

    def scores(self) -> dict[int, float]:
        return dict(self.entries)

    def __eq__(self, other):
        if not isinstance(other, TemporalActivityMap):
            return NotImplemented
        return (self.user, self.metric, dict(self.entries)) == (
            other.user, other.metric, dict(other.entries))

    def __hash__(self):
        return hash((self.user, self.metric, tuple(self.entries.items())))

    def __repr__(self):
        return (f"TemporalActivityMap(user={self.user!r}, metric={self.metric!r}, "
                f"entries={dict(self.entries)!r})")

    # serialization

    def to_dict(self) -> dict:
        return {
            "user": self.user,
            "metric": self.metric,
            "entries": [{"slot": s, "score": v} for s, v in self.entries.items()],
        }

    @classmethod
    def from_dict(cls, doc) -> "TemporalActivityMap":
        try:
            entries = {int(e["slot"]): float(e["score"]) for e in doc["entries"]}
            return cls(str(doc["user"]), str(doc["metric"]), entries)
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed activity map document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text) -> "TemporalActivityMap":
        return cls.from_dict(json.loads(text))

    def csv_rows(self) -> list[tuple]:
        return [(self.user, self.metric, s, repr(v)) for s, v in self.entries.items()]


def uniform_map(user, metric, slots: Iterable[int], score=0.5) -> TemporalActivityMap:
    return TemporalActivityMap(user, metric, {s: score for s in slots})


def build_activity_map(user, metric, raw_scores: Mapping[int, float],
                       bounds: MetricBounds, candidates=None) -> TemporalActivityMap:
    """Normalize ``raw_scores`` against ``bounds``; absent slots stay absent.

    If ``candidates`` (slot indices or :class:`TimeSlot` objects) is given,
    every raw slot must belong to it.
    """
    if not raw_scores:
        raise EmptyCandidateError(f"no raw scores for user {user!r}, metric {metric!r}")
    if candidates is not None:
        allowed = {c.index if isinstance(c, TimeSlot) else int(c) for c in candidates}
        stray = set(raw_scores) - allowed
        if stray:
            raise InvalidArgumentError(f"slots {sorted(stray)} are not in the candidate set")
    return TemporalActivityMap(
        user, metric, {s: normalize(float(r), bounds) for s, r in raw_scores.items()})


def write_maps_csv(maps: Iterable[TemporalActivityMap], fh, header=True):
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(MAP_CSV_HEADER)
    for m in maps:
        writer.writerows(m.csv_rows())


def read_maps_csv(fh) -> list[TemporalActivityMap]:
    """Group ``user,metric,slot_index,score`` rows into maps, in first-seen order."""
    grouped: dict[tuple, dict] = {}
    for row in csv.DictReader(fh):
        try:
            key = (row["user"], row["metric"])
            grouped.setdefault(key, {})[int(row["slot_index"])] = float(row["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed map row {row}: {exc}") from exc
    return [TemporalActivityMap(u, m, e) for (u, m), e in grouped.items()]
