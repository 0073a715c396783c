"""Per-slot raw signals: hourly activity counters, synthetic predictors and
local-time / windowed activity features.

Day-of-week numbering is 0 = Sunday ... 6 = Saturday throughout.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError
from .slots import DAY, HOUR, TimeSlot

N_BUCKETS = 7 * 24
MAX_OFFSET_MINUTES = 14 * 60
_INT_MAX = np.iinfo(np.int64).max

COUNTER_CSV_HEADER = ("user", "channel", "dow", "hour", "count")


def day_of_week(ts: int) -> int:
    # 1970-01-01 was a Thursday
    return int((ts // DAY + 4) % 7)


def hour_of_day(ts: int) -> int:
    return int((ts % DAY) // HOUR)


def _check_offset(minutes):
    if not -MAX_OFFSET_MINUTES <= minutes <= MAX_OFFSET_MINUTES:
        raise InvalidArgumentError(f"UTC offset {minutes} min outside [-14h, +14h]")


@dataclass
class ActivityCounter:
    """168 hourly buckets keyed by (day-of-week, hour) in server time.

    Single writer per user; readers should work on :meth:`snapshot`.
    """

    user: str
    channel: str
    buckets: np.ndarray = field(default_factory=lambda: np.zeros((7, 24), dtype=np.int64))

    def __post_init__(self):
        self.buckets = np.asarray(self.buckets, dtype=np.int64).reshape(7, 24)
        if (self.buckets < 0).any():
            raise InvalidArgumentError("bucket counts must be non-negative")

    def __getitem__(self, key):
        dow, hour = key
        return int(self.buckets[dow, hour])

    def increment(self, dow, hour, by=1):
        if not (0 <= dow < 7 and 0 <= hour < 24):
            raise InvalidArgumentError(f"bucket ({dow}, {hour}) out of range")
        current = int(self.buckets[dow, hour])
        self.buckets[dow, hour] = min(_INT_MAX, current + by)

    def snapshot(self) -> "ActivityCounter":
        return ActivityCounter(self.user, self.channel, self.buckets.copy())

    def __add__(self, other):
        if not isinstance(other, ActivityCounter):
            return NotImplemented
        return ActivityCounter(self.user, self.channel, self.buckets + other.buckets)

    def weekly_aggregate(self) -> np.ndarray:
        return self.buckets.sum(axis=0)

    def csv_rows(self):
        return [(self.user, self.channel, d, h, int(self.buckets[d, h]))
                for d, h in zip(*np.nonzero(self.buckets))]


def record_activity(counter: ActivityCounter, event_time: int,
                    user_utc_offset: int = 0) -> ActivityCounter:
    """Count one event in the server-time (day-of-week, hour) bucket.

    The user's offset is validated but does not move the bucket: counters
    share the server-site clock with slots.
    """
    _check_offset(user_utc_offset)
    counter.increment(day_of_week(event_time), hour_of_day(event_time))
    return counter


def decay_counter(counter: ActivityCounter, factor: float) -> ActivityCounter:
    """Weekly multiplicative decay; counts are floored to integers."""
    if not 0.0 <= factor <= 1.0:
        raise InvalidArgumentError(f"decay factor {factor} outside [0, 1]")
    counter.buckets = np.floor(counter.buckets * factor).astype(np.int64)
    return counter


def _covered_hours(slot: TimeSlot):
    first = slot.start // HOUR
    last = -(-slot.end // HOUR)  # ceil
    return range(first, max(last, first + 1))


def counter_signal(counter: ActivityCounter, slots: list[TimeSlot],
                   day_of_week: int) -> dict[int, float]:
    """Raw score per slot from the counter's hourly buckets.

    ``day_of_week`` is the weekday of the first slot's server date; later slots
    advance through the week with the calendar. A slot longer than an hour
    sums every hourly bucket it overlaps.
    """
    if not slots:
        raise InvalidArgumentError("counter_signal needs at least one slot")
    if not 0 <= day_of_week < 7:
        raise InvalidArgumentError(f"day_of_week {day_of_week} out of range")
    flat = counter.buckets.reshape(-1)
    first_day = slots[0].start // DAY
    out = {}
    for slot in slots:
        total = 0
        for abs_hour in _covered_hours(slot):
            day = abs_hour // 24 - first_day
            idx = ((day_of_week + day) % 7) * 24 + abs_hour % 24
            total += int(flat[idx])
        out[slot.index] = float(total)
    return out


@dataclass(frozen=True)
class ChannelActivityLevel:
    user: str
    channel: str
    level: float

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise InvalidArgumentError(f"activity level {self.level} outside [0, 1]")


def _day_number(d):
    if isinstance(d, datetime):
        d = d.date()
    if isinstance(d, date):
        return d.toordinal()
    return int(d)


def channel_activity_level(user, channel, active_days: Iterable, as_of,
                           window: int = 28) -> ChannelActivityLevel:
    """Fraction of the trailing ``window`` days (ending at ``as_of``) with any
    activity on the channel. Days are dates or integer day numbers."""
    end = _day_number(as_of)
    days = {_day_number(d) for d in active_days}
    hits = sum(1 for d in days if end - window < d <= end)
    return ChannelActivityLevel(user, channel, hits / window)


@dataclass(frozen=True)
class LocalTimeFeatures:
    day_of_week: int
    hour_of_day: int
    is_holiday: bool
    utc_offset: int


def local_time_features(slot: TimeSlot, user_utc_offset: int,
                        holidays: Iterable[date] = ()) -> LocalTimeFeatures:
    _check_offset(user_utc_offset)
    local = slot.start + user_utc_offset * 60
    local_date = datetime.fromtimestamp(local, tz=timezone.utc).date()
    return LocalTimeFeatures(day_of_week(local), hour_of_day(local),
                             local_date in set(holidays), user_utc_offset)


@dataclass(frozen=True)
class WindowedActivityFeatures:
    user: str
    slot: TimeSlot
    window_sums: Mapping[tuple, float]
    weekly_aggregate: tuple


def windowed_activity_features(counter: ActivityCounter, slot: TimeSlot,
                               windows: Iterable[tuple]) -> WindowedActivityFeatures:
    """Sum hourly buckets over closed hour ranges around the slot's start hour.

    A window ``(-4, 0)`` covers the start hour and the four hours before it,
    wrapping into the neighbouring days of the week.
    """
    windows = list(windows)
    if not windows:
        raise InvalidArgumentError("at least one window is required")
    flat = counter.buckets.reshape(-1)
    base = day_of_week(slot.start) * 24 + hour_of_day(slot.start)
    sums = {}
    for lo, hi in windows:
        if lo > hi:
            raise InvalidArgumentError(f"window ({lo}, {hi}) is not well ordered")
        idx = (base + np.arange(lo, hi + 1)) % N_BUCKETS
        sums[(lo, hi)] = float(flat[idx].sum())
    weekly = tuple(int(v) for v in counter.weekly_aggregate())
    return WindowedActivityFeatures(counter.user, slot, sums, weekly)


# synthetic predictors

PREDICTOR_SHAPES = ("constant", "unimodal", "bimodal", "mixture")
_PREDICTOR_KEYS = {"shape", "peaks", "amplitudes", "width", "baseline", "level",
                   "user_jitter", "utc_offset"}
_COUNTER_KEYS = {"channel", "decay"}


@dataclass(frozen=True)
class SignalProvider:
    """A named metric source. ``kind`` is ``"counter"`` or ``"predictor"``."""

    metric: str
    kind: str
    parameters: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("counter", "predictor"):
            raise ConfigurationError(f"unknown provider kind {self.kind!r}")
        allowed = _PREDICTOR_KEYS if self.kind == "predictor" else _COUNTER_KEYS
        unknown = set(self.parameters) - allowed
        if unknown:
            raise ConfigurationError(
                f"provider {self.metric!r}: unknown parameters {sorted(unknown)}")
        if self.kind == "predictor":
            shape = self.parameters.get("shape", "unimodal")
            if shape not in PREDICTOR_SHAPES:
                raise ConfigurationError(f"provider {self.metric!r}: unknown shape {shape!r}")


def stable_hash(*parts) -> int:
    """64-bit hash that is identical across processes (unlike ``hash``)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def circular_distance(a, b, period=24.0):
    d = np.abs(np.asarray(a, dtype=float) - b) % period
    return np.minimum(d, period - d)


def _predictor_curve(params, hours, user):
    shape = params.get("shape", "unimodal")
    baseline = float(params.get("baseline", 0.0))
    if shape == "constant":
        return np.full(len(hours), float(params.get("level", 1.0)))
    peaks = [float(p) for p in params.get("peaks", [20.0])]
    if shape == "unimodal" and len(peaks) != 1:
        raise ConfigurationError("unimodal provider takes exactly one peak")
    if shape == "bimodal" and len(peaks) != 2:
        raise ConfigurationError("bimodal provider takes exactly two peaks")
    amps = [float(a) for a in params.get("amplitudes", [1.0] * len(peaks))]
    if len(amps) != len(peaks):
        raise ConfigurationError("amplitudes and peaks must have the same length")
    width = float(params.get("width", 2.0))
    if width <= 0:
        raise ConfigurationError("width must be positive")
    jitter = float(params.get("user_jitter", 0.0))
    shift = 0.0
    if jitter:
        shift = (stable_hash("predictor", user) / 2.0 ** 64 * 2.0 - 1.0) * jitter
    curve = np.full(len(hours), baseline)
    for c, a in zip(peaks, amps):
        d = circular_distance(hours, c + shift)
        curve += a * np.exp(-0.5 * (d / width) ** 2)
    return curve


def synthetic_predictor_signal(provider: SignalProvider, user, slots: list[TimeSlot],
                               user_utc_offset=None) -> dict[int, float]:
    """Deterministic stand-in for a learned per-slot predictor.

    The curve is a sum of circular Gaussian bumps over the user's local hour
    of day; ``user_jitter`` shifts all peaks by a per-user amount derived from
    a stable hash of the user id.
    """
    if provider.kind != "predictor":
        raise ConfigurationError(f"provider {provider.metric!r} is not a predictor")
    offset = provider.parameters.get("utc_offset", 0) if user_utc_offset is None \
        else user_utc_offset
    _check_offset(offset)
    hours = np.array([((s.start + offset * 60) % DAY) / HOUR for s in slots])
    curve = _predictor_curve(provider.parameters, hours, user)
    return {s.index: float(v) for s, v in zip(slots, curve)}


def write_counters_csv(counters: Iterable[ActivityCounter], fh, header=True):
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(COUNTER_CSV_HEADER)
    for c in counters:
        writer.writerows(c.csv_rows())


def read_counters_csv(fh) -> list[ActivityCounter]:
    counters: dict[tuple, ActivityCounter] = {}
    for row in csv.DictReader(fh):
        try:
            key = (row["user"], row["channel"])
            c = counters.setdefault(key, ActivityCounter(*key))
            c.increment(int(row["dow"]), int(row["hour"]), int(row["count"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed counter row {row}: {exc}") from exc
    return list(counters.values())


def counters_from_events(rows: Iterable[Mapping]) -> list[ActivityCounter]:
    """Ingest ``user,channel,timestamp[,utc_offset]`` event records."""
    counters: dict[tuple, ActivityCounter] = {}
    for row in rows:
        try:
            key = (row["user"], row["channel"])
            ts = int(float(row["timestamp"]))
            offset = int(row.get("utc_offset") or 0)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed event row {row}: {exc}") from exc
        record_activity(counters.setdefault(key, ActivityCounter(*key)), ts, offset)
    return list(counters.values())


def hourly_bucket_index(ts: int) -> int:
    return day_of_week(ts) * 24 + hour_of_day(ts)

