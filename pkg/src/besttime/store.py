"""Day-of-week keyed signal store with atomic, versioned partition swaps.

Each of the seven partitions (0 = Sunday) holds one map per (user, metric),
plus optional per-user channel activity levels. Stored maps are keyed by
hour of day. A publish replaces a whole partition: the new snapshot is
written to a temp file and moved into place with ``os.replace``, so a reader
sees either the old partition or the new one, never a mix.
"""
from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import InvalidArgumentError, NotFoundError, PublishRejectedError
from .slots import TemporalActivityMap

STORE_ENV = "BESTTIME_STORE"
N_PARTITIONS = 7


def check_day(day):
    if isinstance(day, bool) or not isinstance(day, int) or not 0 <= day < N_PARTITIONS:
        raise InvalidArgumentError(f"day-of-week partition must be 0-6, got {day!r}")


@dataclass(frozen=True)
class Partition:
    """Immutable snapshot of one day partition."""

    day: int
    version: int
    maps: Mapping = field(default_factory=dict)      # (user, metric) -> map
    levels: Mapping = field(default_factory=dict)    # user -> {metric: level}

    def get(self, user, metric) -> TemporalActivityMap:
        try:
            return self.maps[(user, metric)]
        except KeyError:
            raise NotFoundError(
                f"no map for user {user!r}, metric {metric!r} on day {self.day}") from None

    def user_maps(self, user) -> dict:
        return {m: vm for (u, m), vm in self.maps.items() if u == user}

    def level(self, user, metric, default=1.0) -> float:
        return float(self.levels.get(user, {}).get(metric, default))

    def to_json(self) -> str:
        doc = {
            "day": self.day,
            "version": self.version,
            "maps": [self.maps[k].to_dict() for k in sorted(self.maps)],
            "levels": {u: dict(sorted(v.items())) for u, v in sorted(self.levels.items())},
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text) -> "Partition":
        doc = json.loads(text)
        maps = {}
        for d in doc["maps"]:
            vm = TemporalActivityMap.from_dict(d)
            maps[(vm.user, vm.metric)] = vm
        levels = {u: {m: float(x) for m, x in v.items()} for u, v in doc.get("levels", {}).items()}
        return cls(int(doc["day"]), int(doc["version"]), MappingProxyType(maps),
                   MappingProxyType(levels))


def _validate_batch(day, maps, levels, expected) -> tuple[dict, dict]:
    batch = {}
    for vm in maps:
        if not isinstance(vm, TemporalActivityMap):
            raise PublishRejectedError(f"day {day}: batch item {vm!r} is not an activity map")
        key = (vm.user, vm.metric)
        if key in batch:
            raise PublishRejectedError(f"day {day}: duplicate map for {key}")
        bad = [s for s in vm.entries if not 0 <= s < 24]
        if bad:
            raise PublishRejectedError(f"day {day}: map {key} has hour keys {bad} outside 0-23")
        batch[key] = vm
    if expected is not None:
        missing = set(map(tuple, expected)) - set(batch)
        if missing:
            raise PublishRejectedError(
                f"day {day}: partial batch, missing {sorted(missing)[:5]} "
                f"({len(missing)} of {len(set(map(tuple, expected)))})")
    clean_levels = {}
    for user, per_metric in dict(levels or {}).items():
        clean_levels[user] = {}
        for metric, x in dict(per_metric).items():
            x = float(x)
            if not 0.0 <= x <= 1.0:
                raise PublishRejectedError(
                    f"day {day}: activity level {x} for {user!r}/{metric!r} outside [0, 1]")
            clean_levels[user][metric] = x
    return batch, clean_levels


class SignalStore:
    """Seven day partitions; file-backed when ``root`` is given, else in memory.

    Many concurrent readers, one publisher per partition. The version counter
    is store-wide and increases by one per successful publish.
    """

    def __init__(self, root: str | os.PathLike | None = None):
        self.root = Path(root) if root is not None else None
        self._lock = threading.Lock()
        self._memory: dict[int, Partition] = {}
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    @classmethod
    def from_env(cls, default=None) -> "SignalStore":
        return cls(os.environ.get(STORE_ENV) or default)

    def _path(self, day) -> Path:
        return self.root / f"day-{day}.json"

    @property
    def version(self) -> int:
        return max((self.read(d).version for d in range(N_PARTITIONS)), default=0)

    def read(self, day: int) -> Partition:
        check_day(day)
        if self.root is None:
            return self._memory.get(day) or Partition(day, 0)
        try:
            text = self._path(day).read_text()
        except FileNotFoundError:
            return Partition(day, 0)
        return Partition.from_json(text)

    def read_bytes(self, day: int) -> bytes:
        return self.read(day).to_json().encode()

    def publish(self, day: int, maps: Iterable[TemporalActivityMap], levels=None,
                expected: Iterable[tuple] | None = None) -> int:
        check_day(day)
        batch, clean_levels = _validate_batch(day, list(maps), levels, expected)
        with self._lock:
            version = self.version + 1
            part = Partition(day, version, MappingProxyType(batch),
                             MappingProxyType(clean_levels))
            if self.root is None:
                self._memory[day] = part
            else:
                self._write(day, part.to_json())
        return version

    def _write(self, day, text):
        fd, tmp = tempfile.mkstemp(prefix=f".day-{day}-", suffix=".tmp", dir=self.root)
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self._path(day))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def publish_maps(store: SignalStore, day: int, maps: Iterable[TemporalActivityMap],
                 levels: Mapping | None = None, expected=None) -> int:
    """Atomically replace partition ``day``; returns the new store version.

    ``expected`` optionally lists the (user, metric) keys the batch must
    cover; a batch missing any of them is rejected and the old partition
    stays in place.
    """
    return store.publish(day, maps, levels, expected)
