"""Batch scheduling endpoint over the signal store.

Each request is resolved independently: its use case picks the assembler
spec and default policy, the stored per-metric maps for the request's days
are projected onto the request's candidate slots, assembled, and handed to
the policy. A failing request becomes an error record; the rest of the
batch is unaffected.
"""
from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .assembler import assemble
from .config import DeploymentConfig
from .errors import BestTimeError, DegenerateAssemblyError, InvalidArgumentError
from .policy import ExecutionPlan, SchedulingRequest, schedule
from .signals import day_of_week, stable_hash
from .slots import HOUR, TemporalActivityMap, TimeSlot, uniform_map
from .store import Partition, SignalStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RequestError:
    index: int
    code: str
    message: str
    use_case: str | None = None
    user: str | None = None

    def to_dict(self):
        return {"index": self.index, "error": self.code, "message": self.message,
                "use_case": self.use_case, "user": self.user}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def request_seed(seed: int, request: SchedulingRequest) -> int:
    """Per-request jitter seed; depends on the request, not its batch position."""
    return stable_hash("request", seed, request.use_case, request.user, request.t_start,
                       request.t_end, request.n, request.slot_length) >> 1


def _hours_of(slot: TimeSlot):
    first = slot.start // HOUR
    last = max(-(-slot.end // HOUR), first + 1)
    return [(day_of_week(h * HOUR), h % 24) for h in range(first, last)]


def slot_scores(stored: Mapping[int, TemporalActivityMap], slots: Sequence[TimeSlot]
                ) -> dict[int, float]:
    """Project hour-of-day maps (one per weekday) onto request slots.

    A slot scores the mean of the stored hours it overlaps; hours with no
    stored score are skipped, and a slot with none at all is left out.
    """
    out = {}
    for slot in slots:
        vals = [stored[d].entries[h] for d, h in _hours_of(slot)
                if d in stored and h in stored[d].entries]
        if vals:
            out[slot.index] = sum(vals) / len(vals)
    return out


class _Snapshot:
    """Reads each partition at most once per batch so every request in the
    batch sees the same store version."""

    def __init__(self, store: SignalStore):
        self.store = store
        self._parts: dict[int, Partition] = {}

    def __call__(self, day) -> Partition:
        if day not in self._parts:
            self._parts[day] = self.store.read(day)
        return self._parts[day]

    def preload(self, days):
        for d in sorted(days):
            self(d)


def _parse(item, index, config: DeploymentConfig) -> SchedulingRequest:
    if isinstance(item, SchedulingRequest):
        return item
    if not isinstance(item, Mapping):
        raise InvalidArgumentError("request must be a JSON object")
    uc = config.use_case(str(item.get("use_case")))
    doc = dict(item)
    if doc.get("policy") is None:
        doc["policy"] = uc.policy.to_dict()
    return SchedulingRequest.from_dict(doc, default_priority=uc.tier)


def plan_request(request: SchedulingRequest, snapshot, config: DeploymentConfig,
                 seed: int) -> ExecutionPlan:
    uc = config.use_case(request.use_case)
    spec = config.use_case(request.metric_spec).spec if request.metric_spec else uc.spec
    slots = request.candidates()
    days = sorted({d for s in slots for d, _ in _hours_of(s)})
    first_day = day_of_week(slots[0].start)

    maps, levels = {}, {}
    for metric in spec.metrics:
        stored = {}
        for d in days:
            part = snapshot(d)
            if (request.user, metric) in part.maps:
                stored[d] = part.maps[(request.user, metric)]
        scores = slot_scores(stored, slots)
        if scores:
            maps[metric] = TemporalActivityMap(request.user, metric, scores)
        levels[metric] = snapshot(first_day).level(request.user, metric)

    fallback = False
    vmap = None
    if maps:
        try:
            vmap = assemble(spec, maps, levels)
        except DegenerateAssemblyError as exc:
            log.info("%s/%s: %s; using a uniform map", request.use_case, request.user, exc)
    if vmap is None:
        fallback = True
        vmap = uniform_map(request.user, spec.use_case, [s.index for s in slots])
    return schedule(request, vmap, request_seed(seed, request), uniform_fallback=fallback)


def handle_batch(requests: Iterable, store: SignalStore, config: DeploymentConfig,
                 seed: int = 0, workers: int = 1) -> list:
    """One ExecutionPlan or RequestError per request, in request order.

    Results depend only on (requests, store contents, seed); the worker
    count changes throughput, not output.
    """
    items = list(requests)
    snapshot = _Snapshot(store)
    snapshot.preload(range(7))

    def run(pair):
        index, item = pair
        req = None
        try:
            req = _parse(item, index, config)
            return plan_request(req, snapshot, config, seed)
        except BestTimeError as exc:
            uc = req.use_case if req else (item.get("use_case") if isinstance(item, Mapping) else None)
            user = req.user if req else (item.get("user") if isinstance(item, Mapping) else None)
            return RequestError(index, exc.code, str(exc),
                                None if uc is None else str(uc), None if user is None else str(user))

    if workers <= 1:
        return [run(p) for p in enumerate(items)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, enumerate(items)))


def result_line(result) -> str:
    return result.to_json()


def serve(store: SignalStore, config: DeploymentConfig, seed: int = 0, stdin=None,
          stdout=None, workers: int = 1):
    """JSON-lines loop: each input line is one request object or an array of
    them; one output line is written per request."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            stdout.write(RequestError(-1, "invalid-argument", f"bad JSON: {exc}").to_json() + "\n")
            stdout.flush()
            continue
        batch = doc if isinstance(doc, list) else [doc]
        for r in handle_batch(batch, store, config, seed, workers):
            stdout.write(result_line(r) + "\n")
        stdout.flush()
