"""Best-time policies: turn a ranked activity map into N jittered timestamps."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import EmptyCandidateError, InvalidArgumentError
from .slots import TemporalActivityMap, TimeSlot, partition_range

POLICY_KINDS = ("top_n", "avoid_nearby")
PRIORITIES = ("high", "low")


@dataclass(frozen=True)
class BestTimePolicy:
    """``w`` is the avoidance half-width in slots; ``w == 0`` under
    ``avoid_nearby`` picks the same slots as ``top_n``. ``fallback`` refills
    an underfilled avoid-nearby pick from slots the window removed."""

    kind: str = "top_n"
    w: int = 0
    priority: str = "high"
    fallback: bool = True

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise InvalidArgumentError(f"unknown policy kind {self.kind!r}")
        if self.priority not in PRIORITIES:
            raise InvalidArgumentError(f"unknown priority {self.priority!r}")
        if int(self.w) != self.w or self.w < 0:
            raise InvalidArgumentError(f"avoidance window must be a non-negative int, got {self.w}")

    def to_dict(self):
        return {"kind": self.kind, "w": self.w, "priority": self.priority}

    @classmethod
    def from_dict(cls, doc, default_priority="high"):
        doc = dict(doc or {})
        unknown = set(doc) - {"kind", "w", "priority", "fallback"}
        if unknown:
            raise InvalidArgumentError(f"unknown policy fields {sorted(unknown)}")
        return cls(doc.get("kind", "top_n"), int(doc.get("w", 0)),
                   doc.get("priority", default_priority), bool(doc.get("fallback", True)))


def _top(scores: Mapping[int, float]) -> int:
    # highest score, earliest slot on ties
    return min(scores, key=lambda s: (-scores[s], s))


def _entries(vmap):
    if isinstance(vmap, TemporalActivityMap):
        return vmap.scores()
    return dict(vmap)


def top_n_policy(vmap, n: int) -> list[int]:
    scores = _entries(vmap)
    if not scores:
        raise EmptyCandidateError("activity map is empty")
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    return sorted(scores, key=lambda s: (-scores[s], s))[:n]


@dataclass(frozen=True)
class Selection:
    slots: list
    refilled: list = field(default_factory=list)
    tier_removed: int | None = None


def avoid_nearby_selection(vmap, n: int, w: int, priority: str = "high",
                           fallback: bool = True) -> Selection:
    """Avoid-w-nearby selection with the refill bookkeeping exposed.

    Low priority drops the single top slot before anything is picked. Each
    pick then removes every slot within ``w`` indices of it. If the map runs
    dry before ``n`` picks and ``fallback`` is on, the shortfall is refilled
    from window-removed slots in original score order; the tier-removed peak
    is never refilled.
    """
    original = _entries(vmap)
    if not original:
        raise EmptyCandidateError("activity map is empty")
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if w < 0:
        raise InvalidArgumentError(f"w must be >= 0, got {w}")
    if priority not in PRIORITIES:
        raise InvalidArgumentError(f"unknown priority {priority!r}")

    scores = dict(original)
    tier_removed = None
    if priority == "low":
        tier_removed = _top(scores)
        del scores[tier_removed]

    chosen, evicted = [], []
    while len(chosen) < n and scores:
        best = _top(scores)
        chosen.append(best)
        for t in [t for t in scores if best - w <= t <= best + w]:
            del scores[t]
            if t != best:
                evicted.append(t)

    refilled = []
    if fallback and len(chosen) < n:
        pool = sorted(evicted, key=lambda s: (-original[s], s))
        refilled = pool[:n - len(chosen)]
    return Selection(chosen + refilled, refilled, tier_removed)


def avoid_nearby_policy(vmap, n: int, w: int, priority: str = "high",
                        fallback: bool = True) -> list[int]:
    return avoid_nearby_selection(vmap, n, w, priority, fallback).slots


def select_slots(vmap, n: int, policy: BestTimePolicy) -> Selection:
    if policy.kind == "avoid_nearby":
        return avoid_nearby_selection(vmap, n, policy.w, policy.priority, policy.fallback)
    if policy.priority == "low":
        # tier rule applies to every policy kind; w=0 is plain top-N after it
        return avoid_nearby_selection(vmap, n, 0, "low", policy.fallback)
    return Selection(top_n_policy(vmap, n))


def apply_jitter(slots: list[TimeSlot], rng_seed) -> list[int]:
    """``slot.start + eps`` with integer ``eps`` uniform on ``[0, length)``."""
    if not slots:
        raise InvalidArgumentError("apply_jitter needs at least one slot")
    rng = np.random.default_rng(rng_seed)
    starts = np.array([s.start for s in slots], dtype=np.int64)
    lengths = np.array([s.length for s in slots], dtype=np.int64)
    return (starts + rng.integers(0, lengths)).tolist()


@dataclass(frozen=True)
class SchedulingRequest:
    use_case: str
    user: str
    t_start: int
    t_end: int
    n: int
    slot_length: int
    policy: BestTimePolicy = field(default_factory=BestTimePolicy)
    metric_spec: str | None = None
    explore: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgumentError(f"n must be >= 1, got {self.n}")
        if self.slot_length <= 0:
            raise InvalidArgumentError(f"slot_length must be positive, got {self.slot_length}")
        if self.t_end - self.t_start < self.slot_length:
            raise InvalidArgumentError("execution range is shorter than one slot")

    def candidates(self) -> list[TimeSlot]:
        return partition_range(self.t_start, self.t_end, self.slot_length)

    @classmethod
    def from_dict(cls, doc, default_priority="high"):
        if not isinstance(doc, Mapping):
            raise InvalidArgumentError("request must be a JSON object")
        try:
            return cls(
                use_case=str(doc["use_case"]),
                user=str(doc["user"]),
                t_start=int(doc["t_start"]),
                t_end=int(doc["t_end"]),
                n=int(doc["n"]),
                slot_length=int(doc["slot_length"]),
                policy=BestTimePolicy.from_dict(doc.get("policy"), default_priority),
                metric_spec=doc.get("metric_spec"),
                explore=bool(doc.get("explore", False)),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"request is missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed request: {exc}") from None

    def to_dict(self):
        doc = {"use_case": self.use_case, "user": self.user, "t_start": self.t_start,
               "t_end": self.t_end, "n": self.n, "slot_length": self.slot_length,
               "policy": self.policy.to_dict()}
        if self.explore:
            doc["explore"] = True
        return doc


@dataclass(frozen=True)
class ExecutionPlan:
    use_case: str
    user: str
    timestamps: list
    chosen_slots: list
    jitter_seed: int
    truncated: bool = False
    refilled: list = field(default_factory=list)
    uniform_fallback: bool = False
    explored: bool = False

    def to_dict(self):
        return {
            "use_case": self.use_case,
            "user": self.user,
            "slots": list(self.chosen_slots),
            "timestamps": list(self.timestamps),
            "seed": self.jitter_seed,
            "truncated": self.truncated,
            "refilled": list(self.refilled),
            "uniform_fallback": self.uniform_fallback,
            "explored": self.explored,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["use_case"], doc["user"], list(doc["timestamps"]), list(doc["slots"]),
                   doc["seed"], doc.get("truncated", False), list(doc.get("refilled", [])),
                   doc.get("uniform_fallback", False), doc.get("explored", False))


def schedule(request: SchedulingRequest, vmap: TemporalActivityMap, rng_seed: int,
             uniform_fallback: bool = False) -> ExecutionPlan:
    """Pick slots with the request's policy, jitter them, order by time.

    Exploration requests and uniform-fallback maps carry no ranking signal,
    so both draw a seeded random subset of the scored slots instead.
    """
    candidates = {s.index: s for s in request.candidates()}
    stray = [s for s in vmap.entries if s not in candidates]
    if stray:
        raise InvalidArgumentError(f"map slots {stray} are outside the request range")
    if not len(vmap):
        raise EmptyCandidateError(f"no scored slots for user {request.user!r}")

    if request.explore or uniform_fallback:
        rng = np.random.default_rng([rng_seed, 1])
        pool = sorted(vmap.entries)
        picks = [pool[i] for i in rng.permutation(len(pool))[:request.n]]
        selection = Selection(picks)
    else:
        selection = select_slots(vmap, request.n, request.policy)

    if not selection.slots:
        return ExecutionPlan(request.use_case, request.user, [], [], rng_seed, True, [],
                             uniform_fallback, request.explore)
    stamps = apply_jitter([candidates[s] for s in selection.slots], rng_seed)
    pairs = sorted(zip(stamps, selection.slots))
    return ExecutionPlan(
        request.use_case, request.user,
        [t for t, _ in pairs], [s for _, s in pairs], rng_seed,
        truncated=len(pairs) < request.n,
        refilled=list(selection.refilled),
        uniform_fallback=uniform_fallback,
        explored=request.explore,
    )
