"""Signal assembly and ensemble weight learning.

A use case combines several normalized metric maps into one map with
per-metric weights, each gated by the user's activity on the metric's
channel. The weights are fitted by non-negative least squares against
ground-truth slot ranks (feature-weighted linear stacking).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import nnls

from .errors import DegenerateAssemblyError, InvalidArgumentError, NotFoundError
from .signals import ChannelActivityLevel
from .slots import TemporalActivityMap

log = logging.getLogger(__name__)

TRAINING_CSV_HEADER = ("user", "slot", "actual_rank", "metric", "metric_rank",
                       "activity_level")


@dataclass(frozen=True)
class AssemblerSpec:
    use_case: str
    metrics: tuple
    weights: Mapping[str, float]

    def __post_init__(self):
        metrics = tuple(self.metrics)
        weights = {m: float(w) for m, w in dict(self.weights).items()}
        if set(metrics) != set(weights) or len(set(metrics)) != len(metrics):
            raise InvalidArgumentError(
                f"use case {self.use_case!r}: metrics {list(metrics)} and weights "
                f"{sorted(weights)} disagree")
        if any(w < 0 for w in weights.values()):
            raise InvalidArgumentError(f"use case {self.use_case!r}: negative weight")
        if not any(w > 0 for w in weights.values()):
            raise InvalidArgumentError(f"use case {self.use_case!r}: all weights are zero")
        object.__setattr__(self, "metrics", metrics)
        object.__setattr__(self, "weights", {m: weights[m] for m in metrics})

    def to_dict(self):
        return {"use_case": self.use_case, "metrics": list(self.metrics),
                "weights": dict(self.weights)}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["use_case"], tuple(doc["metrics"]), doc["weights"])


def _level(value) -> float:
    if isinstance(value, ChannelActivityLevel):
        return value.level
    return float(value)


def assemble(spec: AssemblerSpec, maps: Mapping[str, TemporalActivityMap],
             activity_levels: Mapping) -> TemporalActivityMap:
    """Weighted, activity-gated sum of metric maps, rescaled into [0, 1].

    Slots missing from a metric's map count as 0 for that metric. The sum is
    divided by the total effective weight so scores stay normalized.
    """
    effective = {}
    for m in spec.metrics:
        if m not in activity_levels:
            raise InvalidArgumentError(f"no activity level for metric {m!r}")
        effective[m] = spec.weights[m] * _level(activity_levels[m])
    total = sum(effective.values())
    if not spec.metrics or total <= 0:
        raise DegenerateAssemblyError(
            f"use case {spec.use_case!r}: effective weights sum to zero")

    present = [maps[m] for m in spec.metrics if m in maps]
    users = {vm.user for vm in present}
    if len(users) > 1:
        raise InvalidArgumentError(f"maps belong to different users: {sorted(users)}")
    if not present:
        raise DegenerateAssemblyError(f"use case {spec.use_case!r}: no metric maps")
    slots = sorted(set().union(*(vm.entries for vm in present)))

    out = {}
    for s in slots:
        acc = 0.0
        for m in spec.metrics:
            if m in maps and effective[m]:
                acc += effective[m] * maps[m].entries.get(s, 0.0)
        out[s] = min(1.0, acc / total)
    return TemporalActivityMap(users.pop(), spec.use_case, out)


def rank_slots(vmap: Mapping[int, float] | TemporalActivityMap) -> list[int]:
    """Slots best-first; equal scores keep ascending slot order."""
    entries = vmap.entries if isinstance(vmap, TemporalActivityMap) else vmap
    return sorted(entries, key=lambda s: (-entries[s], s))


def rank_indices(vmap) -> dict[int, int]:
    return {s: r for r, s in enumerate(rank_slots(vmap))}


def predicted_rank_index(vmap: TemporalActivityMap, slot: int) -> int:
    if slot not in vmap.entries:
        raise NotFoundError(f"slot {slot} not in map for user {vmap.user!r}")
    score = vmap.entries[slot]
    return sum(1 for s, v in vmap.entries.items() if v > score or (v == score and s < slot))


@dataclass(frozen=True)
class GroundTruthRanking:
    user: str
    use_case: str
    ordered_slots: tuple

    def __post_init__(self):
        ordered = tuple(self.ordered_slots)
        if len(set(ordered)) != len(ordered):
            raise InvalidArgumentError(f"duplicate slots in ground truth for {self.user!r}")
        object.__setattr__(self, "ordered_slots", ordered)

    def actual_ranks(self) -> dict[int, int]:
        return {s: i for i, s in enumerate(self.ordered_slots)}


@dataclass(frozen=True)
class RankLossReport:
    loss: float
    n: int
    weights: Mapping[str, float]


def rank_loss(weights: Mapping[str, float], per_metric_ranks: Mapping,
              activity_levels: Mapping, ground_truth: Iterable[GroundTruthRanking]
              ) -> RankLossReport:
    """Mean squared gap between gated weighted predicted ranks and actual ranks.

    ``per_metric_ranks[(user, slot)][metric]`` is a predicted rank and
    ``activity_levels[user][metric]`` the channel gate.
    """
    ground_truth = list(ground_truth)
    total, n = 0.0, 0
    for gt in ground_truth:
        levels = activity_levels[gt.user]
        for actual, slot in enumerate(gt.ordered_slots):
            try:
                ranks = per_metric_ranks[(gt.user, slot)]
            except KeyError:
                raise InvalidArgumentError(
                    f"no predicted ranks for user {gt.user!r} slot {slot}") from None
            pred = sum(w * _level(levels[m]) * ranks[m] for m, w in weights.items())
            total += (pred - actual) ** 2
            n += 1
    if n == 0:
        raise InvalidArgumentError("ground truth is empty")
    return RankLossReport(total / n, n, dict(weights))


@dataclass
class TrainingExample:
    """One user's rows: predicted ranks per slot and metric, gates, targets.

    ``actual_ranks`` may be real-valued (e.g. averaged ranks over days).
    """

    user: str
    per_metric_ranks: Mapping[int, Mapping[str, float]]
    activity_levels: Mapping[str, float]
    actual_ranks: Mapping[int, float]

    @classmethod
    def from_ground_truth(cls, per_metric_ranks, activity_levels, gt: GroundTruthRanking):
        return cls(gt.user, per_metric_ranks, activity_levels, gt.actual_ranks())


@dataclass
class LearnerConfig:
    use_case: str = "default"
    ridge_lambda: float = 1e-3
    # design matrices with condition number above this use the ridge solve
    max_condition: float = 1e10


@dataclass
class LearnedWeights:
    spec: AssemblerSpec
    report: RankLossReport
    init_loss: float
    ridge: bool = False
    kept_init: bool = False
    notes: list = field(default_factory=list)


def _as_example(item) -> TrainingExample:
    if isinstance(item, TrainingExample):
        return item
    ranks, levels, gt = item
    if isinstance(gt, GroundTruthRanking):
        return TrainingExample.from_ground_truth(ranks, levels, gt)
    raise InvalidArgumentError(f"unsupported training item {type(item).__name__}")


def design_matrix(examples: Sequence[TrainingExample], metrics: Sequence[str]):
    rows, targets = [], []
    for ex in examples:
        gates = np.array([_level(ex.activity_levels.get(m, 0.0)) for m in metrics])
        for slot, actual in ex.actual_ranks.items():
            try:
                ranks = ex.per_metric_ranks[slot]
                rows.append(gates * np.array([float(ranks[m]) for m in metrics]))
            except KeyError as exc:
                raise InvalidArgumentError(
                    f"user {ex.user!r} slot {slot} lacks a rank for {exc}") from None
            targets.append(float(actual))
    return np.array(rows, dtype=float).reshape(-1, len(metrics)), np.array(targets)


def _loss(X, y, w):
    r = X @ w - y
    return float(r @ r) / len(y)


def learn_weights(training, init: Mapping[str, float],
                  config: LearnerConfig | None = None) -> LearnedWeights:
    """Fit non-negative per-metric weights minimizing the squared rank loss.

    The loss is quadratic in the weights, so the fit is an ordinary
    least-squares problem over gated rank features. An unconstrained solve is
    tried first and NNLS takes over if it goes negative. Rank-deficient or
    ill-conditioned designs are solved with a ridge penalty and flagged.
    """
    config = config or LearnerConfig()
    examples = [_as_example(t) for t in training]
    if not examples:
        raise InvalidArgumentError("training set is empty")
    metrics = list(init)
    if not metrics:
        raise InvalidArgumentError("at least one metric is required")
    X, y = design_matrix(examples, metrics)
    if len(y) == 0:
        raise InvalidArgumentError("training set has no ranked slots")
    w0 = np.array([float(init[m]) for m in metrics])
    init_loss = _loss(X, y, w0)

    notes = []
    k = len(metrics)
    sv = np.linalg.svd(X, compute_uv=False)
    ridge = bool(sv[-1] == 0 or sv[0] / sv[-1] > config.max_condition or len(y) < k)
    if ridge:
        lam = config.ridge_lambda
        Xa = np.vstack([X, np.sqrt(lam * len(y)) * np.eye(k)])
        ya = np.concatenate([y, np.zeros(k)])
        w, _ = nnls(Xa, ya)
        notes.append(f"rank-deficient design; ridge solve with lambda={lam}")
        log.info("use case %s: %s", config.use_case, notes[-1])
    else:
        w, *_ = np.linalg.lstsq(X, y, rcond=None)
        if (w < 0).any():
            w, _ = nnls(X, y)

    kept_init = False
    loss = _loss(X, y, w)
    if (loss > init_loss and (w0 >= 0).all() and (w0 > 0).any()) or not (w > 0).any():
        notes.append("solution did not improve on the initial weights; kept init")
        w, loss, kept_init = w0, init_loss, True

    weights = {m: float(v) for m, v in zip(metrics, w)}
    spec = AssemblerSpec(config.use_case, tuple(metrics), weights)
    return LearnedWeights(spec, RankLossReport(loss, len(y), weights), init_loss,
                          ridge, kept_init, notes)


def read_training_csv(fh) -> list[TrainingExample]:
    """Long-format rows ``user,slot,actual_rank,metric,metric_rank,activity_level``."""
    users: dict[str, TrainingExample] = {}
    for row in csv.DictReader(fh):
        try:
            user, slot, metric = row["user"], int(row["slot"]), row["metric"]
            ex = users.setdefault(user, TrainingExample(user, {}, {}, {}))
            ex.actual_ranks[slot] = float(row["actual_rank"])
            ex.per_metric_ranks.setdefault(slot, {})[metric] = float(row["metric_rank"])
            ex.activity_levels[metric] = float(row["activity_level"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed training row {row}: {exc}") from exc
    return list(users.values())


def write_training_csv(examples: Iterable[TrainingExample], fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRAINING_CSV_HEADER)
    for ex in examples:
        for slot, actual in ex.actual_ranks.items():
            for metric, r in ex.per_metric_ranks[slot].items():
                writer.writerow((ex.user, slot, repr(float(actual)), metric, repr(float(r)),
                                 repr(float(ex.activity_levels[metric]))))


def training_metrics(examples: Iterable[TrainingExample]) -> list[str]:
    seen = {}
    for ex in examples:
        for ranks in ex.per_metric_ranks.values():
            for m in ranks:
                seen.setdefault(m, None)
    return list(seen)
