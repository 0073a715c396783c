"""Offline ranking quality, efficiency ratios and activity-cohort breakdowns."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import InvalidArgumentError, UndefinedRatioError

N_DECILES = 10


@dataclass(frozen=True)
class NdcgReport:
    user: str | None
    k: int
    ndcg: float
    zero_gain: bool = False


def _dcg(gains) -> float:
    return sum(g / math.log2(i + 2) for i, g in enumerate(gains))


def ndcg(predicted_order: Sequence[int], actual_gains: Mapping[int, float], k: int,
         user=None) -> NdcgReport:
    """NDCG@k with linear gains (the slot's actual activity value).

    The ideal ordering ranks every slot in ``actual_gains``. Users whose gains
    are all zero score 1.0 and carry ``zero_gain=True``.
    """
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    if not len(predicted_order):
        raise InvalidArgumentError("predicted order is empty")
    if len(set(predicted_order)) != len(predicted_order):
        raise InvalidArgumentError("predicted order repeats a slot")
    if any(g < 0 for g in actual_gains.values()):
        raise InvalidArgumentError("gains must be non-negative")
    ideal = _dcg(sorted(actual_gains.values(), reverse=True)[:k])
    if ideal == 0:
        return NdcgReport(user, k, 1.0, zero_gain=True)
    dcg = _dcg([actual_gains.get(s, 0.0) for s in list(predicted_order)[:k]])
    return NdcgReport(user, k, min(1.0, dcg / ideal))


@dataclass(frozen=True)
class NdcgSummary:
    mean: float
    mean_excluding_zero_gain: float
    n_users: int
    n_zero_gain: int


def summarize_ndcg(reports: Iterable[NdcgReport]) -> NdcgSummary:
    reports = list(reports)
    if not reports:
        raise InvalidArgumentError("no NDCG reports to summarize")
    scored = [r.ndcg for r in reports if not r.zero_gain]
    return NdcgSummary(
        float(np.mean([r.ndcg for r in reports])),
        float(np.mean(scored)) if scored else float("nan"),
        len(reports), len(reports) - len(scored))


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> float:
    return float(stats.kendalltau(a, b).statistic)


def efficiency_ratio(engagements: float, executions: int) -> float:
    if executions < 1:
        raise UndefinedRatioError(f"efficiency undefined for {executions} executions")
    return engagements / executions


def relative_lift(test: float, control: float) -> float:
    if control == 0:
        raise UndefinedRatioError("lift undefined against a zero control")
    return test / control - 1.0


def format_lift(lift: float, digits=1) -> str:
    return f"{lift * 100:+.{digits}f}%"


@dataclass(frozen=True)
class EfficiencyReport:
    group: str
    metric_total: float
    execution_volume: int
    efficiency: float

    @classmethod
    def of(cls, group, metric_total, execution_volume):
        return cls(group, float(metric_total), int(execution_volume),
                   efficiency_ratio(metric_total, execution_volume))


def decile_edges(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.quantile(values, np.arange(1, N_DECILES) / N_DECILES)


def assign_deciles(values, edges=None) -> np.ndarray:
    """Decile 0-9 of each value; population quantiles unless ``edges`` given."""
    values = np.asarray(values, dtype=float)
    if edges is None:
        edges = decile_edges(values)
    return np.searchsorted(edges, values, side="right").clip(0, N_DECILES - 1)


@dataclass(frozen=True)
class CohortCell:
    mean: float
    count: int


@dataclass
class CohortTable:
    channels: tuple
    cells: dict  # decile tuple -> CohortCell

    @property
    def dims(self):
        return len(self.channels)

    @property
    def population(self):
        return sum(c.count for c in self.cells.values())

    def grid(self, what="mean") -> np.ndarray:
        shape = (N_DECILES,) * self.dims
        out = np.full(shape, np.nan if what == "mean" else 0.0)
        for key, cell in self.cells.items():
            out[key] = getattr(cell, what)
        return out

    def rows(self):
        for key in sorted(self.cells):
            cell = self.cells[key]
            yield (*key, cell.mean, cell.count)

    def header(self):
        return tuple(f"{c}_decile" for c in self.channels) + ("mean", "count")

    def write_long_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.header())
        for row in self.rows():
            writer.writerow(row[:-2] + (repr(row[-2]), row[-1]))

    def format(self) -> str:
        return format_table(self.header(), [r[:-2] + (f"{r[-2]:.4f}", r[-1])
                                            for r in self.rows()])


def cohort_report(per_user_results: Iterable, dims: int = 1,
                  channels: Sequence[str] | None = None) -> CohortTable:
    """Mean metric per activity-decile cell over one or two channels.

    Each result is ``(user, levels, value)``; ``levels`` is either a sequence
    aligned with ``channels`` or a mapping channel -> level.
    """
    results = list(per_user_results)
    if not results:
        raise InvalidArgumentError("cohort report needs at least one user")
    if dims not in (1, 2):
        raise InvalidArgumentError(f"dims must be 1 or 2, got {dims}")
    first = results[0][1]
    if channels is None:
        channels = (list(first)[:dims] if isinstance(first, Mapping)
                    else [f"channel{i}" for i in range(dims)])
    channels = tuple(channels)[:dims]
    if len(channels) != dims:
        raise InvalidArgumentError(f"need {dims} channels, got {list(channels)}")

    def level(levels, i):
        return levels[channels[i]] if isinstance(levels, Mapping) else levels[i]

    values = np.array([float(r[2]) for r in results])
    deciles = np.column_stack([
        assign_deciles([float(level(r[1], i)) for r in results]) for i in range(dims)])
    cells = {}
    keys = [tuple(int(d) for d in row) for row in deciles]
    for key in sorted(set(keys)):
        mask = np.array([k == key for k in keys])
        cells[key] = CohortCell(float(values[mask].mean()), int(mask.sum()))
    return CohortTable(channels, cells)


def format_table(headers: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Left-aligned plain-text table."""
    rows = [[str(c) for c in r] for r in rows]
    widths = [len(h) for h in headers]
    for r in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, r)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)


def write_ndcg_csv(reports: Iterable[NdcgReport], fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("user", "k", "ndcg", "zero_gain"))
    for r in reports:
        writer.writerow((r.user, r.k, repr(r.ndcg), int(r.zero_gain)))
