"""Synthetic multi-tenant world for desk-scale policy experiments.

Users have ground-truth engagement curves (per channel, 168 server hours).
The scheduler never sees these: it sees activity counters sampled from the
user's recent history, exactly as a deployment would. Engagement is then
realized per execution with two interaction effects:

* within-window decay: an execution landing within ``window`` slots after an
  earlier execution of the same use case that day is scaled by ``delta``;
* cannibalization: ``c`` executions (across use cases) sharing a slot each
  realize ``share(c) = c ** -share_exponent`` of their probability.

Every random draw comes from a per-user substream keyed on the master seed,
so results replay exactly for any chunking or worker count, and paired arms
see identical noise.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from typing import Mapping, Sequence

import numpy as np

from .assembler import AssemblerSpec, assemble
from .errors import ConfigurationError, InvalidArgumentError
from .evaluation import cohort_report, format_table, relative_lift
from .policy import BestTimePolicy, Selection, select_slots, top_n_policy
from .signals import (ActivityCounter, channel_activity_level, circular_distance,
                      counter_signal, stable_hash)
from .slots import DAY, HOUR, MetricBounds, TemporalActivityMap, build_activity_map, partition_range

log = logging.getLogger(__name__)

# day 0 of every simulation is a Sunday
SIM_EPOCH_DAY = (date(2024, 1, 7) - date(1970, 1, 1)).days

_POPULATION, _HISTORY, _ENGAGE, _BOOTSTRAP = 1, 2, 3, 4


def substream(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


@dataclass
class PopulationConfig:
    size: int = 1000
    channels: tuple = ("A", "B")
    # probability that a non-primary channel copies the primary channel's curve
    rho: float = 0.0
    bumps: tuple = (1, 3)
    width: tuple = (2.0, 5.0)
    shape_exponent: float = 2.0
    baseline: float = 0.1
    ctr: tuple = (0.01, 0.05)
    utc_offset_hours: tuple = (0, 0)
    # per-channel range of the daily active probability
    activity: Mapping = field(default_factory=lambda: {"A": (1.0, 1.0), "B": (1.0, 1.0)})
    # expected events per hour at the curve's peak on an active day
    activity_rate: float = 3.0
    history_days: int = 28
    # fixed local-hour bump centers for every user (None = random)
    centers: tuple | None = None
    # activity bumps are Gaussian with widths scaled by this ratio; < 1
    # concentrates app activity in fewer hours than the user is receptive
    activity_width_ratio: float = 1.0
    # log-scale mismatch between activity intensity and engagement
    noise_scale: float = 0.0

    def __post_init__(self):
        if self.size < 1:
            raise InvalidArgumentError("population size must be >= 1")
        if not 0.0 <= self.rho <= 1.0:
            raise InvalidArgumentError("rho must lie in [0, 1]")
        self.channels = tuple(self.channels)
        self.bumps = tuple(self.bumps)
        self.width = tuple(self.width)
        self.ctr = tuple(self.ctr)
        self.utc_offset_hours = tuple(self.utc_offset_hours)
        self.activity = {c: tuple(v) if isinstance(v, (list, tuple)) else (float(v), float(v))
                         for c, v in dict(self.activity).items()}
        if self.centers is not None:
            self.centers = tuple(self.centers)


@dataclass
class SyntheticUser:
    user_id: str
    index: int
    utc_offset: int
    curves: dict       # channel -> (168,) engagement probability, server time
    intensity: dict    # channel -> (168,) relative activity intensity, peak 1
    activity: dict     # channel -> daily active probability
    noise_scale: float = 0.0


def _bump_set(rng, cfg: PopulationConfig):
    if cfg.centers is not None:
        centers = np.array(cfg.centers, dtype=float)
        amps = np.ones(len(centers))
        widths = np.full(len(centers), float(np.mean(cfg.width)))
    else:
        nb = int(rng.integers(cfg.bumps[0], cfg.bumps[1] + 1))
        centers = rng.uniform(0.0, 24.0, nb)
        amps = rng.uniform(0.3, 1.0, nb)
        amps[0] = 1.0
        widths = rng.uniform(cfg.width[0], cfg.width[1], nb)
    ctr = float(rng.uniform(*cfg.ctr))
    return centers, amps, widths, ctr


def daily_shape(centers, amps, widths, baseline=0.0, exponent=2.0) -> np.ndarray:
    """Mixture of circular bumps over 24 local hours, scaled to peak 1."""
    hours = np.arange(24.0)
    f = np.full(24, float(baseline))
    for c, a, w in zip(centers, amps, widths):
        f += a * np.exp(-(circular_distance(hours, c) / w) ** exponent)
    return f / f.max()


def _to_server_week(local_day: np.ndarray, offset_hours: int) -> np.ndarray:
    # server hour h is local hour h + offset
    return np.tile(np.roll(local_day, -offset_hours), 7)


def generate_population(config: PopulationConfig, seed: int,
                        indices: Sequence[int] | None = None) -> list[SyntheticUser]:
    """Deterministic users; ``indices`` selects a subset of ``range(size)``."""
    if indices is None:
        indices = range(config.size)
    users = []
    for i in indices:
        rng = substream(seed, _POPULATION, i)
        offset_h = int(rng.integers(config.utc_offset_hours[0], config.utc_offset_hours[1] + 1))
        primary = _bump_set(rng, config)
        curves, intensity, activity = {}, {}, {}
        for k, ch in enumerate(config.channels):
            bumps = primary
            if k > 0:
                copy = rng.random() < config.rho
                fresh = _bump_set(rng, config)
                bumps = primary if copy else fresh
            centers, amps, widths, ctr = bumps
            shape = daily_shape(centers, amps, widths, config.baseline, config.shape_exponent)
            inten = daily_shape(centers, amps, widths * config.activity_width_ratio,
                                config.baseline, 2.0)
            if config.noise_scale:
                z = rng.standard_normal(24)
                inten = inten * np.exp(config.noise_scale * z)
                inten = inten / inten.max()
            curves[ch] = np.clip(_to_server_week(shape * ctr, offset_h), 0.0, 1.0)
            intensity[ch] = _to_server_week(inten, offset_h)
            lo, hi = config.activity.get(ch, (1.0, 1.0))
            activity[ch] = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        users.append(SyntheticUser(f"u{i}", i, offset_h * 60, curves, intensity, activity,
                                   config.noise_scale))
    return users


def observe_history(user: SyntheticUser, channel: str, config: PopulationConfig, seed: int):
    """Sample ``history_days`` of activity before day 0 into a counter.

    Returns the counter and the channel activity level (share of active days).
    """
    rng = substream(seed, _HISTORY, user.index, stable_hash(channel) % 2**32)
    days = config.history_days
    active = rng.random(days) < user.activity.get(channel, 1.0)
    day_numbers = SIM_EPOCH_DAY - days + np.arange(days)
    dows = (day_numbers + 4) % 7
    week = user.intensity[channel].reshape(7, 24)
    counts = rng.poisson(config.activity_rate * week[dows]) * active[:, None]
    counter = ActivityCounter(user.user_id, channel)
    np.add.at(counter.buckets, dows, counts)
    active_days = day_numbers[counts.any(axis=1)].tolist()
    level = channel_activity_level(user.user_id, channel, active_days, SIM_EPOCH_DAY - 1, days)
    return counter, level.level


def day_slots(day: int):
    start = (SIM_EPOCH_DAY + day) * DAY
    return partition_range(start, start + DAY, HOUR)


def day_of_sim(day: int) -> int:
    return (SIM_EPOCH_DAY + day + 4) % 7


def counter_map(counter: ActivityCounter, day: int, bounds: MetricBounds,
                hours: Sequence[int] | None = None) -> TemporalActivityMap:
    raw = counter_signal(counter, day_slots(day), day_of_sim(day))
    if hours is not None:
        raw = {h: raw[h] for h in hours}
    return build_activity_map(counter.user, bounds.metric, raw, bounds)


@dataclass
class EngagementModel:
    delta: float = 0.5
    window: int = 1
    share_exponent: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidArgumentError(f"delta {self.delta} outside [0, 1]")
        if self.window < 0 or self.share_exponent < 0:
            raise InvalidArgumentError("window and share exponent must be non-negative")

    def share(self, c: int) -> float:
        return 1.0 if c <= 1 else float(c) ** -self.share_exponent


@dataclass(frozen=True)
class Outcome:
    user: str
    use_case: str
    slot: int
    probability: float
    engaged: bool


def engagement_uniforms(seed, user: SyntheticUser, day: int, use_case: str) -> np.ndarray:
    """24 per-hour uniforms shared by every arm for this user, day and use case."""
    return substream(seed, _ENGAGE, user.index, day, stable_hash(use_case) % 2**32).random(24)


def user_day_outcomes(user: SyntheticUser, plans: Mapping[str, Sequence[int]],
                      model: EngagementModel, seed: int, day: int = 0,
                      channel: str = "A", uniforms: dict | None = None) -> list[Outcome]:
    """Realize one user's executions for one day. Slots are hours of day.

    ``uniforms`` caches the per-use-case draws so paired arms reuse them.
    """
    load = {}
    for slots in plans.values():
        for s in slots:
            load[s] = load.get(s, 0) + 1
    curve = user.curves[channel]
    base = day_of_sim(day) * 24
    out = []
    for uc in sorted(plans):
        slots = sorted(plans[uc])
        if not slots:
            continue
        u = None if uniforms is None else uniforms.get(uc)
        if u is None:
            u = engagement_uniforms(seed, user, day, uc)
            if uniforms is not None:
                uniforms[uc] = u
        for k, s in enumerate(slots):
            p = float(curve[base + s])
            if any(s - model.window <= q < s for q in slots[:k]):
                p *= model.delta
            p *= model.share(load[s])
            out.append(Outcome(user.user_id, uc, s, p, bool(u[s] < p)))
    return out


def simulate_day(users: Sequence[SyntheticUser], plans: Mapping[str, Mapping[str, Sequence[int]]],
                 model: EngagementModel, seed: int, day: int = 0,
                 channel: str = "A") -> list[Outcome]:
    """``plans[use_case][user_id]`` lists the chosen hour slots."""
    outcomes = []
    for user in users:
        mine = {uc: p[user.user_id] for uc, p in plans.items() if user.user_id in p}
        outcomes += user_day_outcomes(user, mine, model, seed, day, channel)
    return outcomes


# experiment configuration

@dataclass
class ArmSpec:
    name: str
    kind: str = "top_n"      # top_n | avoid_nearby | oracle
    w: int = 0

    @classmethod
    def parse(cls, item):
        if isinstance(item, ArmSpec):
            return item
        if isinstance(item, str):
            kind, _, w = item.partition(":")
            w = int(w or 0)
            name = kind if kind != "avoid_nearby" else f"avoid_{w}"
            return cls(name, kind, w)
        item = dict(item)
        kind = item.get("kind", "top_n")
        w = int(item.get("w", 0))
        return cls(item.get("name", kind if kind != "avoid_nearby" else f"avoid_{w}"), kind, w)

    def policy(self) -> BestTimePolicy:
        return BestTimePolicy("avoid_nearby" if self.kind == "avoid_nearby" else "top_n", self.w)


EXPERIMENT_KINDS = ("policy_comparison", "assembly", "coordination")


@dataclass
class ExperimentConfig:
    kind: str = "policy_comparison"
    population: PopulationConfig = field(default_factory=PopulationConfig)
    engagement: EngagementModel = field(default_factory=EngagementModel)
    seed: int = 0
    days: int = 1
    n: int = 3
    hours: tuple = (0, 24)
    arms: list = field(default_factory=lambda: ["top_n", "avoid_nearby:1",
                                                "avoid_nearby:2", "avoid_nearby:3"])
    use_cases: int = 10
    high_priority: int = 5
    omega: float = 0.01
    channel: str = "A"
    external_channel: str = "B"
    bootstrap: int = 1000
    confidence: float = 0.95
    workers: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigurationError(f"unknown experiment kind {self.kind!r}")
        if isinstance(self.population, Mapping):
            self.population = PopulationConfig(**self.population)
        if isinstance(self.engagement, Mapping):
            self.engagement = EngagementModel(**self.engagement)
        self.arms = [ArmSpec.parse(a) for a in self.arms]
        self.hours = tuple(self.hours)
        if not 0 <= self.hours[0] < self.hours[1] <= 24:
            raise ConfigurationError(f"hours window {self.hours} must lie within [0, 24]")
        if self.n < 1 or self.days < 1:
            raise ConfigurationError("n and days must be >= 1")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        doc = dict(doc)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown simulation settings {sorted(unknown)}")
        if "population" in doc:
            pop = dict(doc["population"])
            pop_known = {f.name for f in fields(PopulationConfig)}
            bad = set(pop) - pop_known
            if bad:
                raise ConfigurationError(f"unknown population settings {sorted(bad)}")
            doc["population"] = pop
        return cls(**doc)

    def to_dict(self):
        doc = asdict(self)
        doc["arms"] = [asdict(a) for a in self.arms]
        return doc


@dataclass
class ArmResult:
    arm: str
    group: str
    executions: int
    engagements: int
    efficiency: float
    expected_efficiency: float
    lift: float
    ci_low: float
    ci_high: float

    @property
    def significant(self):
        return self.ci_low > 0 or self.ci_high < 0


@dataclass
class ExperimentResult:
    kind: str
    control: str
    rows: list
    truncations: int = 0
    cohort: object = None
    extras: dict = field(default_factory=dict)

    def row(self, arm, group="all") -> ArmResult:
        for r in self.rows:
            if r.arm == arm and r.group == group:
                return r
        raise KeyError((arm, group))

    HEADER = ("arm", "group", "executions", "engagements", "efficiency",
              "expected_efficiency", "lift", "ci_low", "ci_high")

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.HEADER)
        for r in self.rows:
            writer.writerow((r.arm, r.group, r.executions, r.engagements,
                             repr(r.efficiency), repr(r.expected_efficiency),
                             repr(r.lift), repr(r.ci_low), repr(r.ci_high)))

    def format(self) -> str:
        body = [(r.arm, r.group, r.executions, r.engagements, f"{r.efficiency:.5f}",
                 f"{r.lift * 100:+.2f}%", f"[{r.ci_low * 100:+.2f}%, {r.ci_high * 100:+.2f}%]")
                for r in self.rows]
        text = f"{self.kind} (control: {self.control})\n" + format_table(
            ("arm", "group", "executions", "engagements", "efficiency", "lift", "95% CI"), body)
        if self.cohort is not None:
            text += "\n\nper-user efficiency gain by activity decile\n" + self.cohort.format()
        return text


def bootstrap_lift(eng_t, exe_t, eng_c, exe_c, n_boot, seed, confidence=0.95):
    """Point lift of test over control efficiency with a percentile CI from
    resampling users (paired: the same resample indexes both arms)."""
    eng_t, exe_t, eng_c, exe_c = (np.asarray(a, dtype=float) for a in (eng_t, exe_t, eng_c, exe_c))
    if exe_c.sum() == 0 or eng_c.sum() == 0 or exe_t.sum() == 0:
        return float("nan"), float("nan"), float("nan")
    lift = relative_lift(eng_t.sum() / exe_t.sum(), eng_c.sum() / exe_c.sum())
    n = len(eng_t)
    rng = substream(seed, _BOOTSTRAP)
    draws = []
    for lo in range(0, n_boot, 100):
        idx = rng.integers(0, n, (min(100, n_boot - lo), n))
        et, xt, ec, xc = eng_t[idx].sum(1), exe_t[idx].sum(1), eng_c[idx].sum(1), exe_c[idx].sum(1)
        with np.errstate(divide="ignore", invalid="ignore"):
            draws.append((et / xt) / (ec / xc) - 1.0)
    draws = np.concatenate(draws)
    draws = draws[np.isfinite(draws)]
    alpha = (1.0 - confidence) / 2
    lo, hi = np.quantile(draws, [alpha, 1 - alpha])
    return float(lift), float(lo), float(hi)


def _chunks(n, workers):
    if workers <= 1:
        return [(0, n)]
    size = max(1, -(-n // (workers * 4)))
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def _map_chunks(fn, config, n, *args):
    chunks = _chunks(n, config.workers)
    if config.workers <= 1:
        return [fn(config, lo, hi, *args) for lo, hi in chunks]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(fn, *zip(*[(config, lo, hi, *args) for lo, hi in chunks])))


def _max_counts_chunk(config, lo, hi, channels):
    pop = config.population
    out = {ch: 0.0 for ch in channels}
    for user in generate_population(pop, config.seed, range(lo, hi)):
        for ch in channels:
            counter, _ = observe_history(user, ch, pop, config.seed)
            for day in range(config.days):
                raw = counter_signal(counter, day_slots(day), day_of_sim(day))
                out[ch] = max(out[ch], max(raw.values()))
    return out


def global_bounds(config: ExperimentConfig, channels) -> dict:
    """Per-channel metric bounds over every user and slot of the run."""
    parts = _map_chunks(_max_counts_chunk, config, config.population.size, tuple(channels))
    return {ch: MetricBounds(ch, 0.0, max(p[ch] for p in parts),
                             provenance=f"{config.population.history_days}d history")
            for ch in channels}


def _hours(config):
    return list(range(config.hours[0], config.hours[1]))


def _true_map(user, channel, day, hours):
    curve = user.curves[channel][day_of_sim(day) * 24:(day_of_sim(day) + 1) * 24]
    top = curve.max() or 1.0
    return TemporalActivityMap(user.user_id, "oracle", {h: float(curve[h] / top) for h in hours})


def _tally(outcomes):
    eng = sum(o.engaged for o in outcomes)
    exp = sum(o.probability for o in outcomes)
    return eng, len(outcomes), exp


# policy comparison

def _policy_chunk(config, lo, hi, bounds):
    pop, ch = config.population, config.channel
    hours = _hours(config)
    n_arms = len(config.arms)
    eng = np.zeros((n_arms, hi - lo))
    exe = np.zeros((n_arms, hi - lo))
    expd = np.zeros((n_arms, hi - lo))
    truncated = 0
    for j, user in enumerate(generate_population(pop, config.seed, range(lo, hi))):
        counter, _ = observe_history(user, ch, pop, config.seed)
        for day in range(config.days):
            vmap = counter_map(counter, day, bounds[ch], hours)
            cache = {}
            for a, arm in enumerate(config.arms):
                if arm.kind == "oracle":
                    slots = top_n_policy(_true_map(user, ch, day, hours), config.n)
                else:
                    slots = select_slots(vmap, config.n, arm.policy()).slots
                truncated += config.n - len(slots)
                e, x, p = _tally(user_day_outcomes(user, {"uc": slots}, config.engagement,
                                                   config.seed, day, ch, cache))
                eng[a, j] += e
                exe[a, j] += x
                expd[a, j] += p
    return eng, exe, expd, truncated


def _arm_rows(config, names, eng, exe, expd, control=0, group="all"):
    rows = []
    for a, name in enumerate(names):
        lift, lo, hi = (0.0, 0.0, 0.0) if a == control else bootstrap_lift(
            eng[a], exe[a], eng[control], exe[control], config.bootstrap, config.seed,
            config.confidence)
        x = int(exe[a].sum())
        rows.append(ArmResult(name, group, x, int(eng[a].sum()),
                              float(eng[a].sum() / x) if x else float("nan"),
                              float(expd[a].sum() / x) if x else float("nan"), lift, lo, hi))
    return rows


def run_policy_comparison(config: ExperimentConfig) -> ExperimentResult:
    """Paired comparison of best-time policies against the first arm (top-N)."""
    if not config.arms or config.arms[0].kind != "top_n":
        raise ConfigurationError("the first arm must be the top_n control")
    bounds = global_bounds(config, [config.channel])
    parts = _map_chunks(_policy_chunk, config, config.population.size, bounds)
    eng = np.concatenate([p[0] for p in parts], axis=1)
    exe = np.concatenate([p[1] for p in parts], axis=1)
    expd = np.concatenate([p[2] for p in parts], axis=1)
    truncated = sum(p[3] for p in parts)
    rows = _arm_rows(config, [a.name for a in config.arms], eng, exe, expd)
    return ExperimentResult("policy_comparison", config.arms[0].name, rows, truncated,
                            extras={"per_user": (eng, exe)})


# signal assembly

def _assembly_chunk(config, lo, hi, bounds):
    pop = config.population
    a_ch, b_ch = config.channel, config.external_channel
    hours = _hours(config)
    policy = BestTimePolicy("top_n")
    spec = AssemblerSpec("assembled", (a_ch, b_ch), {a_ch: 1.0, b_ch: config.omega}) \
        if config.omega > 0 else AssemblerSpec("assembled", (a_ch,), {a_ch: 1.0})
    eng = np.zeros((2, hi - lo))
    exe = np.zeros((2, hi - lo))
    expd = np.zeros((2, hi - lo))
    levels = np.zeros((2, hi - lo))
    identical = 0
    for j, user in enumerate(generate_population(pop, config.seed, range(lo, hi))):
        ca, level_a = observe_history(user, a_ch, pop, config.seed)
        cb, level_b = observe_history(user, b_ch, pop, config.seed)
        levels[:, j] = level_a, level_b
        for day in range(config.days):
            map_a = counter_map(ca, day, bounds[a_ch], hours)
            map_b = counter_map(cb, day, bounds[b_ch], hours)
            single = select_slots(map_a, config.n, policy).slots
            # the internal channel is not gated, only the external one
            merged = assemble(spec, {a_ch: map_a, b_ch: map_b}, {a_ch: 1.0, b_ch: level_b})
            combo = select_slots(merged, config.n, policy).slots
            identical += single == combo
            cache = {}
            for a, slots in enumerate((single, combo)):
                e, x, p = _tally(user_day_outcomes(user, {"uc": slots}, config.engagement,
                                                   config.seed, day, a_ch, cache))
                eng[a, j] += e
                exe[a, j] += x
                expd[a, j] += p
    return eng, exe, expd, levels, identical


def run_assembly_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Single internal-channel map versus internal + omega * gate * external."""
    bounds = global_bounds(config, [config.channel, config.external_channel])
    parts = _map_chunks(_assembly_chunk, config, config.population.size, bounds)
    eng = np.concatenate([p[0] for p in parts], axis=1)
    exe = np.concatenate([p[1] for p in parts], axis=1)
    expd = np.concatenate([p[2] for p in parts], axis=1)
    levels = np.concatenate([p[3] for p in parts], axis=1)
    identical = sum(p[4] for p in parts)
    rows = _arm_rows(config, ["single", "assembled"], eng, exe, expd)
    gain = (eng[1] - eng[0]) / np.maximum(exe[0], 1)
    results = [(f"u{i}", (levels[0, i], levels[1, i]), gain[i]) for i in range(len(gain))]
    cohort = cohort_report(results, dims=2, channels=(config.channel, config.external_channel))
    decisions = config.population.size * config.days
    return ExperimentResult("assembly", "single", rows, 0, cohort,
                            extras={"per_user_gain": gain, "levels": levels,
                                    "identical_decisions": identical, "decisions": decisions})


# coordination

def _coordination_chunk(config, lo, hi, bounds):
    pop, ch = config.population, config.channel
    hours = _hours(config)
    ucs = [f"uc{k}" for k in range(config.use_cases)]
    tiers = {uc: "high" if k < config.high_priority else "low" for k, uc in enumerate(ucs)}
    groups = ("high", "low")
    # [arm, group, user]
    eng = np.zeros((2, 2, hi - lo))
    exe = np.zeros((2, 2, hi - lo))
    expd = np.zeros((2, 2, hi - lo))
    truncated = 0
    for j, user in enumerate(generate_population(pop, config.seed, range(lo, hi))):
        counter, _ = observe_history(user, ch, pop, config.seed)
        for day in range(config.days):
            vmap = counter_map(counter, day, bounds[ch], hours)
            cache, picks = {}, {}
            for arm in (0, 1):
                plans = {}
                for uc in ucs:
                    prio = tiers[uc] if arm == 1 else "high"
                    if prio not in picks:
                        picks[prio] = select_slots(vmap, config.n, BestTimePolicy("top_n", 0, prio))
                    sel: Selection = picks[prio]
                    plans[uc] = sel.slots
                    truncated += config.n - len(sel.slots)
                for o in user_day_outcomes(user, plans, config.engagement, config.seed, day, ch,
                                       cache):
                    g = groups.index(tiers[o.use_case])
                    eng[arm, g, j] += o.engaged
                    exe[arm, g, j] += 1
                    expd[arm, g, j] += o.probability
    return eng, exe, expd, truncated


def run_coordination_experiment(config: ExperimentConfig) -> ExperimentResult:
    """All use cases at the shared peak versus low tier forfeiting the peak."""
    if config.use_cases < 1:
        raise ConfigurationError("coordination needs at least one use case")
    bounds = global_bounds(config, [config.channel])
    parts = _map_chunks(_coordination_chunk, config, config.population.size, bounds)
    eng = np.concatenate([p[0] for p in parts], axis=2)
    exe = np.concatenate([p[1] for p in parts], axis=2)
    expd = np.concatenate([p[2] for p in parts], axis=2)
    truncated = sum(p[3] for p in parts)
    rows = []
    views = {"high": (slice(0, 1),), "low": (slice(1, 2),), "global": (slice(0, 2),)}
    for group, (sl,) in views.items():
        e = eng[:, sl].sum(axis=1)
        x = exe[:, sl].sum(axis=1)
        p = expd[:, sl].sum(axis=1)
        if x[0].sum() == 0:
            continue
        rows += _arm_rows(config, ["no_coordination", "tiered"], e, x, p, group=group)
    return ExperimentResult("coordination", "no_coordination", rows, truncated)


RUNNERS = {
    "policy_comparison": run_policy_comparison,
    "assembly": run_assembly_experiment,
    "coordination": run_coordination_experiment,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[config.kind](config)
