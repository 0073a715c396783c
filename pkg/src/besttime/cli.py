"""Command-line entry point: ``besttime <subcommand> ...``.

Failures exit with status 1 and print one JSON object
``{"error": <code>, "message": <text>}`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager

from .assembler import (LearnerConfig, learn_weights, rank_slots, read_training_csv,
                        training_metrics)
from .config import DeploymentConfig
from .errors import BestTimeError, ConfigurationError, InvalidArgumentError
from .evaluation import cohort_report, ndcg, summarize_ndcg, write_ndcg_csv
from .signals import counters_from_events, read_counters_csv, write_counters_csv
from .sim import run_experiment
from .slots import MetricBounds, build_activity_map, read_maps_csv
from .store import SignalStore, check_day, publish_maps
from .service import handle_batch, serve

log = logging.getLogger("besttime")


@contextmanager
def _open_in(path):
    if path in (None, "-"):
        yield sys.stdin
    else:
        try:
            fh = open(path, newline="")
        except FileNotFoundError:
            raise InvalidArgumentError(f"input file {path!r} not found") from None
        with fh:
            yield fh


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _load_config(path) -> DeploymentConfig:
    if path is None:
        return DeploymentConfig()
    return DeploymentConfig.load(path)


def _store(args, config: DeploymentConfig) -> SignalStore:
    path = args.store or config.resolved_store_path()
    if path is None:
        raise ConfigurationError("no store path: pass --store, set BESTTIME_STORE or [store] path")
    return SignalStore(path)


# subcommands

def cmd_schedule(args):
    config = _load_config(args.config)
    store = _store(args, config)
    with _open_in(args.input) as fh:
        text = fh.read()
    requests = _parse_requests(text)
    results = handle_batch(requests, store, config, args.seed, args.workers)
    with _open_out(args.out) as out:
        for r in results:
            out.write(r.to_json() + "\n")
    failed = sum(1 for r in results if not hasattr(r, "timestamps"))
    if failed:
        log.warning("%d of %d requests failed", failed, len(results))
    return 0


def _parse_requests(text):
    text = text.strip()
    if not text:
        return []
    try:
        if text.startswith("["):
            return json.loads(text)
        return [json.loads(line) for line in text.splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"request file is not JSON or JSON lines: {exc}") from None


def cmd_serve(args):
    config = _load_config(args.config)
    serve(_store(args, config), config, args.seed, workers=args.workers)
    return 0


def cmd_ingest(args):
    with _open_in(args.input) as fh:
        counters = counters_from_events(csv.DictReader(fh))
    if args.merge:
        with _open_in(args.merge) as fh:
            old = {(c.user, c.channel): c for c in read_counters_csv(fh)}
        for c in counters:
            key = (c.user, c.channel)
            old[key] = old[key] + c if key in old else c
        counters = list(old.values())
    counters.sort(key=lambda c: (c.user, c.channel))
    with _open_out(args.out) as out:
        write_counters_csv(counters, out)
    return 0


def _read_levels(path):
    levels = {}
    with _open_in(path) as fh:
        for row in csv.DictReader(fh):
            try:
                levels.setdefault(row["user"], {})[row["metric"]] = float(row["level"])
            except (KeyError, ValueError) as exc:
                raise InvalidArgumentError(f"malformed level row {row}: {exc}") from None
    return levels


def _maps_from_counters(path, day):
    with _open_in(path) as fh:
        counters = read_counters_csv(fh)
    peak = max((int(c.buckets[day].max()) for c in counters), default=0)
    maps = []
    for c in counters:
        bounds = MetricBounds(c.channel, 0.0, float(peak), provenance=f"day {day} counters")
        raw = {h: float(c.buckets[day, h]) for h in range(24)}
        maps.append(build_activity_map(c.user, c.channel, raw, bounds))
    return maps


def cmd_publish(args):
    config = _load_config(args.config)
    store = _store(args, config)
    check_day(args.day)
    if args.counters:
        maps = _maps_from_counters(args.counters, args.day)
    else:
        with _open_in(args.input) as fh:
            maps = read_maps_csv(fh)
    levels = _read_levels(args.levels) if args.levels else None
    expected = None
    if args.expect_users:
        metrics = sorted({m.metric for m in maps})
        with _open_in(args.expect_users) as fh:
            users = [line.strip() for line in fh if line.strip()]
        expected = [(u, m) for u in users for m in metrics]
    version = publish_maps(store, args.day, maps, levels, expected)
    print(json.dumps({"day": args.day, "version": version, "maps": len(maps)}))
    return 0


def cmd_learn_weights(args):
    with _open_in(args.input) as fh:
        examples = read_training_csv(fh)
    metrics = training_metrics(examples)
    init = {m: 1.0 for m in metrics}
    for item in args.init or []:
        name, _, value = item.partition("=")
        if name not in init:
            raise InvalidArgumentError(f"--init names unknown metric {name!r}")
        init[name] = float(value)
    result = learn_weights(examples, init, LearnerConfig(use_case=args.use_case,
                                                         ridge_lambda=args.ridge_lambda))
    base = result.spec.weights[metrics[0]]
    doc = {
        **result.spec.to_dict(),
        "ratios": {m: (w / base if base else None) for m, w in result.spec.weights.items()},
        "loss": result.report.loss,
        "init_loss": result.init_loss,
        "rows": result.report.n,
        "ridge": result.ridge,
        "kept_init": result.kept_init,
    }
    with _open_out(args.out) as out:
        out.write(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_evaluate(args):
    with _open_in(args.predictions) as fh:
        predicted = {vm.user: vm for vm in read_maps_csv(fh)}
    actual = {}
    with _open_in(args.actuals) as fh:
        for row in csv.DictReader(fh):
            try:
                actual.setdefault(row["user"], {})[int(row["slot_index"])] = float(row["value"])
            except (KeyError, ValueError) as exc:
                raise InvalidArgumentError(f"malformed actuals row {row}: {exc}") from None
    missing = sorted(set(actual) - set(predicted))
    if missing:
        raise InvalidArgumentError(f"no predictions for users {missing[:5]}")
    reports = [ndcg(rank_slots(predicted[u]), actual[u], args.k, user=u) for u in sorted(actual)]
    summary = summarize_ndcg(reports)
    lines = [f"users {summary.n_users}  zero-gain {summary.n_zero_gain}",
             f"mean NDCG@{args.k} {summary.mean:.6f}  "
             f"(excluding zero-gain users {summary.mean_excluding_zero_gain:.6f})"]
    if args.levels:
        levels = _read_levels(args.levels)
        channels = args.channels or sorted({m for v in levels.values() for m in v})
        dims = min(2, len(channels))
        rows = [(r.user, levels.get(r.user, {}), r.ndcg) for r in reports]
        for _, lv, _ in rows:
            for c in channels[:dims]:
                lv.setdefault(c, 0.0)
        table = cohort_report(rows, dims=dims, channels=channels[:dims])
        lines += ["", f"NDCG@{args.k} by activity decile", table.format()]
    with _open_out(args.out) as out:
        out.write("\n".join(lines) + "\n")
    if args.per_user:
        with _open_out(args.per_user) as out:
            write_ndcg_csv(reports, out)
    return 0


def cmd_simulate(args):
    config = _load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    exp = config.experiment(**overrides)
    if args.users is not None:
        exp.population.size = args.users
    result = run_experiment(exp)
    with _open_out(args.out) as out:
        out.write(result.format() + "\n")
    if args.csv:
        with _open_out(args.csv) as out:
            result.write_csv(out)
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors follow the same JSON-on-stderr contract as runtime errors
    def error(self, message):
        self.exit(2, json.dumps({"error": "usage", "message": f"{self.prog}: {message}"}) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="besttime", description="Best-time scheduling toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, store=True):
        sp.add_argument("--config", help="deployment TOML file")
        if store:
            sp.add_argument("--store", help="store directory (overrides config and env)")

    s = sub.add_parser("serve", help="JSON-lines scheduling loop on stdin/stdout")
    common(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_serve)

    s = sub.add_parser("schedule", help="schedule a batch of requests")
    common(s)
    s.add_argument("--in", dest="input", required=True, help="JSON array or JSON lines")
    s.add_argument("--out", help="plans as JSON lines (default stdout)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_schedule)

    s = sub.add_parser("ingest", help="activity events CSV -> counters CSV")
    s.add_argument("--in", dest="input", required=True,
                   help="CSV with user,channel,timestamp[,utc_offset]")
    s.add_argument("--merge", help="existing counters CSV to add onto")
    s.add_argument("--out", help="counters CSV (default stdout)")
    s.set_defaults(fn=cmd_ingest)

    s = sub.add_parser("publish", help="publish one day partition to the store")
    common(s)
    s.add_argument("--day", type=int, required=True, help="day of week, 0 = Sunday")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", help="maps CSV keyed by hour of day")
    src.add_argument("--counters", help="counters CSV; maps use that weekday's buckets")
    s.add_argument("--levels", help="CSV with user,metric,level")
    s.add_argument("--expect-users", help="file listing users the batch must cover")
    s.set_defaults(fn=cmd_publish)

    s = sub.add_parser("learn-weights", help="fit assembler weights from training CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--init", nargs="*", metavar="METRIC=W")
    s.add_argument("--use-case", default="default")
    s.add_argument("--ridge-lambda", type=float, default=1e-3)
    s.add_argument("--out", help="spec JSON (default stdout)")
    s.set_defaults(fn=cmd_learn_weights)

    s = sub.add_parser("evaluate", help="NDCG and cohort reports")
    s.add_argument("--predictions", required=True, help="maps CSV of predicted scores")
    s.add_argument("--actuals", required=True, help="CSV with user,slot_index,value")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--levels", help="CSV with user,metric,level for decile cohorts")
    s.add_argument("--channels", nargs="*")
    s.add_argument("--per-user", help="write per-user NDCG CSV here")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("simulate", help="run the experiment in a config's [simulation]")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--users", type=int, help="override population size")
    s.add_argument("--out", help="result table (default stdout)")
    s.add_argument("--csv", help="also write result rows as CSV")
    s.set_defaults(fn=cmd_simulate)
    return p


def _fail(code, message):
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except BestTimeError as exc:
        return _fail(exc.code, str(exc))
    except OSError as exc:
        return _fail("io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
