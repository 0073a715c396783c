import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from besttime.errors import EmptyCandidateError, InvalidArgumentError
from besttime.slots import (MetricBounds, TemporalActivityMap, TimeSlot, build_activity_map,
                            normalize, normalize_array, partition_range, read_maps_csv,
                            uniform_map, write_maps_csv)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_one_day_in_hours():
    slots = partition_range(0, 86400, 3600)
    assert len(slots) == 24
    assert [s.start for s in slots] == list(range(0, 86400, 3600))
    assert [s.index for s in slots] == list(range(24))


def test_single_slot_range():
    assert partition_range(0, 3600, 3600) == [TimeSlot(0, 0, 3600)]


def test_exact_multiple_keeps_every_slot():
    slots = partition_range(0, 90000, 3600)
    assert len(slots) == 25
    assert slots[-1].end == 90000


def test_remainder_is_dropped():
    slots = partition_range(100, 100 + 3 * 3600 + 1799, 3600)
    assert len(slots) == 3
    assert slots[0].start == 100


@pytest.mark.parametrize("args", [(10, 10, 1), (10, 5, 1), (0, 100, 0), (0, 100, -5)])
def test_partition_rejects_bad_arguments(args):
    with pytest.raises(InvalidArgumentError):
        partition_range(*args)


def test_range_shorter_than_slot_is_empty():
    with pytest.raises(EmptyCandidateError):
        partition_range(0, 3599, 3600)


@given(st.integers(-10**9, 10**9), st.integers(1, 10**5), st.integers(1, 200))
def test_partition_tiles_without_gaps(t0, length, k):
    extra = length // 2
    slots = partition_range(t0, t0 + k * length + extra, length)
    assert len(slots) == k
    assert sum(s.length for s in slots) == k * length
    for a, b in zip(slots, slots[1:]):
        assert a.end == b.start
    assert slots[0].start == t0


def test_normalize_examples():
    b = MetricBounds("m", 1, 5)
    assert normalize(1, b) == 0.0
    assert normalize(5, b) == 1.0
    assert normalize(3, b) == 0.5


def test_normalize_clamps_out_of_range():
    b = MetricBounds("m", 1, 5)
    assert normalize(-10, b) == 0.0
    assert normalize(50, b) == 1.0


def test_degenerate_bounds_give_half():
    b = MetricBounds("m", 2, 2)
    vm = build_activity_map("u", "m", {0: 2, 1: 2, 2: 2}, b)
    assert vm.scores() == {0: 0.5, 1: 0.5, 2: 0.5}


def test_bounds_reject_inverted_and_nonfinite():
    with pytest.raises(InvalidArgumentError):
        MetricBounds("m", 5, 1)
    with pytest.raises(InvalidArgumentError):
        MetricBounds("m", 0, math.inf)
    with pytest.raises(InvalidArgumentError):
        normalize(math.nan, MetricBounds("m", 0, 1))


def test_bounds_from_values():
    b = MetricBounds.from_values("m", [3, 1, 7])
    assert (b.min, b.max) == (1, 7)


def test_build_map_examples():
    b = MetricBounds("m", 1, 5)
    assert build_activity_map("u", "m", {0: 1, 1: 5}, b).scores() == {0: 0.0, 1: 1.0}
    assert build_activity_map("u", "m", {0: 3}, b).scores() == {0: 0.5}


def test_build_map_checks_candidates_and_emptiness():
    b = MetricBounds("m", 0, 1)
    with pytest.raises(InvalidArgumentError):
        build_activity_map("u", "m", {5: 0.3}, b, candidates=partition_range(0, 7200, 3600))
    with pytest.raises(EmptyCandidateError):
        build_activity_map("u", "m", {}, b)


@given(finite, finite, finite)
def test_normalize_monotone(a, b, lo):
    hi = lo + 1.0 + abs(lo) * 0.5
    bounds = MetricBounds("m", lo, hi)
    if a <= b:
        assert normalize(a, bounds) <= normalize(b, bounds)
    assert 0.0 <= normalize(a, bounds) <= 1.0


@given(finite, st.floats(1e-6, 1e6))
def test_normalize_bounds_exact(lo, span):
    hi = lo + span
    bounds = MetricBounds("m", lo, hi)
    assert normalize(lo, bounds) == 0.0
    assert normalize(hi, bounds) == 1.0


@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=30))
def test_argsort_invariance(raws):
    lo, hi = min(raws), max(raws)
    if hi == lo:
        return
    scores = normalize_array(raws, MetricBounds("m", lo, hi))
    # stable ranks agree wherever the raw values are distinct
    order_raw = sorted(range(len(raws)), key=lambda i: (-raws[i], i))
    order_norm = sorted(range(len(raws)), key=lambda i: (-scores[i], i))
    for i, j in zip(order_raw, order_raw[1:]):
        if raws[i] > raws[j]:
            assert order_norm.index(i) < order_norm.index(j)


def test_normalize_array_matches_scalar():
    b = MetricBounds("m", -2, 6)
    raws = np.linspace(-5, 9, 57)
    assert np.array_equal(normalize_array(raws, b), [normalize(r, b) for r in raws])


def test_map_is_immutable_and_copies_scores():
    vm = TemporalActivityMap("u", "m", {1: 0.5, 0: 0.25})
    with pytest.raises(TypeError):
        vm.entries[0] = 1.0
    s = vm.scores()
    del s[0]
    assert 0 in vm
    assert vm.slots == [0, 1]


def test_map_rejects_scores_outside_unit_interval():
    with pytest.raises(InvalidArgumentError):
        TemporalActivityMap("u", "m", {0: 1.5})


def test_map_json_round_trip_is_byte_identical():
    vm = TemporalActivityMap("u", "m", {0: 0.1, 3: 1 / 3, 7: 1.0})
    text = vm.to_json()
    again = TemporalActivityMap.from_json(text)
    assert again == vm
    assert again.to_json() == text
    assert hash(again) == hash(vm)


def test_maps_csv_round_trip():
    maps = [TemporalActivityMap("u1", "a", {0: 0.1, 1: 2 / 3}),
            TemporalActivityMap("u2", "a", {5: 1.0})]
    buf = io.StringIO()
    write_maps_csv(maps, buf)
    assert buf.getvalue().splitlines()[0] == "user,metric,slot_index,score"
    assert read_maps_csv(io.StringIO(buf.getvalue())) == maps


def test_maps_csv_malformed_row():
    with pytest.raises(InvalidArgumentError):
        read_maps_csv(io.StringIO("user,metric,slot_index,score\nu,a,x,0.5\n"))


def test_uniform_map():
    assert uniform_map("u", "m", range(3)).scores() == {0: 0.5, 1: 0.5, 2: 0.5}
