"""
From raw events to activity maps
================================

Count a user's app opens by weekday and hour, then turn one day of those
counts into a normalized per-slot activity map.
"""
import numpy as np

from besttime.signals import ActivityCounter, counter_signal, record_activity, day_of_week
from besttime.slots import DAY, HOUR, MetricBounds, build_activity_map, partition_range

# four weeks of evening activity with a smaller lunchtime bump
rng = np.random.default_rng(0)
start = 19729 * DAY - 28 * DAY
counter = ActivityCounter("alice", "app")
for d in range(28):
    for hour, rate in ((12, 1.0), (20, 3.0), (21, 2.0)):
        for _ in range(rng.poisson(rate)):
            record_activity(counter, start + d * DAY + hour * HOUR + int(rng.integers(0, HOUR)))

print("events per hour of day:", counter.weekly_aggregate())

# slots for next Sunday, one hour each
day0 = 19729 * DAY
slots = partition_range(day0, day0 + DAY, HOUR)
raw = counter_signal(counter, slots, day_of_week(day0))

# bounds normally come from all users; here we just use this user's range
bounds = MetricBounds.from_values("app", raw.values(), provenance="one user")
vmap = build_activity_map("alice", "app", raw, bounds)
best = sorted(vmap.entries, key=vmap.entries.get, reverse=True)[:3]
print("top three hours:", best)
print(vmap.to_json()[:120], "...")
