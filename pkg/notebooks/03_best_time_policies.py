"""
Choosing N slots from a ranked map
==================================

Top-N takes the N best slots. Avoid-nearby takes the best slot, then
skips its neighbours before taking the next one. Low-priority use cases
give up the single best slot to the high-priority ones.
"""
from besttime.policy import (BestTimePolicy, SchedulingRequest, avoid_nearby_policy, schedule,
                             top_n_policy)
from besttime.slots import DAY, HOUR, TemporalActivityMap

scores = {h: 0.05 for h in range(24)}
scores.update({9: 1.0, 10: 0.9, 20: 0.8, 21: 0.7})
vmap = TemporalActivityMap("carol", "app", scores)

print("top-3:           ", top_n_policy(vmap, 3))
for w in (1, 2, 3):
    print(f"avoid {w} nearby:  ", avoid_nearby_policy(vmap, 3, w))
print("low priority, n=1:", avoid_nearby_policy(vmap, 1, 1, priority="low"))

# a full request: slots are jittered inside the hour so sends spread out
day0 = 19729 * DAY
req = SchedulingRequest("digest", "carol", day0, day0 + DAY, 3, HOUR,
                        BestTimePolicy("avoid_nearby", 1))
plan = schedule(req, vmap, rng_seed=7)
print(plan.to_json())
print("minutes past the hour:", [(t - day0) % HOUR // 60 for t in plan.timestamps])
