"""
Publishing maps and serving a batch
===================================

Maps are published per weekday into a versioned store. A batch of
scheduling requests is then answered from whatever version is live.
"""
import tempfile

from besttime.config import DeploymentConfig
from besttime.service import handle_batch
from besttime.slots import DAY, HOUR, TemporalActivityMap
from besttime.store import SignalStore, publish_maps

config = DeploymentConfig.from_dict({
    "providers": [{"metric": "app", "kind": "counter"}],
    "use_cases": [
        {"id": "digest", "tier": "high", "metrics": ["app"],
         "policy": {"kind": "avoid_nearby", "w": 1}},
        {"id": "promo", "tier": "low", "metrics": ["app"]},
    ],
})

store = SignalStore(tempfile.mkdtemp())
for day in range(7):
    peak = 19 + day % 3
    maps = [TemporalActivityMap("dave", "app", {h: 1.0 if h == peak else 0.2 for h in range(24)})]
    version = publish_maps(store, day, maps)
print("store version", version)

monday = 19730 * DAY
requests = [
    {"use_case": "digest", "user": "dave", "t_start": monday, "t_end": monday + DAY, "n": 2,
     "slot_length": HOUR},
    {"use_case": "promo", "user": "dave", "t_start": monday, "t_end": monday + DAY, "n": 1,
     "slot_length": HOUR},
    {"use_case": "digest", "user": "erin", "t_start": monday, "t_end": monday + DAY, "n": 1,
     "slot_length": HOUR},
    {"use_case": "newsletter", "user": "dave", "t_start": monday, "t_end": monday + DAY, "n": 1,
     "slot_length": HOUR},
]
for result in handle_batch(requests, store, config, seed=11):
    print(result.to_json())
