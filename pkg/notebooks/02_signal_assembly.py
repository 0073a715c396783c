"""
Combining channels and learning their weights
=============================================

A use case can rank slots with more than one metric. Each metric's map is
weighted, and the weight is scaled by how active the user is on that
channel. The weights themselves are fitted to observed slot ranks.
"""
import numpy as np

from besttime.assembler import (AssemblerSpec, TrainingExample, assemble, learn_weights,
                                rank_slots)
from besttime.slots import TemporalActivityMap

hours = np.arange(24)
app = TemporalActivityMap("bob", "app", {h: float(np.exp(-((h - 20) / 3) ** 2)) for h in hours})
web = TemporalActivityMap("bob", "web", {h: float(np.exp(-((h - 9) / 2) ** 2)) for h in hours})

spec = AssemblerSpec("digest", ("app", "web"), {"app": 1.0, "web": 0.01})
for web_level in (0.0, 1.0):
    merged = assemble(spec, {"app": app, "web": web}, {"app": 1.0, "web": web_level})
    print(f"web activity {web_level}: top slots {rank_slots(merged)[:4]}")

# a user barely seen in the app: flat app map, so the small web weight decides
quiet = TemporalActivityMap("bob", "app", {h: 0.0 for h in hours})
merged = assemble(spec, {"app": quiet, "web": web}, {"app": 1.0, "web": 1.0})
print("quiet app user, top slots:", rank_slots(merged)[:4])

# weight learning: targets built from known weights, then recovered
rng = np.random.default_rng(1)
examples = []
for u in range(200):
    ra, rb = rng.permutation(24), rng.permutation(24)
    gate = rng.uniform(0.2, 1.0)
    target = ra + 0.01 * gate * rb + rng.normal(0, 0.05, 24)
    examples.append(TrainingExample(f"u{u}", {s: {"app": ra[s], "web": rb[s]} for s in range(24)},
                                    {"app": 1.0, "web": gate}, dict(enumerate(target))))
fit = learn_weights(examples, {"app": 1.0, "web": 1.0})
print("learned weights:", {m: round(w, 5) for m, w in fit.spec.weights.items()})
print(f"loss {fit.report.loss:.4f} (initial {fit.init_loss:.1f})")
