"""Shared fixture builders for the test suite."""
import numpy as np

from besttime.assembler import TrainingExample
from besttime.slots import TemporalActivityMap


def stacking_fixture(weights, n_users=200, n_slots=24, noise=0.05, seed=0,
                     gate_range=(0.2, 1.0), first_gate_one=True):
    """Users whose target rank is a known gated weighted sum of metric ranks.

    Targets are real valued (weighted ranks plus small Gaussian noise) so the
    generating weights are identifiable even when one of them is tiny.
    """
    rng = np.random.default_rng(seed)
    metrics = list(weights)
    w = np.array([weights[m] for m in metrics], dtype=float)
    examples = []
    for u in range(n_users):
        gates = rng.uniform(*gate_range, len(metrics))
        if first_gate_one:
            gates[0] = 1.0
        ranks = np.array([rng.permutation(n_slots) for _ in metrics], dtype=float)
        target = (w * gates) @ ranks + rng.normal(0.0, noise, n_slots)
        examples.append(TrainingExample(
            f"u{u}",
            {s: {m: float(ranks[k, s]) for k, m in enumerate(metrics)} for s in range(n_slots)},
            {m: float(gates[k]) for k, m in enumerate(metrics)},
            {s: float(target[s]) for s in range(n_slots)}))
    return examples


def peaked_map(user="u", peaks=None, base=0.05, n=24, metric="m"):
    peaks = peaks or {9: 1.0, 10: 0.9, 20: 0.8}
    return TemporalActivityMap(user, metric, {s: peaks.get(s, base) for s in range(n)})



def literal_avoid_nearby(scores, n, w, low_priority, refill=False):
    """Step-by-step avoid-w-nearby selection written independently of the
    library: a list of (slot, score) pairs scanned in slot order.

    With ``refill`` an underfilled pick is topped up from slots the window
    removed, best score first, lowest slot on ties.
    """
    wanted = n
    remaining = sorted(scores.items())
    window_removed = []

    def top(pairs):
        best = None
        for slot, score in pairs:  # strict > keeps the earliest slot on ties
            if best is None or score > best[1]:
                best = (slot, score)
        return best

    if low_priority and remaining:
        peak = top(remaining)
        remaining = [p for p in remaining if p != peak]
    picked = []
    while n > 0:
        n -= 1
        if not remaining:
            break
        best_slot = top(remaining)[0]
        picked.append(best_slot)
        keep = []
        for slot, score in remaining:
            if best_slot - w <= slot <= best_slot + w:
                if slot != best_slot:
                    window_removed.append((slot, score))
            else:
                keep.append((slot, score))
        remaining = keep
    if refill and len(picked) < wanted:
        pool = sorted(window_removed, key=lambda p: (-p[1], p[0]))
        picked += [slot for slot, _ in pool[:wanted - len(picked)]]
    return picked
