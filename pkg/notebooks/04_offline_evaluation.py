"""
Offline ranking quality by activity cohort
==========================================

Score each user's predicted slot order with NDCG against what they actually
did, then break the average down by how active users are.
"""
import numpy as np

from besttime.evaluation import cohort_report, ndcg, summarize_ndcg

rng = np.random.default_rng(2)
reports, rows = [], []
for u in range(2000):
    level = rng.uniform()
    truth = rng.gamma(2.0, 1.0, 24)
    # more active users give the predictor more signal to work with
    noisy = truth + rng.normal(0, 3.0 * (1.0 - level) + 0.2, 24)
    order = list(np.argsort(-noisy))
    r = ndcg(order, dict(enumerate(truth)), k=3, user=f"u{u}")
    reports.append(r)
    rows.append((r.user, {"app": level}, r.ndcg))

s = summarize_ndcg(reports)
print(f"mean NDCG@3 over {s.n_users} users: {s.mean:.4f}")
print(cohort_report(rows, channels=["app"]).format())
