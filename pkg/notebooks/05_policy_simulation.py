"""
Simulated comparison of slot policies
=====================================

A synthetic population receives three sends a day. The scheduler sees
only activity counters; engagement comes from hidden per-user curves,
and a send right after another one is worth less.
"""
from besttime.sim import EngagementModel, ExperimentConfig, PopulationConfig, run_experiment

population = PopulationConfig(size=2000, width=(10.0, 14.0), shape_exponent=4.0,
                              activity_width_ratio=0.25, activity_rate=5.0)
for delta in (0.5, 1.0):
    config = ExperimentConfig(kind="policy_comparison", population=population,
                              engagement=EngagementModel(delta=delta), seed=0, bootstrap=300)
    print(f"follow-up sends worth {delta:.0%} of a fresh one")
    print(run_experiment(config).format())
    print()

# coordination: ten use cases per user, half of them low priority
coord = ExperimentConfig(kind="coordination", population=PopulationConfig(size=2000), n=1,
                         seed=0, bootstrap=300)
print(run_experiment(coord).format())
