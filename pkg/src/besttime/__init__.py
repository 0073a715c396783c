"""Per-user best-time scheduling: activity maps, signal assembly, slot
policies, offline evaluation and a synthetic experiment harness."""

from .assembler import (AssemblerSpec, GroundTruthRanking, LearnedWeights, LearnerConfig,
                        RankLossReport, TrainingExample, assemble, learn_weights, rank_loss,
                        rank_slots)
from .config import DeploymentConfig, UseCaseConfig
from .errors import (BestTimeError, ConfigurationError, DegenerateAssemblyError,
                     EmptyCandidateError, InvalidArgumentError, NotFoundError,
                     PublishRejectedError, UndefinedRatioError, UnknownUseCaseError)
from .evaluation import (CohortTable, NdcgReport, cohort_report, efficiency_ratio, ndcg,
                         relative_lift)
from .policy import (BestTimePolicy, ExecutionPlan, SchedulingRequest, apply_jitter,
                     avoid_nearby_policy, schedule, select_slots, top_n_policy)
from .service import RequestError, handle_batch
from .signals import (ActivityCounter, ChannelActivityLevel, SignalProvider,
                      channel_activity_level, counter_signal, local_time_features,
                      record_activity, synthetic_predictor_signal, windowed_activity_features)
from .sim import (EngagementModel, ExperimentConfig, PopulationConfig, run_assembly_experiment,
                  run_coordination_experiment, run_experiment, run_policy_comparison)
from .slots import (MetricBounds, TemporalActivityMap, TimeSlot, build_activity_map, normalize,
                    partition_range)
from .store import SignalStore, publish_maps

__version__ = "0.1.0"
