"""Multi-agent sparse linear bandits that share thresholded-Lasso support estimates."""

from .agents import Agent, AgentHistory, SyncParams, lambda_schedule, threshold_value
from .comm import (
    CommLog,
    SyncMessage,
    Topology,
    gen_random_connected_graph,
    is_sync_step,
    peer_exchange,
    record_comm,
    server_aggregate,
    sync_grid,
)
from .env import (
    ContextSet,
    EnvConfig,
    SparseParameter,
    gen_contexts,
    gen_parameter,
    instant_regret,
    load_feature_file,
    reward,
)
from .estimators import CoordinateDescentLasso, IncrementalRidge, ThresholdedLasso
from .experiment import (
    ExperimentConfig,
    RegretTrace,
    aggregate_replicas,
    emit_csv,
    load_config,
    run_ctl,
    run_experiment,
    run_sa_lasso,
    run_th_lasso_single,
)
from .solvers import LassoConfig, RidgeState, lasso_fit, ridge_estimate, ridge_update, soft_threshold

__version__ = "0.1.0"
