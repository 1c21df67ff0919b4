"""Planar obstacle-avoidance simulator: differential-drive robot, depth rays,
reactive linear policies."""

from .policies import check_gains, control, finite_policy_grid, grid_policy_ids, k_from_intercepts
from .rollout import (
    FinitePosterior,
    RolloutResult,
    cost_matrix,
    estimate_true_cost,
    raycast,
    rollout,
    rollout_many,
    rollout_with_disturbance,
    sample_true_costs,
    step,
    surrogate_cost,
)
from .world import (
    INIT_STATE,
    WALLS,
    EnvDistribution,
    Environment,
    RobotParams,
    SensorParams,
    derive_rng,
    derive_seed,
    sample_environment,
    sample_environments,
)
