"""Asynchronous advantage actor-critic on a toy gridworld."""
from .agent import (
    ActorCriticParams,
    Trajectory,
    ac_gradients,
    kstep_returns,
    policy_matrix,
    policy_probs,
    rollout,
)
from .env import (
    MOVES,
    N_ACTIONS,
    ToyEnv,
    optimal_return,
    transition_tables,
    uniform_policy_return,
)
from .runner import (
    INDEX_POOL,
    GridworldOracle,
    hsa2c_config,
    reference_a2c,
    run_hsa2c,
)

__all__ = [
    "ActorCriticParams",
    "GridworldOracle",
    "INDEX_POOL",
    "MOVES",
    "N_ACTIONS",
    "ToyEnv",
    "Trajectory",
    "ac_gradients",
    "hsa2c_config",
    "kstep_returns",
    "optimal_return",
    "policy_matrix",
    "policy_probs",
    "reference_a2c",
    "rollout",
    "run_hsa2c",
    "transition_tables",
    "uniform_policy_return",
]
