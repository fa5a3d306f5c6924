"""Engine integration: rollout gradients behind the oracle surface.

The engine samples component indices; here an index is the seed of one
whole episode, so a gradient evaluation is a pure function of the index
and the parameter vector. Inside an episode the agent interacts in
segments of at most t_max steps, bootstrapping the critic's estimate at
non-terminal segment ends, and the per-segment gradients accumulate
into one update. Mini-batch size m (the engine's batch_size) counts
episodes per local update; B local updates make one pushed vector.
"""
from __future__ import annotations

import threading
import time
from dataclasses import replace

import numpy as np

from ..engine import ProblemSpec, RunConfig, RunResult, run_with_oracle
from ..engine.rng import ROLE_ENV, ROLE_SAMPLE, draw_indices, substream
from ..errors import ConfigurationError
from .agent import ActorCriticParams, ac_gradients, kstep_returns, rollout
from .env import N_ACTIONS, ToyEnv

# virtual pool of episode seeds the engine samples indices from
INDEX_POOL = 2**31 - 1

RETURN_WINDOW = 100


class GridworldOracle:
    """Gradient oracle whose components are seeded gridworld episodes."""

    name = "gridworld-a2c"

    def __init__(self, env: ToyEnv, seed: int, t_max: int = 20):
        env.validate()
        if t_max < 1:
            raise ConfigurationError(f"t_max must be >= 1, got {t_max}")
        self.env = env
        self.seed = seed
        self.t_max = t_max
        self.n = INDEX_POOL
        self.split = env.n_states * N_ACTIONS
        self.dim = self.split + env.n_states
        self.env_steps = 0
        self.episode_returns: list[float] = []
        self.history: list[tuple[float, int, float]] = []
        self._lock = threading.Lock()
        self._start = time.monotonic()

    def _episode(self, index: int, params: ActorCriticParams):
        env = replace(self.env)
        rng = substream(self.seed, ROLE_ENV, int(index))
        g_theta = np.zeros_like(params.theta)
        g_v = np.zeros_like(params.theta_v)
        total_reward = 0.0
        while not env.done:
            traj = rollout(env, params, self.t_max, rng)
            returns = kstep_returns(traj, env.gamma_rl)
            gt, gv = ac_gradients(traj, returns, params)
            g_theta += gt
            g_v += gv
            total_reward += float(traj.rewards.sum())
        return g_theta, g_v, env.steps_taken, total_reward

    def grad_at(self, i, x) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(i, dtype=np.int64))
        params = ActorCriticParams.from_vector(
            x, self.env.n_states, N_ACTIONS
        )
        out = np.zeros(self.dim)
        for index in idx:
            g_theta, g_v, steps, ret = self._episode(index, params)
            out[: self.split] -= g_theta.ravel()
            out[self.split :] += g_v
            with self._lock:
                self.env_steps += steps
                self.episode_returns.append(ret)
                self.history.append(
                    (
                        time.monotonic() - self._start,
                        self.env_steps,
                        self.mean_return_last(),
                    )
                )
        return out

    def mean_return_last(self, window: int = RETURN_WINDOW) -> float:
        tail = self.episode_returns[-window:]
        if not tail:
            return float("nan")
        return float(np.mean(tail))


def hsa2c_config(env: ToyEnv, *, m: int = 2, t_max: int = 20, **overrides) -> RunConfig:
    """Engine config for a gridworld run.

    Defaults use a small asynchronous shape (two workers, two threads,
    two local updates, master batch two) with rates tame enough for the
    one-hot policy to converge well inside a 200k-step budget.
    """
    base = dict(
        T=300,
        M=2,
        nW=2,
        p=2,
        B=2,
        eta=0.1,
        rho_schedule={"kind": "constant", "value": 0.4},
        seed=0,
        problem=ProblemSpec(
            name="gridworld-a2c",
            n=INDEX_POOL,
            dim=env.n_states * (N_ACTIONS + 1),
            batch_size=m,
            params={
                "side": env.side,
                "t_max": t_max,
                "gamma_rl": env.gamma_rl,
                "t_max_episode": env.t_max_episode,
            },
        ),
        execution="simulated",
        grad_norm_every=0,
    )
    base.update(overrides)
    cfg = RunConfig(**base)
    cfg.validate()
    return cfg


def run_hsa2c(
    cfg: RunConfig, env: ToyEnv, params0: ActorCriticParams | None = None
) -> tuple[ActorCriticParams, RunResult, GridworldOracle]:
    """Run the engine over the concatenated (theta, theta_v) vector."""
    if cfg.grad_norm_every:
        raise ConfigurationError(
            "rollout objectives have no full gradient; set grad_norm_every=0"
        )
    if params0 is None:
        params0 = ActorCriticParams.zeros(env.n_states)
    t_max = int(cfg.problem.params.get("t_max", 20))
    oracle = GridworldOracle(env, cfg.seed, t_max=t_max)
    if cfg.problem.dim != oracle.dim:
        raise ConfigurationError(
            f"config dim {cfg.problem.dim} != oracle dim {oracle.dim}"
        )
    result = run_with_oracle(cfg, oracle, init=params0.to_vector())
    params = ActorCriticParams.from_vector(
        result.final.values, env.n_states, N_ACTIONS
    )
    return params, result, oracle


def reference_a2c(
    env: ToyEnv,
    *,
    T: int,
    m: int,
    eta: float,
    rho,
    seed: int,
    t_max: int = 20,
    params0: ActorCriticParams | None = None,
) -> tuple[ActorCriticParams, GridworldOracle]:
    """Single-stream A2C mirroring the degenerate engine configuration.

    Uses the same index substream, episode seeding, and floating-point
    update order as the engine with nW = p = B = M = 1, so results agree
    bitwise with run_hsa2c under that shape.
    """
    if params0 is None:
        params0 = ActorCriticParams.zeros(env.n_states)
    oracle = GridworldOracle(env, seed, t_max=t_max)
    v = params0.to_vector()
    for t in range(T):
        rng = substream(seed, ROLE_SAMPLE, 0, 0, t)
        idx = np.atleast_1d(draw_indices(rng, oracle.n, m))
        g = np.asarray(oracle.grad_at(idx, v), dtype=float)
        u = v.copy()
        u -= eta * g
        v = v + rho(t) * (u - v)
    return ActorCriticParams.from_vector(v, env.n_states, N_ACTIONS), oracle
