"""Sensing, stepping and full rollouts, plus batched evaluation over environments.

Parallel evaluation splits work by environment index only; each piece is a
pure function of its inputs, so results do not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Protocol, Sequence

import numpy as np

from . import _kernels
from .policies import check_gains
from .world import (
    INIT_STATE,
    STREAM_POLICY_DRAWS,
    STREAM_TEST_ENVS,
    WALLS,
    EnvDistribution,
    Environment,
    RobotParams,
    SensorParams,
    derive_rng,
    derive_seed,
    sample_environment,
)

SURROGATE_SCALE = 5.0


@dataclass(frozen=True)
class RolloutResult:
    cost01: int
    surrogate: float
    steps_survived: int
    min_clearance: float


def surrogate_cost(min_clearance):
    """1 - clearance / 5 m, clipped to [0, 1]; works elementwise on arrays."""
    return np.clip(1.0 - np.asarray(min_clearance) / SURROGATE_SCALE, 0.0, 1.0)


def raycast(state, env: Environment, sp: SensorParams = SensorParams()) -> np.ndarray:
    x, y, psi = (float(v) for v in state)
    out = np.empty(sp.n_rays)
    _kernels.raycast_into(x, y, psi, sp.angles(), env.obstacles, WALLS, float(sp.horizon), out)
    return out


def step(state, u_diff: float, rp: RobotParams = RobotParams()) -> tuple[float, float, float]:
    """One forward-Euler step of the differential-drive model."""
    x, y, psi = (float(v) for v in state)
    return _kernels.euler_step(x, y, psi, float(u_diff), rp.wheel_radius, rp.base_width,
                               rp.u0, rp.dt)


def _run_batch(gain_rows: np.ndarray, env: Environment, rp: RobotParams, sp: SensorParams,
               noise: np.ndarray | None = None):
    gain_rows = np.ascontiguousarray(gain_rows, dtype=float)
    use_noise = noise is not None
    if noise is None:
        noise = np.zeros((gain_rows.shape[0], 1))
    x0, y0, psi0 = INIT_STATE
    return _kernels.rollout_batch(gain_rows, env.obstacles, WALLS, sp.angles(), x0, y0, psi0,
                                  rp.wheel_radius, rp.base_width, rp.u0, rp.dt, int(rp.horizon),
                                  rp.body_radius, float(sp.horizon), sp.min_depth,
                                  np.ascontiguousarray(noise, dtype=float), use_noise)


def _result(collided, steps, min_clear) -> RolloutResult:
    return RolloutResult(int(collided), float(surrogate_cost(min_clear)), int(steps),
                         float(min_clear))


def rollout(K, env: Environment, rp: RobotParams = RobotParams(),
            sp: SensorParams = SensorParams()) -> RolloutResult:
    """Sense, act and step for ``rp.horizon`` steps or until a collision."""
    K = check_gains(K, sp)
    c, s, m = _run_batch(K[None, :], env, rp, sp)
    return _result(c[0], s[0], m[0])


def rollout_with_disturbance(K, env: Environment, rp: RobotParams = RobotParams(),
                             sp: SensorParams = SensorParams(), noise_std: float = 0.0,
                             noise_seed: int = 0) -> RolloutResult:
    """Rollout with Gaussian actuation noise of std ``noise_std * u0`` added before clamping."""
    if not noise_std >= 0.0:
        raise ValueError("noise_std must be >= 0")
    K = check_gains(K, sp)
    if noise_std == 0.0:
        return rollout(K, env, rp, sp)
    noise = np.random.default_rng(int(noise_seed)).standard_normal(int(rp.horizon))
    noise *= noise_std * rp.u0
    c, s, m = _run_batch(K[None, :], env, rp, sp, noise[None, :])
    return _result(c[0], s[0], m[0])


def rollout_many(gain_rows, env: Environment, rp: RobotParams = RobotParams(),
                 sp: SensorParams = SensorParams()) -> tuple[np.ndarray, np.ndarray]:
    """(cost01, surrogate) arrays for each gain row in one environment."""
    c, _, m = _run_batch(gain_rows, env, rp, sp)
    return c.astype(float), surrogate_cost(m)


def pmap(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map, optionally over a process pool."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _env_costs(env: Environment, gain_rows, rp, sp) -> np.ndarray:
    return rollout_many(gain_rows, env, rp, sp)[0]


def cost_matrix(envs: Sequence[Environment], policies: Sequence, rp: RobotParams = RobotParams(),
                sp: SensorParams = SensorParams(), workers: int = 1, env_ids=None,
                policy_ids=None):
    """0-1 collision cost of every policy in every environment."""
    from ..rep_optimizer import CostMatrix

    if not envs or not len(policies):
        raise ValueError("need at least one environment and one policy")
    gain_rows = np.ascontiguousarray(np.stack([check_gains(K, sp) for K in policies]))
    rows = pmap(partial(_env_costs, gain_rows=gain_rows, rp=rp, sp=sp), list(envs), workers)
    return CostMatrix(np.vstack(rows), list(env_ids or []), list(policy_ids or []))


class PolicySampler(Protocol):
    def sample_gains(self, rng: np.random.Generator) -> np.ndarray: ...


@dataclass
class FinitePosterior:
    """Distribution over a fixed list of gain vectors."""

    policies: np.ndarray
    probs: np.ndarray

    def sample_gains(self, rng: np.random.Generator) -> np.ndarray:
        j = rng.choice(len(self.probs), p=self.probs)
        return self.policies[j]


def _true_cost_chunk(indices, posterior: PolicySampler, dist: EnvDistribution, seed: int,
                     rp: RobotParams, sp: SensorParams) -> np.ndarray:
    out = np.empty(len(indices))
    for n, i in enumerate(indices):
        env = sample_environment(dist, derive_seed(seed, STREAM_TEST_ENVS, i))
        K = posterior.sample_gains(derive_rng(seed, STREAM_POLICY_DRAWS, i))
        out[n] = rollout(K, env, rp, sp).cost01
    return out


def sample_true_costs(posterior: PolicySampler, dist: EnvDistribution, M: int, seed: int,
                      rp: RobotParams = RobotParams(), sp: SensorParams = SensorParams(),
                      workers: int = 1, chunk: int = 500) -> np.ndarray:
    """0-1 costs over ``M`` fresh environments, one posterior draw per environment."""
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")
    chunks = [range(a, min(a + chunk, M)) for a in range(0, M, chunk)]
    fn = partial(_true_cost_chunk, posterior=posterior, dist=dist, seed=seed, rp=rp, sp=sp)
    return np.concatenate(pmap(fn, chunks, workers))


def estimate_true_cost(posterior: PolicySampler, dist: EnvDistribution, M: int, seed: int,
                       rp: RobotParams = RobotParams(), sp: SensorParams = SensorParams(),
                       workers: int = 1) -> float:
    """Monte-Carlo expected 0-1 cost over fresh environments."""
    return float(sample_true_costs(posterior, dist, M, seed, rp, sp, workers).mean())
