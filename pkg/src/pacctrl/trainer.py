"""Gradient-based PAC-Bayes training of a diagonal-Gaussian posterior over
symmetric gain vectors, and its sampled certificate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Sequence

import numpy as np

from .bounds import Certificate, final_continuous_bound, regularizer
from .divergences import DiagonalGaussian, kl_gaussian_diag
from .sim.policies import k_from_intercepts
from .sim.rollout import pmap, rollout_many
from .sim.world import (
    STREAM_CERT_SAMPLES,
    STREAM_TRAINER,
    Environment,
    RobotParams,
    SensorParams,
    derive_rng,
)

log = logging.getLogger(__name__)

HALF_DIM = 10


def embed_symmetric(w) -> np.ndarray:
    """Map 10 positive-angle gains to a full antisymmetric 20-ray gain vector."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != HALF_DIM:
        raise ValueError(f"expected {HALF_DIM} weights, got {w.shape[-1]}")
    return np.concatenate([-w[..., ::-1], w], axis=-1)


def positive_half(K) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    return K[..., HALF_DIM:].copy()


@dataclass
class GaussianPosterior:
    """N(mu, diag(exp(log_s))) over the 10 free gains."""

    mu: np.ndarray
    log_s: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).reshape(-1).copy()
        self.log_s = np.asarray(self.log_s, dtype=float).reshape(-1).copy()
        if self.mu.shape != self.log_s.shape:
            raise ValueError("mu and log_s must have the same length")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.log_s))):
            raise ValueError("posterior parameters must be finite")

    @property
    def variances(self) -> np.ndarray:
        return np.exp(self.log_s)

    def gaussian(self) -> DiagonalGaussian:
        return DiagonalGaussian(self.mu, self.variances)

    def sample_weights(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        size = self.mu.shape if n is None else (n, self.mu.size)
        return self.mu + np.sqrt(self.variances) * rng.standard_normal(size)

    def sample_gains(self, rng: np.random.Generator) -> np.ndarray:
        return embed_symmetric(self.sample_weights(rng))

    def to_dict(self) -> dict[str, Any]:
        return {"mu": self.mu.tolist(), "log_s": self.log_s.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GaussianPosterior":
        return cls(np.array(d["mu"]), np.array(d["log_s"]))


def default_prior(x0: float = 2.5, y0: float = 10.0, s0: float = 0.01) -> GaussianPosterior:
    mu0 = positive_half(k_from_intercepts(x0, y0))
    return GaussianPosterior(mu0, np.full(HALF_DIM, np.log(s0)))


@dataclass
class TrainerConfig:
    step_size: float = 0.01
    iterations: int = 500
    fd_step: float = 1e-2
    prior: GaussianPosterior = field(default_factory=default_prior)
    init: GaussianPosterior | None = None
    delta: float = 0.009
    delta_prime: float = 0.001
    sample_count: int = 30_000
    seed: int = 0
    batch_size: int | None = None

    def __post_init__(self):
        if not (self.step_size >= 0 and self.fd_step > 0):
            raise ValueError("step size must be >= 0 and finite-difference step > 0")
        if not (0 < self.delta and 0 < self.delta_prime and self.delta + self.delta_prime < 1):
            raise ValueError("need delta, delta_prime > 0 with delta + delta_prime < 1")
        if self.iterations < 0 or self.sample_count < 1:
            raise ValueError("iterations must be >= 0 and sample_count >= 1")


def numerical_gradient(f: Callable, x, h: float, vectorized: bool = False) -> np.ndarray:
    """Central-difference gradient of a scalar function.

    With ``vectorized=True``, ``f`` receives all 2d perturbed points as rows of
    one matrix and returns their values, which lets the caller batch rollouts.
    """
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    d = x.size
    steps = h * np.eye(d)
    pts = np.concatenate([x + steps, x - steps])
    if vectorized:
        vals = np.asarray(f(pts), dtype=float)
    else:
        vals = np.array([f(p) for p in pts], dtype=float)
    return (vals[:d] - vals[d:]) / (2.0 * h)


def _mean_surrogate(weight_rows: np.ndarray, envs: Sequence[Environment], rp, sp) -> np.ndarray:
    gains = embed_symmetric(weight_rows)
    total = np.zeros(gains.shape[0])
    for env in envs:
        total += rollout_many(gains, env, rp, sp)[1]
    return total / len(envs)


def pac_objective(mu, s, w, envs: Sequence[Environment], prior: GaussianPosterior, delta: float,
                  rp: RobotParams = RobotParams(), sp: SensorParams = SensorParams()) -> float:
    """Mean surrogate cost of the gains ``w`` plus the PAC-Bayes regularizer at N(mu, s)."""
    kl = kl_gaussian_diag(DiagonalGaussian(mu, s), prior.gaussian())
    cost = _mean_surrogate(np.atleast_2d(w), envs, rp, sp)[0]
    return float(cost + regularizer(kl, len(envs), delta))


def train(envs: Sequence[Environment], cfg: TrainerConfig, rp: RobotParams = RobotParams(),
          sp: SensorParams = SensorParams(), history: list | None = None) -> GaussianPosterior:
    """Gradient descent on (mu, log s) using one reparameterized sample per step.

    The objective at step t is B(mu, s, mu + sqrt(s) * xi_t) with xi_t fixed
    while its gradient is taken by central differences. If ``history`` is
    given, the objective at each iterate is appended to it.
    """
    n = len(envs)
    if n < 8:
        raise ValueError("training needs at least 8 environments")
    start = cfg.init or cfg.prior
    mu = start.mu.copy()
    eta = start.log_s.copy()
    d = mu.size
    prior_g = cfg.prior.gaussian()
    rng = derive_rng(cfg.seed, STREAM_TRAINER)

    for it in range(cfg.iterations):
        xi = rng.standard_normal(d)
        if cfg.batch_size:
            idx = np.sort(rng.choice(n, size=min(cfg.batch_size, n), replace=False))
            batch = [envs[i] for i in idx]
        else:
            batch = envs

        def objective(z):
            z = np.atleast_2d(z)
            m, e = z[:, :d], z[:, d:]
            w = m + np.exp(0.5 * e) * xi
            costs = _mean_surrogate(w, batch, rp, sp)
            regs = np.array([regularizer(kl_gaussian_diag(DiagonalGaussian(mi, np.exp(ei)), prior_g),
                                         n, cfg.delta) for mi, ei in zip(m, e)])
            return costs + regs

        z = np.concatenate([mu, eta])
        grad = numerical_gradient(objective, z, cfg.fd_step, vectorized=True)
        if history is not None or not np.all(np.isfinite(grad)):
            value = float(objective(z)[0])
            if not (np.isfinite(value) and np.all(np.isfinite(grad))):
                raise FloatingPointError(f"non-finite objective/gradient at iteration {it}: "
                                         f"value={value}, mu={mu}, log_s={eta}")
            if history is not None:
                history.append(value)
        mu = mu - cfg.step_size * grad[:d]
        eta = eta - cfg.step_size * grad[d:]
        if it % 50 == 0:
            log.debug("iteration %d: |grad|=%.3g", it, float(np.linalg.norm(grad)))
    return GaussianPosterior(mu, eta)


def _env_cost01(env: Environment, gains, rp, sp) -> float:
    return float(rollout_many(gains, env, rp, sp)[0].sum())


def sampled_train_cost(posterior: GaussianPosterior, envs: Sequence[Environment],
                       n_samples: int, seed: int, rp: RobotParams = RobotParams(),
                       sp: SensorParams = SensorParams(), workers: int = 1) -> float:
    """Average 0-1 cost of ``n_samples`` posterior draws over all environments."""
    rng = derive_rng(seed, STREAM_CERT_SAMPLES)
    gains = np.ascontiguousarray(embed_symmetric(posterior.sample_weights(rng, n_samples)))
    sums = pmap(partial(_env_cost01, gains=gains, rp=rp, sp=sp), list(envs), workers)
    return float(np.sum(sums) / (n_samples * len(envs)))


def certify_continuous(posterior: GaussianPosterior, prior: GaussianPosterior,
                       envs: Sequence[Environment], cfg: TrainerConfig,
                       rp: RobotParams = RobotParams(), sp: SensorParams = SensorParams(),
                       workers: int = 1) -> Certificate:
    """Certificate from the 0-1 training cost of ``cfg.sample_count`` posterior draws."""
    est = sampled_train_cost(posterior, envs, cfg.sample_count, cfg.seed, rp, sp, workers)
    kl = kl_gaussian_diag(posterior.gaussian(), prior.gaussian())
    cert = final_continuous_bound(est, cfg.sample_count, cfg.delta_prime, kl, len(envs), cfg.delta)
    cert.extra.update(posterior=posterior.to_dict(), prior=prior.to_dict())
    return cert
