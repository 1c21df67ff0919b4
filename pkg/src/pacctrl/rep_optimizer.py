"""Posterior optimization over a finite policy set.

For a fixed lambda the PAC-Bayes objective reduces to minimizing a linear
cost over a KL ball around the prior. That inner problem has a one-parameter
family of solutions (exponential tilts of the prior), so it is solved exactly
by bisection on the tilt strength instead of a generic conic solver.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .bounds import (
    Certificate,
    certificate_klinv,
    complexity_budget,
    regularizer,
    robust_final_bound,
    robust_pac_objective,
)
from .divergences import as_prob_vector, kl_discrete

DEFAULT_LAMBDA_GRID = 100
KKT_TOL = 1e-10


@dataclass
class CostMatrix:
    """N x L rollout costs; row i is environment i, column j is policy j."""

    entries: np.ndarray
    env_ids: list[str] = field(default_factory=list)
    policy_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        c = np.asarray(self.entries, dtype=float)
        if c.ndim != 2 or c.shape[1] < 1:
            raise ValueError("cost matrix must be 2-D with at least one column")
        if not np.all(np.isfinite(c)) or c.min() < 0.0 or c.max() > 1.0:
            raise ValueError("cost entries must lie in [0, 1]")
        self.entries = c
        n, l = c.shape
        if not self.env_ids:
            self.env_ids = [f"env{i}" for i in range(n)]
        if not self.policy_ids:
            self.policy_ids = [f"pi{j}" for j in range(l)]
        if len(self.env_ids) != n or len(self.policy_ids) != l:
            raise ValueError("id lists do not match the matrix shape")

    @property
    def n_envs(self) -> int:
        return self.entries.shape[0]

    @property
    def n_policies(self) -> int:
        return self.entries.shape[1]

    def column_mean(self) -> np.ndarray:
        return self.entries.mean(axis=0)

    def exp_column_mean(self) -> np.ndarray:
        return np.exp(self.entries).mean(axis=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["env_id", *self.policy_ids])
        for env_id, row in zip(self.env_ids, self.entries):
            w.writerow([env_id, *(_fmt_cost(v) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CostMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:1] != ["env_id"]:
            raise ValueError("cost matrix CSV must start with an 'env_id' header")
        policy_ids = rows[0][1:]
        env_ids = [r[0] for r in rows[1:]]
        entries = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
        return cls(entries, env_ids, policy_ids)

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path) -> "CostMatrix":
        return cls.from_csv(Path(path).read_text())


def _fmt_cost(v: float) -> str:
    if v == 0.0:
        return "0"
    if v == 1.0:
        return "1"
    return repr(float(v))


@dataclass
class FiniteSolution:
    posterior: np.ndarray
    lambda_star: float
    pac_objective: float
    tau_star: float
    # rows of (lambda, radius, tau, objective); infeasible lambdas are skipped
    diagnostics: list[tuple[float, float, float, float]]
    feasible: bool = True


def _tilt(log_p0: np.ndarray, shifted: np.ndarray, t: float) -> tuple[np.ndarray, float]:
    """Tilted distribution p ~ p0 * exp(-t * shifted) and its KL from p0."""
    logits = log_p0 - t * shifted
    log_z = logsumexp(logits)
    log_p = logits - log_z
    p = np.exp(log_p)
    kl = float(np.dot(p, -t * shifted)) - log_z
    return p, max(kl, 0.0)


def kl_ball_linear_min(cbar, p0, radius: float) -> np.ndarray:
    """argmin_p cbar . p over the simplex subject to KL(p || p0) <= radius."""
    cbar = np.asarray(cbar, dtype=float)
    p0 = as_prob_vector(p0, "p0")
    if cbar.ndim != 1 or cbar.size == 0 or cbar.shape != p0.shape:
        raise ValueError("cbar must be a non-empty vector matching p0")
    if not radius >= 0.0:
        raise ValueError(f"radius={radius!r} must be >= 0")
    if np.any(p0 <= 0.0):
        raise ValueError("prior must be strictly positive")
    if radius == 0.0:
        return p0.copy()

    shifted = cbar - cbar.min()
    at_min = shifted == 0.0
    vertex = np.where(at_min, p0, 0.0)
    vertex /= vertex.sum()
    # KL of the zero-temperature limit: p0 restricted to argmin(cbar)
    if radius >= -math.log(float(p0[at_min].sum())):
        return vertex

    log_p0 = np.log(p0)
    lo, hi = 0.0, 1.0
    while _tilt(log_p0, shifted, hi)[1] < radius:
        lo, hi = hi, 2.0 * hi
        if hi > 1e200:
            # cost gaps too small to resolve; this tilt is feasible and within
            # rounding of the optimal value
            return _tilt(log_p0, shifted, hi)[0]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        kl_mid = _tilt(log_p0, shifted, mid)[1]
        if kl_mid <= radius:
            lo = mid
            if radius - kl_mid <= KKT_TOL:
                break
        else:
            hi = mid
    return _tilt(log_p0, shifted, lo)[0]


def _lambda_sweep(cbar, p0, radius_of, lambdas, objective_of):
    rows = []
    best = None
    for lam in lambdas:
        radius = radius_of(lam)
        if radius < 0.0:
            continue
        p = kl_ball_linear_min(cbar, p0, radius)
        tau = float(np.dot(cbar, p)) + lam
        obj = objective_of(p)
        rows.append((float(lam), float(radius), tau, obj))
        # strict comparison keeps the smallest lambda on ties
        if best is None or obj < best[3]:
            best = (float(lam), p, tau, obj)
    return best, rows


def optimize_finite(cm: CostMatrix, p0, delta: float,
                    lambda_grid_size: int = DEFAULT_LAMBDA_GRID) -> FiniteSolution:
    """Minimize training cost + regularizer over posteriors on the policy set.

    Sweeps lambda over a uniform grid on [0, 1]; for each lambda the KL budget
    is 2 N lambda^2 - log(2 sqrt(N) / delta). Among the per-lambda optima the
    one with the smallest PAC-Bayes objective wins.
    """
    p0 = as_prob_vector(p0, "p0")
    if p0.size != cm.n_policies:
        raise ValueError("prior length does not match the number of policies")
    n = cm.n_envs
    cbar = cm.column_mean()
    offset = complexity_budget(0.0, n, delta) * n

    def objective(p):
        return float(np.dot(cbar, p)) + regularizer(kl_discrete(p, p0), n, delta)

    lambdas = np.linspace(0.0, 1.0, lambda_grid_size)
    best, rows = _lambda_sweep(cbar, p0, lambda lam: 2.0 * n * lam * lam - offset,
                               lambdas, objective)
    if best is None:
        return FiniteSolution(p0.copy(), math.nan, objective(p0), math.nan, rows, feasible=False)
    lam, p, tau, obj = best
    return FiniteSolution(p, lam, obj, tau, rows)


def certify_finite(sol: FiniteSolution, cm: CostMatrix, p0, delta: float) -> Certificate:
    """kl-inverse certificate for the posterior in ``sol``."""
    p0 = as_prob_vector(p0, "p0")
    p = as_prob_vector(sol.posterior, "posterior")
    if p.size != cm.n_policies or p0.size != p.size:
        raise ValueError("posterior, prior and cost matrix disagree on the policy count")
    train = min(1.0, max(0.0, float(np.dot(cm.column_mean(), p))))
    cert = certificate_klinv(train, kl_discrete(p, p0), cm.n_envs, delta)
    cert.extra.update(lambda_star=sol.lambda_star, pac_objective=sol.pac_objective,
                      posterior=p.tolist(), feasible=sol.feasible)
    return cert


def optimize_finite_robust(cm: CostMatrix, p0, delta: float, budget: float,
                           lambda_grid_size: int = DEFAULT_LAMBDA_GRID
                           ) -> tuple[FiniteSolution, Certificate]:
    """Distributionally robust variant on exponentiated costs.

    lambda runs over [0, e - 1] and the KL budget becomes
    2 N lambda^2 / (e - 1)^2 - log(2 sqrt(N) / delta). The certificate is the
    robust kl-inverse program evaluated on the plain training cost.
    """
    p0 = as_prob_vector(p0, "p0")
    if p0.size != cm.n_policies:
        raise ValueError("prior length does not match the number of policies")
    n = cm.n_envs
    cbar_e = cm.exp_column_mean()
    offset = complexity_budget(0.0, n, delta) * n
    em1 = math.e - 1.0

    def objective(p):
        mean_e = min(math.e, max(1.0, float(np.dot(cbar_e, p))))
        return robust_pac_objective(mean_e, kl_discrete(p, p0), n, delta, budget)

    lambdas = np.linspace(0.0, em1, lambda_grid_size)
    best, rows = _lambda_sweep(cbar_e, p0, lambda lam: 2.0 * n * lam * lam / em1 ** 2 - offset,
                               lambdas, objective)
    if best is None:
        sol = FiniteSolution(p0.copy(), math.nan, objective(p0), math.nan, rows, feasible=False)
    else:
        lam, p, tau, obj = best
        sol = FiniteSolution(p, lam, obj, tau, rows)

    train = min(1.0, max(0.0, float(np.dot(cm.column_mean(), sol.posterior))))
    cert = robust_final_bound(train, kl_discrete(sol.posterior, p0), n, delta, budget)
    cert.extra.update(lambda_star=sol.lambda_star, pac_objective=sol.pac_objective,
                      posterior=sol.posterior.tolist(), feasible=sol.feasible)
    return sol, cert
