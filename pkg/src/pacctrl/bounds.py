"""PAC-Bayes bound formulas and the :class:`Certificate` record.

All bounds are for costs in [0, 1] and need at least 8 training
environments. The non-robust bounds are clamped to [0, 1]; the robust
objective is returned as is.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

from .divergences import kl_inverse, kl_sup_first

MIN_ENVS = 8


def _check_common(kl: float, n_envs: int, delta: float) -> None:
    if int(n_envs) != n_envs or n_envs < MIN_ENVS:
        raise ValueError(f"need an integer N >= {MIN_ENVS}, got {n_envs!r}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta={delta!r} must lie in (0, 1)")
    if not kl >= 0.0:
        raise ValueError(f"KL term {kl!r} must be >= 0")


def _check_cost(cost: float, name: str = "train_cost") -> None:
    if not (0.0 <= cost <= 1.0):
        raise ValueError(f"{name}={cost!r} outside [0, 1]")


def complexity_budget(kl: float, n_envs: int, delta: float) -> float:
    """(KL + log(2 sqrt(N) / delta)) / N, the right-hand side of the kl-form bound."""
    _check_common(kl, n_envs, delta)
    return (kl + math.log(2.0 * math.sqrt(n_envs) / delta)) / n_envs


def regularizer(kl: float, n_envs: int, delta: float) -> float:
    """sqrt((KL + log(2 sqrt(N) / delta)) / 2N)."""
    return math.sqrt(0.5 * complexity_budget(kl, n_envs, delta))


@dataclass(frozen=True)
class BoundInputs:
    train_cost: float
    kl_posterior_prior: float
    n_envs: int
    delta: float

    def __post_init__(self):
        _check_cost(self.train_cost)
        _check_common(self.kl_posterior_prior, self.n_envs, self.delta)


def pac_bound_quadratic(b: BoundInputs) -> float:
    """Training cost plus regularizer, clamped at 1."""
    return min(1.0, b.train_cost + regularizer(b.kl_posterior_prior, b.n_envs, b.delta))


def pac_bound_klinv(b: BoundInputs) -> float:
    return kl_inverse(b.train_cost, complexity_budget(b.kl_posterior_prior, b.n_envs, b.delta))


def sample_convergence_bound(est_cost: float, n_samples: int, delta_prime: float) -> float:
    """Upper confidence bound on a [0, 1] mean estimated from ``n_samples`` draws."""
    _check_cost(est_cost, "est_cost")
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError("sample count must be a positive integer")
    if not (0.0 < delta_prime < 1.0):
        raise ValueError(f"delta_prime={delta_prime!r} must lie in (0, 1)")
    return kl_inverse(est_cost, math.log(2.0 / delta_prime) / n_samples)


def robust_pac_objective(exp_train_mean: float, kl: float, n_envs: int, delta: float,
                         budget: float) -> float:
    """Distributionally robust bound: B + log(mean e^cost + (e - 1) * regularizer)."""
    if not (1.0 <= exp_train_mean <= math.e):
        raise ValueError(f"exp_train_mean={exp_train_mean!r} outside [1, e]")
    if not budget >= 0.0:
        raise ValueError("robustness budget must be >= 0")
    return budget + math.log(exp_train_mean + (math.e - 1.0) * regularizer(kl, n_envs, delta))


@dataclass
class Certificate:
    """A bound together with everything needed to recompute it.

    ``method`` names the formula: ``"klinv"`` (finite or any posterior with an
    exact training cost), ``"continuous"`` (sampled training cost plus a
    sample-convergence correction) or ``"robust"`` (KL-ball shift of the test
    distribution). ``extra`` carries provenance that does not enter the
    formula (posterior, policy description, seeds, config hash).
    """

    method: str
    bound: float
    train_cost: float
    kl: float
    n_envs: int
    delta: float
    confidence: float
    delta_prime: float | None = None
    sample_count: int | None = None
    est_cost: float | None = None
    budget: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["vacuous"] = self.vacuous
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Certificate":
        d = dict(d)
        d.pop("vacuous", None)
        return cls(**d)

    def recompute(self) -> float:
        """Re-run the named bound from the stored inputs."""
        if self.method == "klinv":
            return pac_bound_klinv(BoundInputs(self.train_cost, self.kl, self.n_envs, self.delta))
        if self.method == "continuous":
            return final_continuous_bound(self.est_cost, self.sample_count, self.delta_prime,
                                          self.kl, self.n_envs, self.delta).bound
        if self.method == "robust":
            return robust_final_bound(self.train_cost, self.kl, self.n_envs, self.delta,
                                      self.budget).bound
        raise ValueError(f"unknown certificate method {self.method!r}")


def certificate_klinv(train_cost: float, kl: float, n_envs: int, delta: float) -> Certificate:
    b = BoundInputs(train_cost, kl, n_envs, delta)
    return Certificate(method="klinv", bound=pac_bound_klinv(b), train_cost=train_cost, kl=kl,
                       n_envs=n_envs, delta=delta, confidence=1.0 - delta)


def final_continuous_bound(est_cost: float, n_samples: int, delta_prime: float, kl: float,
                           n_envs: int, delta: float) -> Certificate:
    """Union of the sample-convergence bound and the kl-form PAC-Bayes bound.

    Holds with probability at least ``1 - delta - delta_prime``.
    """
    if delta + delta_prime >= 1.0:
        raise ValueError("delta + delta_prime must be < 1")
    inflated = sample_convergence_bound(est_cost, n_samples, delta_prime)
    bound = kl_inverse(inflated, complexity_budget(kl, n_envs, delta))
    return Certificate(method="continuous", bound=bound, train_cost=inflated, kl=kl,
                       n_envs=n_envs, delta=delta, confidence=1.0 - delta - delta_prime,
                       delta_prime=delta_prime, sample_count=int(n_samples), est_cost=est_cost)


def robust_final_bound(train_cost: float, kl: float, n_envs: int, delta: float,
                       budget: float) -> Certificate:
    """max c' s.t. kl(train || c) <= R and kl(c' || c) <= budget.

    The feasible c form the interval [., kl_inverse(train, R)] and the best c'
    for a given c grows with c, so the optimum sits at the interval's upper end.
    """
    _check_cost(train_cost)
    if not budget >= 0.0:
        raise ValueError("robustness budget must be >= 0")
    c_train = kl_inverse(train_cost, complexity_budget(kl, n_envs, delta))
    if budget == 0.0:
        bound = c_train
    elif c_train <= 0.0:
        # kl(c' || 0) is finite only at c' = 0
        bound = 0.0
    elif c_train >= 1.0:
        bound = 1.0
    else:
        bound = kl_sup_first(c_train, budget)
    return Certificate(method="robust", bound=bound, train_cost=train_cost, kl=kl,
                       n_envs=n_envs, delta=delta, confidence=1.0 - delta, budget=budget)
