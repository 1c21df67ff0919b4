"""KL divergences between the distribution families used by the bounds, and
their scalar inverses.

Everything here is a pure function of its arguments. ``math.inf`` stands in
for an unbounded divergence; downstream bounds saturate when they see it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SIMPLEX_TOL = 1e-12
BISECTION_WIDTH = 1e-12


def as_prob_vector(values, name: str = "p") -> np.ndarray:
    """Validate ``values`` as a probability vector and return it as a float array."""
    p = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError(f"{name} has entries outside [0, 1]")
    if abs(p.sum() - 1.0) > SIMPLEX_TOL + p.size * np.finfo(float).eps:
        raise ValueError(f"{name} does not sum to 1 (sum={p.sum()!r})")
    return p


@dataclass(frozen=True)
class DiagonalGaussian:
    """Gaussian with diagonal covariance ``diag(variances)``."""

    mean: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        var = np.asarray(self.variances, dtype=float).reshape(-1)
        if mean.shape != var.shape:
            raise ValueError("mean and variances must have equal length")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise ValueError("non-finite Gaussian parameters")
        if np.any(var <= 0.0):
            raise ValueError("variances must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variances", var)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        for v in (self.alpha, self.beta):
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError("beta parameters must be finite and > 0")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def kl_discrete(p, q) -> float:
    """KL(p || q) for probability vectors, with 0 log 0 = 0."""
    p = as_prob_vector(p, "p")
    q = as_prob_vector(q, "q")
    if p.shape != q.shape:
        raise ValueError("p and q must have the same length")
    support = p > 0.0
    if np.any(q[support] == 0.0):
        return math.inf
    ps, qs = p[support], q[support]
    return max(0.0, float(np.sum(ps * np.log(ps / qs))))


def _check_unit(x: float, name: str) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"{name}={x!r} outside [0, 1]")
    return x


def _kl_bern(p: float, q: float) -> float:
    # unchecked core; callers guarantee p, q in [0, 1]
    if p == q:
        return 0.0
    if (p > 0.0 and q == 0.0) or (p < 1.0 and q == 1.0):
        return math.inf
    if p == 0.0:
        return -math.log1p(-q)
    if p == 1.0:
        return -math.log(q)
    # log1p form avoids cancellation when q is close to p
    d = q - p
    r = 1.0 - p
    t1 = -p * math.log1p(d / p) if abs(d) < p else p * math.log(p / q)
    t2 = -r * math.log1p(-d / r) if abs(d) < r else r * math.log(r / (1.0 - q))
    return max(t1 + t2, 0.0)


def kl_bernoulli(p: float, q: float) -> float:
    """KL(B(p) || B(q)) between Bernoulli distributions."""
    return _kl_bern(_check_unit(p, "p"), _check_unit(q, "q"))


def kl_gaussian_diag(P: DiagonalGaussian, Q: DiagonalGaussian) -> float:
    """Closed-form KL(P || Q) for diagonal Gaussians."""
    if P.dim != Q.dim:
        raise ValueError("dimension mismatch")
    ratio = P.variances / Q.variances
    maha = (Q.mean - P.mean) ** 2 / Q.variances
    val = 0.5 * float(np.sum(ratio + maha - np.log(ratio) - 1.0))
    return max(val, 0.0)


def _bisect_upper(f, lo: float, hi: float, c: float) -> float:
    """Largest x in [lo, hi] with f(x) <= c, for f nondecreasing and f(lo) <= c.

    Returns the upper end of the final bracket, so the result never
    undershoots the true supremum by more than the bracket width.
    """
    if f(hi) <= c:
        return hi
    while hi - lo >= BISECTION_WIDTH:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) <= c:
            lo = mid
        else:
            hi = mid
    return hi


def kl_inverse(p: float, c: float) -> float:
    """sup{q in [0, 1] : KL(p || q) <= c}, by bisection on [p, 1]."""
    p = _check_unit(p, "p")
    c = float(c)
    if not c >= 0.0:
        raise ValueError(f"budget c={c!r} must be >= 0")
    if c == 0.0 or p == 1.0:
        return p
    if math.isinf(c):
        return 1.0
    return _bisect_upper(lambda q: _kl_bern(p, q), p, 1.0, c)


def kl_sup_first(q: float, c: float) -> float:
    """sup{p in [0, 1] : KL(p || q) <= c}, by bisection on [q, 1].

    Counterpart of :func:`kl_inverse` that moves the first argument; used by
    the distributionally robust certificate.
    """
    q = float(q)
    if not (0.0 < q < 1.0):
        raise ValueError(f"q={q!r} must lie in (0, 1)")
    c = float(c)
    if not c >= 0.0:
        raise ValueError(f"budget c={c!r} must be >= 0")
    if c == 0.0:
        return q
    return _bisect_upper(lambda p: _kl_bern(p, q), q, 1.0, c)


def kl_beta(P: BetaParams, Q: BetaParams) -> float:
    """KL(Beta(P) || Beta(Q)) in closed form via log-beta and digamma."""
    a1, b1 = P.alpha, P.beta
    a0, b0 = Q.alpha, Q.beta
    val = (
        special.betaln(a0, b0)
        - special.betaln(a1, b1)
        + (a1 - a0) * special.digamma(a1)
        + (b1 - b0) * special.digamma(b1)
        + (a0 - a1 + b0 - b1) * special.digamma(a1 + b1)
    )
    return max(float(val), 0.0)
