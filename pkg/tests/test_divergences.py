import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from pacctrl.divergences import (
    BetaParams,
    DiagonalGaussian,
    as_prob_vector,
    kl_bernoulli,
    kl_beta,
    kl_discrete,
    kl_gaussian_diag,
    kl_inverse,
    kl_sup_first,
)

unit = st.floats(0.0, 1.0, allow_nan=False)
interior = st.floats(1e-6, 1 - 1e-6, allow_nan=False)
budget = st.floats(0.0, 5.0, allow_nan=False)


# reference values from 40-digit mpmath root finding / quadrature
@pytest.mark.parametrize("p, c, expected", [
    (0.1, 0.05, 0.22007860110692463),
    (0.3, 0.2, 0.61263272402373996),
    (0.05, 0.01, 0.08690214907386274),
    (0.0, math.log(2.0), 0.5),
])
def test_kl_inverse_reference(p, c, expected):
    assert kl_inverse(p, c) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("q, c, expected", [
    (0.1, 0.0819, 0.24027314226684359),
    (0.3, 0.05, 0.45027786742619588),
])
def test_kl_sup_first_reference(q, c, expected):
    assert kl_sup_first(q, c) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("P, Q, expected", [
    ((1, 1), (0.8, 1.25), 0.081850750310852574),
    ((2, 3), (1, 1), 0.23490664978800031),
    ((0.5, 0.5), (2, 2), 1.2223937282822167),
])
def test_kl_beta_reference(P, Q, expected):
    assert kl_beta(BetaParams(*P), BetaParams(*Q)) == pytest.approx(expected, abs=1e-10)


def test_kl_beta_matches_scipy_quadrature():
    P, Q = stats.beta(3.0, 1.5), stats.beta(1.2, 2.0)
    val, _ = integrate.quad(lambda x: P.pdf(x) * (P.logpdf(x) - Q.logpdf(x)), 0, 1)
    assert kl_beta(BetaParams(3.0, 1.5), BetaParams(1.2, 2.0)) == pytest.approx(val, abs=1e-8)


def test_kl_gaussian_reference():
    P = DiagonalGaussian([0.3, 1.0], [0.5, 0.01])
    Q = DiagonalGaussian([-0.2, 1.5], [2.0, 0.04])
    assert kl_gaussian_diag(P, Q) == pytest.approx(3.8237943611198906, abs=1e-12)


def test_trivial_cases():
    assert kl_bernoulli(0.3, 0.3) == 0.0
    assert kl_discrete([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_discrete([0.5, 0.5], [1.0, 0.0]) == math.inf
    assert kl_discrete([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert kl_bernoulli(0.0, 1.0) == math.inf
    assert kl_inverse(0.3, 0.0) == 0.3
    assert kl_inverse(1.0, 2.0) == 1.0
    assert kl_inverse(0.2, math.inf) == 1.0
    g = DiagonalGaussian(np.zeros(3), np.ones(3))
    assert kl_gaussian_diag(g, g) == 0.0
    assert kl_beta(BetaParams(2, 5), BetaParams(2, 5)) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("bad", [
    lambda: kl_bernoulli(1.2, 0.5),
    lambda: kl_inverse(0.5, -0.1),
    lambda: kl_inverse(math.nan, 0.1),
    lambda: kl_sup_first(0.0, 0.1),
    lambda: kl_sup_first(1.0, 0.1),
    lambda: as_prob_vector([0.5, 0.6]),
    lambda: as_prob_vector([-0.1, 1.1]),
    lambda: DiagonalGaussian([0.0], [0.0]),
    lambda: DiagonalGaussian([0.0, 1.0], [1.0]),
    lambda: BetaParams(0.0, 1.0),
    lambda: kl_discrete([0.5, 0.5], [1.0]),
])
def test_invalid_inputs_raise(bad):
    with pytest.raises(ValueError):
        bad()


@settings(max_examples=300, deadline=None)
@given(p=unit, c=budget)
def test_kl_inverse_is_tight_upper_root(p, c):
    q = kl_inverse(p, c)
    assert p <= q <= 1.0
    # within the bisection width of the root
    assert kl_bernoulli(p, max(p, q - 2e-12)) <= c + 1e-9
    if q < 1.0 - 1e-9:
        assert kl_bernoulli(p, min(1.0, q + 1e-9)) > c


@settings(max_examples=300, deadline=None)
@given(p=unit, c=budget)
def test_kl_inverse_below_pinsker(p, c):
    assert kl_inverse(p, c) <= min(1.0, p + math.sqrt(c / 2.0)) + 1e-9


@settings(max_examples=200, deadline=None)
@given(p=unit, c1=budget, c2=budget)
def test_kl_inverse_monotone_in_budget(p, c1, c2):
    lo, hi = sorted((c1, c2))
    assert kl_inverse(p, lo) <= kl_inverse(p, hi) + 1e-12


@settings(max_examples=200, deadline=None)
@given(q=interior, c=budget)
def test_kl_sup_first_feasible(q, c):
    p = kl_sup_first(q, c)
    assert q <= p <= 1.0
    assert kl_bernoulli(max(q, p - 2e-12), q) <= c + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=8),
       st.lists(st.floats(0.01, 10.0), min_size=2, max_size=8))
def test_kl_discrete_nonnegative(a, b):
    n = min(len(a), len(b))
    p = np.array(a[:n]) / sum(a[:n])
    q = np.array(b[:n]) / sum(b[:n])
    assert kl_discrete(p, q) >= -1e-12
    # Pinsker: KL >= 2 TV^2
    assert kl_discrete(p, q) >= 2.0 * (0.5 * np.abs(p - q).sum()) ** 2 - 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 4), st.floats(-3, 3), st.floats(0.05, 4))
def test_kl_gaussian_one_dim_quadrature(m1, v1, m2, v2):
    P, Q = stats.norm(m1, math.sqrt(v1)), stats.norm(m2, math.sqrt(v2))
    lo, hi = m1 - 12 * math.sqrt(v1), m1 + 12 * math.sqrt(v1)
    val, _ = integrate.quad(lambda x: P.pdf(x) * (P.logpdf(x) - Q.logpdf(x)), lo, hi,
                            epsabs=1e-12, epsrel=1e-12, limit=200)
    got = kl_gaussian_diag(DiagonalGaussian([m1], [v1]), DiagonalGaussian([m2], [v2]))
    assert got == pytest.approx(val, abs=1e-7)
