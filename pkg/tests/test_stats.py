import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats as sps

from evacsim.stats import chi2_sf, normal_cdf, normal_quantile, regularized_gamma_q


def erf_series(x, terms=90):
    # Maclaurin series, independent of the library's erfc-based CDF
    return 2 / math.sqrt(math.pi) * sum(
        (-1) ** n * x ** (2 * n + 1) / (math.factorial(n) * (2 * n + 1)) for n in range(terms))


def quantile_by_bisection(p, mu, sigma):
    lo, hi = -8.0, 8.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if 0.5 * (1 + erf_series(mid / math.sqrt(2))) < p:
            lo = mid
        else:
            hi = mid
    return mu + sigma * (lo + hi) / 2


def test_quantile_median():
    assert normal_quantile(0.5, 0.3, 0.1) == pytest.approx(0.3, abs=1e-15)


@pytest.mark.parametrize("p, mu, sigma, expected", [
    (0.0244, 0.3, 0.1, 0.10296650900298104),   # Advice / CE back-check
    (0.975, 0.0, 1.0, 1.959963984540054),
    (0.4, 0.3, 0.1, 0.27466528968642),
])
def test_quantile_against_frozen_oracle(p, mu, sigma, expected):
    assert normal_quantile(p, mu, sigma) == pytest.approx(expected, rel=1e-9)
    assert quantile_by_bisection(p, mu, sigma) == pytest.approx(expected, rel=1e-9)


def test_quantile_grid_round_trip():
    for p in np.arange(1, 1000) / 1000:
        assert normal_cdf(normal_quantile(p)) == pytest.approx(p, abs=1e-8)


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_quantile_matches_scipy(p):
    x = normal_quantile(p)
    ref = sps.norm.ppf(p)
    assert x == pytest.approx(ref, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_quantile_domain(p):
    with pytest.raises(ValueError):
        normal_quantile(p)


def test_quantile_rejects_bad_sigma():
    with pytest.raises(ValueError):
        normal_quantile(0.5, 0, 0)


@given(st.floats(min_value=-30, max_value=30))
def test_cdf_matches_scipy(x):
    assert normal_cdf(x) == pytest.approx(sps.norm.cdf(x), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("x, dof", [(0.5, 1), (3.0, 2), (10.0, 5), (74.2, 72), (300, 180), (1e-3, 30), (150, 10)])
def test_chi2_sf_matches_scipy(x, dof):
    assert chi2_sf(x, dof) == pytest.approx(sps.chi2.sf(x, dof), rel=1e-9, abs=1e-300)


def test_chi2_sf_edges():
    assert chi2_sf(0.0, 5) == 1.0
    with pytest.raises(ValueError):
        chi2_sf(1.0, 0)


@given(st.floats(min_value=0.1, max_value=200), st.floats(min_value=0, max_value=400))
def test_gamma_q_matches_scipy(a, x):
    assert regularized_gamma_q(a, x) == pytest.approx(special.gammaincc(a, x), rel=1e-8, abs=1e-14)
