import math

import numpy as np
import pytest

from src.errors import DomainError, PoleError
from src.specfn import (
    KVE_ASYMPTOTIC,
    bessel_k,
    bessel_k_integral,
    chebyshev_exact,
    chebyshev_generalized,
    chebyshev_series,
    double_integral_series,
    gamma_signed,
    log_bessel_k,
    log_kve,
    x_over_sin,
    x_over_sin_closed,
)


def test_gamma_half_integers():
    g = gamma_signed(0.5)
    assert g.sign == 1
    assert g.value == pytest.approx(math.sqrt(math.pi), rel=1e-13)
    g = gamma_signed(-0.5)
    assert g.sign == -1
    assert g.value == pytest.approx(-2.0 * math.sqrt(math.pi), rel=1e-13)


@pytest.mark.parametrize("x,nearest", [(0.0, 0), (-1.0, -1), (-3.0 + 1e-12, -3)])
def test_gamma_poles(x, nearest):
    with pytest.raises(PoleError) as info:
        gamma_signed(x)
    assert info.value.nearest == nearest


def test_gamma_product_and_quotient():
    a, b = gamma_signed(-1.5), gamma_signed(2.5)
    assert (a * b).value == pytest.approx(math.gamma(-1.5) * math.gamma(2.5), rel=1e-12)
    assert (a / b).value == pytest.approx(math.gamma(-1.5) / math.gamma(2.5), rel=1e-12)


def test_gamma_reflection_identity(rng):
    x = rng.uniform(-5.0, 5.0, 1000)
    x = x[np.abs(x - np.round(x)) > 1e-3]
    for v in x:
        lhs = gamma_signed(v).value * gamma_signed(1.0 - v).value
        assert lhs == pytest.approx(math.pi / math.sin(math.pi * v), rel=1e-10)


def test_bessel_half_order_closed_form():
    expected = math.sqrt(math.pi / 2.0) * math.exp(-1.0)
    assert bessel_k(0.5, 1.0) == pytest.approx(expected, rel=1e-12)
    assert bessel_k_integral(0.5, 1.0) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("nu", [0.0, 0.3, 1.0, 2.5])
@pytest.mark.parametrize("x", [0.2, 1.0, 6.0])
def test_bessel_fast_path_matches_integral(nu, x):
    assert bessel_k(nu, x) == pytest.approx(bessel_k_integral(nu, x), rel=1e-9)


def test_bessel_large_argument_asymptotics():
    scaled = bessel_k(0.0, 50.0) * math.exp(50.0) * math.sqrt(50.0)
    assert scaled == pytest.approx(math.sqrt(math.pi / 2.0), rel=3e-3)
    assert log_bessel_k(0.0, 800.0) == pytest.approx(
        math.log(math.sqrt(math.pi / 1600.0)) - 800.0, rel=1e-6
    )


@pytest.mark.parametrize("x", [1e12, 1e30, 1e300])
def test_log_bessel_k_huge_argument(x):
    expected = 0.5 * math.log(math.pi / (2.0 * x)) - x
    value = log_bessel_k(0.3, x)
    assert math.isfinite(value)
    assert value == pytest.approx(expected, rel=1e-12)
    assert bessel_k(0.3, x) == 0.0


def test_log_kve_continuous_at_switch():
    below = log_kve(0.8, KVE_ASYMPTOTIC * (1.0 - 1e-12))
    above = log_kve(0.8, KVE_ASYMPTOTIC * (1.0 + 1e-12))
    assert above == pytest.approx(below, abs=1e-10)
    np.testing.assert_allclose(
        log_kve(0.5, np.array([2.0, 1e7, 1e200])),
        0.5 * np.log(math.pi / (2.0 * np.array([2.0, 1e7, 1e200]))),
        rtol=1e-12,
    )


@pytest.mark.parametrize("nu", [1.0, 1.5, 2.3])
@pytest.mark.parametrize("x", [0.5, 2.0, 7.0])
def test_bessel_recurrence(nu, x):
    lhs = bessel_k(nu + 1.0, x)
    rhs = bessel_k(nu - 1.0, x) + 2.0 * nu / x * bessel_k(nu, x)
    assert lhs == pytest.approx(rhs, rel=1e-8)


@pytest.mark.parametrize("nu,x", [(-0.5, 1.0), (0.5, 0.0), (0.5, -1.0)])
def test_bessel_domain(nu, x):
    with pytest.raises(DomainError):
        bessel_k(nu, x)


def test_chebyshev_at_zero():
    assert chebyshev_generalized(0.5, 0.0) == pytest.approx(math.sqrt(2.0) / 2.0, rel=1e-12)


@pytest.mark.parametrize("a,x", [(0.5, 0.3), (1.5, -0.6), (2.3, 0.8), (0.7, -0.9)])
def test_chebyshev_series_matches_cosine(a, x):
    assert chebyshev_generalized(a, x) == pytest.approx(chebyshev_exact(a, x), abs=1e-10)


def test_chebyshev_fixed_terms():
    assert chebyshev_generalized(0.5, 0.3, n_terms=40) == pytest.approx(
        math.cos(0.5 * math.acos(0.3)), abs=1e-10
    )


@pytest.mark.parametrize("x", [0.3, 0.6, 0.9])
def test_chebyshev_partial_sum_error_bound(x):
    a = 0.5
    partial = chebyshev_series(a, x, n_terms=20).value
    next_term = chebyshev_series(a, x, n_terms=21).last_term
    assert abs(partial - chebyshev_exact(a, x)) <= 2.0 * abs(next_term)


@pytest.mark.parametrize("a,x", [(0.5, 1.0), (0.5, -1.2), (2.0, 0.3)])
def test_chebyshev_domain(a, x):
    with pytest.raises(DomainError):
        chebyshev_generalized(a, x)


def test_double_integral_leading_term():
    res = double_integral_series(1.0, 0.0, -1.0, 1e-9, n_terms=1)
    assert res.value == pytest.approx(math.pi / 2.0, rel=1e-12)
    assert res.terms_used == 1


def test_double_integral_converges_with_tail_bound():
    res = double_integral_series(1.0, 0.0, -1.0, 1.0)
    assert res.tail_bound < 1e-12 * abs(res.value)
    longer = double_integral_series(1.0, 0.0, -1.0, 1.0, n_terms=res.terms_used + 20)
    assert longer.value == pytest.approx(res.value, rel=1e-12)


@pytest.mark.parametrize("a,b,c,lam", [
    (1.0, 0.0, -1.0, 2.0),   # lambda = 2a
    (1.0, 0.0, -0.5, 1.0),   # c = b/2 - 1/2
    (1.0, -1.0, -2.0, 1.0),  # b = -1
    (0.0, 0.0, -1.0, 1.0),   # a = 0
])
def test_double_integral_domain(a, b, c, lam):
    with pytest.raises(DomainError):
        double_integral_series(a, b, c, lam)


def test_x_over_sin():
    assert x_over_sin(math.pi / 2.0) == pytest.approx(math.pi / 2.0, rel=1e-14)
    assert x_over_sin(1e-8) == pytest.approx(1.0, rel=1e-14)
    assert x_over_sin(0.5) < x_over_sin(1.0)
    assert x_over_sin_closed(0.0) == 1.0


@pytest.mark.parametrize("x", [0.0, math.pi, -0.1, 4.0])
def test_x_over_sin_domain(x):
    with pytest.raises(DomainError):
        x_over_sin(x)
