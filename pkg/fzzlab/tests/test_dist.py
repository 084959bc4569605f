import math

import numpy as np
import pytest
from scipy import integrate

from src.dist import (
    ConeExitKernel,
    InverseGammaParams,
    cone_duration_density_shape,
    cone_duration_invgamma,
    cone_exit_cdf,
    cone_exit_quantile,
    cone_exit_sample,
    cone_moment_integral,
    inv_gamma_cdf,
    inv_gamma_laplace,
    inv_gamma_laplace_m1,
    inv_gamma_mean,
    inv_gamma_mode,
    inv_gamma_pdf,
    inv_gamma_reciprocal_mean,
    inv_gamma_sample,
    moment_ratio,
    stream,
)
from src.core import Normalization
from src.errors import DomainError


def test_streams_are_reproducible_and_distinct():
    a = stream(3, 1).random(8)
    np.testing.assert_array_equal(a, stream(3, 1).random(8))
    assert not np.array_equal(a, stream(3, 2).random(8))
    assert not np.array_equal(a, stream(4, 1).random(8))


@pytest.mark.parametrize("shape,scale", [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0), (1.0, math.nan)])
def test_inverse_gamma_params_validation(shape, scale):
    with pytest.raises(DomainError):
        InverseGammaParams(shape, scale)


@pytest.mark.parametrize("shape,scale", [(0.5, 1.0), (1.7, 0.3), (3.0, 2.0)])
def test_inverse_gamma_cdf_integrates_pdf(shape, scale):
    p = InverseGammaParams(shape, scale)
    for x in (0.1, 1.0, 5.0):
        area, _ = integrate.quad(lambda t: inv_gamma_pdf(p, t), 0.0, x, epsabs=1e-13, epsrel=1e-11, limit=200)
        assert inv_gamma_cdf(p, x) == pytest.approx(area, rel=1e-8, abs=1e-12)
    assert inv_gamma_cdf(p, 0.0) == 0.0


def test_inverse_gamma_moments():
    p = InverseGammaParams(3.0, 2.0)
    assert inv_gamma_mean(p) == pytest.approx(1.0)
    assert inv_gamma_mode(p) == pytest.approx(0.5)
    assert inv_gamma_reciprocal_mean(p) == pytest.approx(1.5)
    assert inv_gamma_mean(InverseGammaParams(0.8, 1.0)) == math.inf


def test_inverse_gamma_sampling_reciprocal_mean(rng):
    p = InverseGammaParams(1.3, 0.7)
    x = inv_gamma_sample(p, rng, size=200_000)
    assert np.all(x > 0.0)
    assert np.mean(1.0 / x) == pytest.approx(inv_gamma_reciprocal_mean(p), rel=0.01)


def test_laplace_half_shape_closed_form():
    # shape 1/2: E[exp(-t X)] = exp(-2 sqrt(b t))
    p = InverseGammaParams(0.5, 0.8)
    t = np.array([1e-6, 0.01, 1.0, 30.0])
    np.testing.assert_allclose(inv_gamma_laplace(p, t), np.exp(-2.0 * np.sqrt(0.8 * t)), rtol=1e-11)
    assert inv_gamma_laplace(p, 0.0) == 1.0


def test_laplace_minus_one_keeps_precision():
    p = InverseGammaParams(0.5, 0.8)
    t = np.array([1e-12, 1e-8, 1e-3, 0.2, 2.0])
    np.testing.assert_allclose(inv_gamma_laplace_m1(p, t), np.expm1(-2.0 * np.sqrt(0.8 * t)), rtol=1e-9)


def test_laplace_rejects_negative_argument():
    with pytest.raises(DomainError):
        inv_gamma_laplace(InverseGammaParams(1.0, 1.0), -1.0)


def test_laplace_vanishes_at_huge_argument():
    p = InverseGammaParams(0.8, 1.0)
    t = np.array([1e30, 1e100, 1e300])
    out = inv_gamma_laplace(p, t)
    assert np.all(np.isfinite(out))
    np.testing.assert_array_equal(out, 0.0)
    np.testing.assert_array_equal(inv_gamma_laplace_m1(p, t), -1.0)


@pytest.mark.parametrize("theta,p", [(math.pi / 2, 0.5), (math.pi / 4, 2.0), (2.0, -0.5)])
def test_cone_moment_integral_against_quad(theta, p):
    q = math.pi / theta
    value, _ = integrate.quad(lambda x: x ** p / (1.0 + x ** q) ** 2, 0.0, np.inf, epsabs=0.0, epsrel=1e-11, limit=400)
    assert cone_moment_integral(theta, p) == pytest.approx(value, rel=1e-6)


def test_cone_moment_integral_domain():
    with pytest.raises(DomainError):
        cone_moment_integral(math.pi / 2, 3.0)
    with pytest.raises(DomainError):
        cone_moment_integral(7.0, 0.0)


def test_exit_kernel_median_and_quantile():
    theta, u = math.pi / 3, 0.8
    assert cone_exit_cdf(theta, u, u) == pytest.approx(0.5, rel=1e-12)
    assert cone_exit_quantile(theta, u, 0.5) == pytest.approx(u, rel=1e-14)
    v = np.array([0.1, 0.37, 0.9])
    np.testing.assert_allclose(cone_exit_cdf(theta, u, cone_exit_quantile(theta, u, v)), v, rtol=1e-12)


def test_weighted_exit_kernel_cdf_integrates_pdf():
    kernel = ConeExitKernel(math.pi / 4, 1.2, weight_exponent=1.5)
    for r in (0.3, 1.2, 4.0):
        area, _ = integrate.quad(kernel.pdf, 0.0, r, epsabs=1e-13, epsrel=1e-11, limit=200)
        assert kernel.cdf(r) == pytest.approx(area, rel=1e-8)
    assert kernel.cdf(np.inf) == pytest.approx(1.0)


def test_exit_kernel_weight_bound():
    with pytest.raises(DomainError):
        ConeExitKernel(math.pi / 4, 1.0, weight_exponent=4.0)


def test_exit_sample_log_radius_is_centred(rng):
    theta, u, n = math.pi / 4, 2.0 ** -0.25, 40_000
    log_ratio = np.log(cone_exit_sample(theta, u, rng, size=n) / u)
    sd = theta / math.sqrt(3.0)
    assert abs(log_ratio.mean()) < 4.0 * sd / math.sqrt(n)
    assert log_ratio.std() == pytest.approx(sd, rel=0.03)


def test_duration_law():
    law = cone_duration_invgamma(math.pi, 2.0)
    assert law.shape == pytest.approx(1.0)
    assert law.scale == pytest.approx(2.0)
    with pytest.raises(DomainError):
        cone_duration_invgamma(math.pi, 0.0)


def test_duration_density_shape():
    shape = cone_duration_density_shape(math.pi, complex(0.0, 1.0), 0.5)
    assert shape.normalization is Normalization.UP_TO_CONSTANT
    assert shape.value > 0.0
    with pytest.raises(DomainError):
        cone_duration_density_shape(math.pi / 2, complex(-1.0, 0.1), 0.5)


@pytest.mark.parametrize("theta,phi,eps", [(math.pi / 4, math.pi, 0.25), (0.5, 2.0, 1.0)])
def test_moment_ratio_matches_weighted_integrals(theta, phi, eps):
    base = math.pi / theta - 1.0 - math.pi / phi
    expected = cone_moment_integral(theta, base + eps) / cone_moment_integral(theta, base)
    assert moment_ratio(theta, phi, eps) == pytest.approx(expected, rel=1e-12)
    assert moment_ratio(theta, phi, eps) < 1.0


def test_moment_ratio_rejects_vanishing_eps():
    with pytest.raises(DomainError):
        moment_ratio(math.pi / 4, math.pi / 2, 1e-18)
