import math

import numpy as np
import pytest

from src import closed
from src.core import make_cosmology, make_params
from src.dist import InverseGammaParams, inv_gamma_laplace
from src.errors import DomainError, PoleError, UnsupportedOrderError

SQRT2 = math.sqrt(2.0)


def cosmology_with_x(params, x, mu=1.0):
    return make_cosmology(params, mu, x * math.sqrt(mu) / math.sqrt(math.sin(params.theta)))


def test_u0_bar_reference_values(params_g1):
    assert closed.u0_bar(params_g1, 2.0) == pytest.approx(math.pi, rel=1e-12)
    assert closed.u0_bar(params_g1, params_g1.q) == pytest.approx(1.0, rel=1e-12)


def test_u0_bar_edges(params_g1):
    with pytest.raises(DomainError):
        closed.u0_bar(params_g1, 0.5)
    assert closed.u0_bar(params_g1, 0.5 + 1e-9) == math.inf


def test_reflection_and_variance_at_sqrt2():
    params = make_params(SQRT2)
    assert closed.r_bar(params) == pytest.approx(4.0, rel=1e-12)
    assert closed.mot_variance(params) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("gamma", [0.5, 1.0, SQRT2, 1.8])
def test_variance_routes_agree(gamma):
    params = make_params(gamma)
    assert closed.mot_variance_from_ratio(params) == pytest.approx(closed.mot_variance(params), rel=1e-10)


def test_u_fzz_pole(params_g1):
    cosmo = cosmology_with_x(params_g1, 0.5)
    with pytest.raises(PoleError):
        closed.u_fzz(params_g1, 2.0, cosmo)


def test_u_fzz_needs_bulk_constant(params_g1):
    with pytest.raises(DomainError):
        closed.u_fzz(params_g1, 2.1, make_cosmology(params_g1, 0.0, 1.0))


def test_u_at_height_scaling(params_g1):
    cosmo = cosmology_with_x(params_g1, 0.5)
    base = closed.u_fzz(params_g1, 2.1, cosmo)
    assert closed.u_at_height(params_g1, 2.1, cosmo, 1.0) == pytest.approx(base, rel=1e-14)
    delta = closed.delta_alpha(params_g1, 2.1)
    assert closed.u_at_height(params_g1, 2.1, cosmo, 2.0) == pytest.approx(base / 4.0 ** delta, rel=1e-12)


def test_delta_alpha(params_g1):
    assert closed.delta_alpha(params_g1, 2.2) == pytest.approx(1.1 * 1.4, rel=1e-14)


def test_u_mu_zero_scaling(params_g1):
    alpha = 2.2
    rho = params_g1.rho(alpha)
    one = closed.u_mu_zero(params_g1, alpha, 1.0)
    assert closed.u_mu_zero(params_g1, alpha, 3.0) == pytest.approx(3.0 ** rho * one, rel=1e-12)
    # Gamma(-rho) with rho in (0, 1) is negative
    assert one < 0.0


def test_u_mu_zero_pole(params_g1):
    with pytest.raises(PoleError):
        closed.u_mu_zero(params_g1, 2.0, 1.0)


def test_series_route_needs_real_branch(params_g1):
    with pytest.raises(DomainError):
        closed.u_fzz_series(params_g1, 2.1, cosmology_with_x(params_g1, 2.0))


def test_area_laws(params_g1):
    law = closed.area_law_alpha(params_g1, 2.0)
    assert law.shape == pytest.approx(1.0, rel=1e-14)
    assert law.scale == pytest.approx(1.0 / (2.0 * SQRT2), rel=1e-12)
    assert law.provenance is closed.Provenance.ALPHA_INSERTION
    qd = closed.area_law_qd(make_params(SQRT2))
    assert qd.shape == pytest.approx(2.0, rel=1e-12)
    assert qd.scale == pytest.approx(0.25, rel=1e-12)
    assert qd.provenance is closed.Provenance.QUANTUM_DISK


@pytest.mark.parametrize("gamma", [0.7, 1.0, 1.6])
def test_disk_area_law_is_shifted_gamma_insertion(gamma):
    params = make_params(gamma)
    qd = closed.area_law_qd(params)
    ins = closed.area_law_alpha(params, gamma)
    assert qd.scale == pytest.approx(ins.scale, rel=1e-12)
    assert qd.shape == pytest.approx(ins.shape + 1.0, rel=1e-12)


@pytest.mark.parametrize("weight", list(closed.Weight))
def test_disk_length_shape_symmetry_and_scaling(weight, params_g1):
    a = closed.disk_length_shape(params_g1, weight, 0.7, 1.9).value
    b = closed.disk_length_shape(params_g1, weight, 1.9, 0.7).value
    assert a == pytest.approx(b, rel=1e-14)
    scaled = closed.disk_length_shape(params_g1, weight, 1.4, 3.8).value
    power = -2.0 if weight is closed.Weight.HALF_GAMMA_SQ else -4.0 - 1.0
    assert scaled == pytest.approx(2.0 ** power * a, rel=1e-12)


def test_gmc_moment_h(params_g1):
    with pytest.raises(PoleError):
        closed.gmc_moment_h(params_g1, 2.0)
    value = closed.gmc_moment_h(params_g1, 2.2)
    assert math.isfinite(value) and value > 0.0


def test_selberg_rhs(params_g1):
    assert closed.selberg_rhs(params_g1, 1) == pytest.approx(5.82475, rel=1e-4)
    with pytest.raises(DomainError):
        closed.selberg_rhs(make_params(1.5), 1)
    with pytest.raises(DomainError):
        closed.selberg_rhs(params_g1, 0)


@pytest.mark.parametrize("gamma", [0.3, 0.5, 0.8, 1.0, 1.3])
def test_selberg_rhs_positive_for_every_valid_n(gamma):
    params = make_params(gamma)
    valid = [n for n in range(1, 6) if n < 2.0 / gamma ** 2]
    assert valid
    for n in valid:
        value = closed.selberg_rhs(params, n)
        assert math.isfinite(value) and value > 0.0


@pytest.mark.parametrize("gamma,alpha", [(1.0, 2.1), (1.0, 2.3), (1.2, 1.9), (1.2, 2.1)])
@pytest.mark.parametrize("x", [0.5, 2.0])
@pytest.mark.parametrize("lam", [0.5, 3.0])
def test_u_fzz_joint_homogeneity(gamma, alpha, x, lam):
    params = make_params(gamma)
    mu = 1.0
    mu_b = x / math.sqrt(math.sin(params.theta))
    base = closed.u_fzz(params, alpha, make_cosmology(params, mu, mu_b))
    scaled = closed.u_fzz(params, alpha, make_cosmology(params, mu * lam * lam, mu_b * lam))
    assert scaled == pytest.approx(lam ** params.rho(alpha) * base, rel=1e-11)


@pytest.mark.parametrize("alpha", [2.05, 2.2, 2.4])
def test_laplace_area_decreasing_in_mu(params_g1, alpha):
    mus = np.geomspace(1e-3, 1e2, 25)
    values = np.array([closed.laplace_area(params_g1, alpha, 1.0, m) for m in mus])
    assert np.all(values > 0.0) and np.all(values <= 1.0)
    assert np.all(np.diff(values) < 0.0)


def test_laplace_area_matches_inverse_gamma_transform(params_g1):
    alpha, ell, mu = 2.1, 1.3, 0.8
    law = closed.area_law_alpha(params_g1, alpha)
    scaled = InverseGammaParams(law.shape, law.scale * ell * ell)
    assert closed.laplace_area(params_g1, alpha, ell, mu) == pytest.approx(inv_gamma_laplace(scaled, mu), rel=1e-12)
    assert closed.laplace_area(params_g1, alpha, ell, 0.0) == 1.0
    raw = closed.laplace_area(params_g1, alpha, ell, mu, normalized=False)
    assert raw == pytest.approx(
        closed.laplace_area(params_g1, alpha, ell, mu) * closed.length_mass(params_g1, alpha, ell), rel=1e-14
    )


def test_length_mass_power_law(params_g1):
    alpha = 2.1
    rho = params_g1.rho(alpha)
    assert closed.length_mass(params_g1, alpha, 2.0) == pytest.approx(
        closed.length_mass(params_g1, alpha, 1.0) * 2.0 ** (-rho - 1.0), rel=1e-12
    )


def test_truncation_coefficients():
    assert closed.truncation_coefficients(1.0, 0.4, 0) == [1.0]
    assert closed.truncation_coefficients(1.0, 0.4, 1) == [1.0, -0.4]
    with pytest.raises(UnsupportedOrderError):
        closed.truncation_coefficients(1.0, 0.4, 2)
