import math

import numpy as np
import pytest

from src import conesim
from src.closed import mot_variance
from src.core import cone_geometry
from src.dist import cone_exit_cdf, cone_exit_sample, stream
from src.errors import DomainError
from src.verify import ks_test


@pytest.fixture
def geom(params_g1):
    # theta = pi/4, phi = pi, u = 2^(-1/4)
    return cone_geometry(params_g1, 2.0)


def synthetic_splits(a, l, log_w, u, trials=None):
    n = a.size
    return conesim.SplitSet(
        a, l, log_w, np.zeros(n, dtype=int), np.arange(n), trials if trials is not None else n, u
    )


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0},
    {"dt": 1e-3, "start_offset_eps": 0.0},
    {"dt": 1e-3, "start_offset_eps": 0.1},
    {"dt": 1e-3, "max_steps": 0},
])
def test_path_config_validation(kwargs):
    with pytest.raises(DomainError):
        conesim.PathConfig(**kwargs)


def test_relative_config():
    cfg = conesim.PathConfig.relative(2.0, rel_dt=1e-3, eps=5e-3)
    assert cfg.dt == pytest.approx(4e-3)
    assert cfg.start_offset_eps == 5e-3
    assert conesim.start_point(2.0, cfg) == complex(2.0, 0.01)


def test_ray_exit_probability():
    theta = math.pi / 3
    assert conesim.ray_exit_probability(theta, complex(1.0, 1.0)) == pytest.approx(0.75)
    assert conesim.ray_exit_probability(theta, complex(1.0, 0.01)) == pytest.approx(math.atan(0.01) / theta)


def test_start_must_lie_inside(rng):
    cfg = conesim.PathConfig(dt=1e-3)
    with pytest.raises(DomainError):
        conesim.simulate_exits(math.pi / 4, complex(0.0, 1.0), cfg, 10, rng)


def test_harmonic_measure_of_the_ray(rng):
    theta = math.pi / 4
    start = complex(math.cos(theta / 2), math.sin(theta / 2))
    batch = conesim.simulate_exits(theta, start, conesim.PathConfig(dt=1e-2), 4000, rng)
    assert set(np.unique(batch.side)) <= {conesim.RAY, conesim.REAL_AXIS}
    assert np.all(batch.duration > 0.0)
    assert np.all(batch.radius[batch.ray] > 0.0)
    assert np.all(batch.radius[~batch.ray] == 0.0)
    assert batch.ray.mean() == pytest.approx(0.5, abs=0.05)


def test_single_path_outcome(rng):
    cfg = conesim.PathConfig(dt=1e-3)
    out = conesim.sample_exit_through_ray(math.pi / 4, 1.0, cfg, rng)
    assert isinstance(out, (conesim.ConeSplitSample, conesim.RealAxisExit))


def test_ray_exit_radii_follow_the_kernel(geom):
    cfg = conesim.PathConfig.relative(geom.u, rel_dt=1e-3, eps=1e-2)
    splits = conesim.weighted_split_sampler(geom, 1000, cfg, stream(7, 1), weighted=False)
    assert splits.n == 1000
    assert splits.n_trials > splits.n
    np.testing.assert_allclose(splits.weights, 1.0)
    ks = ks_test(splits.l, lambda r: cone_exit_cdf(geom.theta, geom.u, r))
    assert ks.p_value > 1e-4


def test_results_do_not_depend_on_threads(geom):
    cfg = conesim.PathConfig.relative(geom.u, rel_dt=1e-2, eps=5e-2, unit_size=100)
    one = conesim.ray_exit_samples(geom.theta, geom.u, 250, cfg, stream(7, 2), threads=1)
    many = conesim.ray_exit_samples(geom.theta, geom.u, 250, cfg, stream(7, 2), threads=3)
    np.testing.assert_array_equal(one[0], many[0])
    np.testing.assert_array_equal(one[1], many[1])
    assert one[2] == many[2]
    # three work units of 100, 100 and 50 paths
    np.testing.assert_array_equal(np.bincount(one[3]), [100, 100, 50])


def test_split_set_bookkeeping():
    a = np.array([0.5, 1.0, 2.0])
    l = np.array([0.8, 1.0, 1.3])
    log_w = np.log(np.array([1.0, 4.0, 2.0]))
    splits = synthetic_splits(a, l, log_w, 1.0, trials=10)
    np.testing.assert_allclose(splits.weights, [0.25, 1.0, 0.5])
    assert splits.n_rejected == 7
    assert splits.ess == pytest.approx(49.0 / 21.0)
    rows = list(splits.csv_rows())
    assert rows[1] == (0, 1, 1.0, 1.0, 1.0, "ray")
    samples = list(splits.samples())
    assert samples[2].exit_radius_l == 1.3
    assert samples[2].is_weight == pytest.approx(0.5)


def test_systematic_resample(rng):
    idx = conesim.systematic_resample(np.array([0.0, 1.0, 0.0]), 50, rng)
    assert np.all(idx == 1)
    idx = conesim.systematic_resample(np.array([1.0, 3.0]), 4000, rng)
    assert abs(np.sum(idx == 1) - 3000) <= 1


def test_recursion_partial_sums(geom, rng):
    n = 500
    a = rng.uniform(0.1, 1.0, n)
    l = geom.u * rng.uniform(0.3, 0.9, n)
    splits = synthetic_splits(a, l, np.zeros(n), geom.u)
    cfg = conesim.PathConfig.relative(geom.u, rel_dt=1e-3)
    res = conesim.recursion_fixed_point(geom, 20, 300, cfg, rng, splits=splits)
    assert res.partial_sums.shape == (20, 300)
    assert np.all(np.diff(res.partial_sums, axis=0) >= 0.0)
    np.testing.assert_array_equal(res.partial_sums[-1], res.s)
    assert np.all(res.residual <= 0.81 ** 20)
    assert res.target.shape == pytest.approx(1.0)
    assert res.target.scale == pytest.approx(0.5 * geom.u ** 2)


def test_recursion_depth_must_be_positive(geom, rng):
    with pytest.raises(DomainError):
        conesim.recursion_fixed_point(geom, 0, 10, conesim.PathConfig(dt=1e-3), rng)


def test_moment_ratio_on_exact_kernel_draws(geom, rng):
    n = 50_000
    l = cone_exit_sample(geom.theta, geom.u, rng, size=n)
    log_w = -(math.pi / geom.phi) * np.log(l / geom.u)
    splits = synthetic_splits(np.ones(n), l, log_w, geom.u)
    cfg = conesim.PathConfig.relative(geom.u, rel_dt=1e-3)
    rep = conesim.moment_ratio_check(geom, splits, cfg, eps=0.5)
    assert rep.target < 1.0
    assert rep.abs_err < 5.0 * rep.stderr


def test_shear_matrix_covariance():
    theta, a2 = math.pi / 4, 2.5
    lam = conesim.shear_matrix(theta, a2)
    expected = a2 * np.array([[1.0, -math.cos(theta)], [-math.cos(theta), 1.0]])
    np.testing.assert_allclose(lam @ lam.T, expected, rtol=1e-14, atol=1e-14)
    with pytest.raises(DomainError):
        conesim.shear_matrix(theta, 0.0)


def test_shear_map_forms():
    theta, a2 = 1.0, 2.0
    pts = np.array([[1.0, 0.0], [0.3, -2.0]])
    real = conesim.shear_map(theta, a2, pts)
    cplx = conesim.shear_map(theta, a2, pts[:, 0] + 1j * pts[:, 1])
    np.testing.assert_allclose(cplx.real, real[:, 0])
    np.testing.assert_allclose(cplx.imag, real[:, 1])
    with pytest.raises(DomainError):
        conesim.shear_map(theta, a2, np.ones((2, 3)))


def test_shear_covariance_reports(geom, params_g1, rng):
    a2 = mot_variance(params_g1)
    reps = conesim.shear_covariance_check(geom.theta, a2, 20_000, rng)
    assert [r.check for r in reps] == ["shear_covariance_xx", "shear_covariance_xy", "shear_covariance_yy"]
    assert reps[0].target == pytest.approx(a2)
    assert reps[1].target == pytest.approx(-a2 * math.cos(geom.theta))
    for rep in reps:
        assert rep.abs_err < 5.0 * rep.stderr


def test_extrapolation():
    ext = conesim.Extrapolation(1e-2, value_eps=0.02, value_half=0.011)
    assert ext.extrapolated == pytest.approx(0.002)


@pytest.mark.slow
def test_cone_checks_at_reference_point(geom, params_g1):
    cfg = conesim.PathConfig.relative(geom.u, rel_dt=1e-3, eps=1e-2)
    n = 20_000
    plain = conesim.weighted_split_sampler(geom, n, cfg, stream(7, 11), weighted=False)
    assert conesim.exit_kernel_check(geom, plain, cfg).passed
    splits = conesim.weighted_split_sampler(geom, n, cfg, stream(7, 12))
    assert conesim.moment_ratio_check(geom, splits, cfg, eps=0.5).passed
    result = conesim.recursion_fixed_point(geom, 30, n, cfg, stream(7, 13), splits=splits)
    for rep in conesim.recursion_checks(geom, result, cfg):
        assert rep.passed, rep.to_json()
    for rep in conesim.independence_check(geom, n, cfg, stream(7, 14), splits=splits):
        assert rep.passed, rep.to_json()
