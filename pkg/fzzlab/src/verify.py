"""
Identity checks that replay the derivation chain of the FZZ formula with
quadrature instead of simulation, plus the statistical utilities shared by
the Monte Carlo suites (KS tests, effective sample size, weighted means).

Every check returns a VerificationReport and never raises on a numerical
mismatch; parameter errors propagate.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats

from . import closed
from .core import Branch, Cosmology, LcftParams, make_params, x_parameter
from .dist import (
    InverseGammaParams,
    stream,
    cone_moment_integral,
    inv_gamma_laplace_m1,
    inv_gamma_logpdf,
)
from .errors import DomainError, TooFewSamplesError
from .quadrature import QuadratureResult, exp_sinh_rule, quad_semiinfinite
from .report import VerificationReport, deterministic_report
from .specfn import chebyshev_exact, chebyshev_series, double_integral_series

logger = logging.getLogger(__name__)

__all__ = [
    "KsResult",
    "QuadratureResult",
    "CONSISTENCY_GAMMAS",
    "check_area_law_consistency",
    "check_cone_moment_identity",
    "check_gmc_selberg_first_moment",
    "check_laplace_bessel",
    "check_mu_zero_limit",
    "check_selberg_n1",
    "check_series_route",
    "check_special1",
    "check_special2",
    "check_truncated_u",
    "check_u_consistency",
    "check_variance_identity",
    "consistency_alphas",
    "effective_sample_size",
    "ks_test",
    "quad_semiinfinite",
    "selberg_n1_quadrature",
    "special1_points",
    "special2_points",
    "special2_quadrature",
    "truncation_alphas",
    "u_length_integral",
    "weighted_correlation",
    "weighted_mean",
]

# tolerance tiers
TOL_ALGEBRAIC = 1e-10
TOL_QUADRATURE_1D = 1e-6
TOL_LAPLACE = 1e-8
TOL_QUADRATURE_2D = 1e-3

MIN_KS_SAMPLES = 100
VARIANCE_GRID = tuple(np.round(np.linspace(0.1, 1.9, 19), 12))
# gamma values of the one-point consistency grid
CONSISTENCY_GAMMAS = (0.8, 1.0, 1.2, 1.4)
SPECIAL_POINTS_SEED = 20


# ==================== PARAMETER GRIDS ====================

def _interior(lo: float, hi: float, count: int) -> Tuple[float, ...]:
    return tuple(lo + (hi - lo) * (k + 1) / (count + 1) for k in range(count))


def consistency_alphas(params: LcftParams, count: int = 5) -> Tuple[float, ...]:
    """count points strictly inside (2/gamma, Q - gamma/4)."""
    return _interior(2.0 / params.gamma, params.q - params.gamma / 4.0, count)


def truncation_alphas(params: LcftParams, count: int = 5) -> Tuple[float, ...]:
    """count points strictly inside the order-1 window (Q - gamma, Q - gamma/2)."""
    return _interior(params.q - params.gamma, params.q - params.gamma / 2.0, count)


def special1_points(count: int = 20, seed: int = SPECIAL_POINTS_SEED) -> Tuple[Tuple[float, float], ...]:
    """Reproducible (a, x) with a at least 0.05 away from the integers and |x| <= 0.9."""
    rng = stream(seed, 1)
    out = []
    while len(out) < count:
        a = float(rng.uniform(0.1, 3.9))
        x = float(rng.uniform(-0.9, 0.9))
        if abs(a - round(a)) >= 0.05:
            out.append((a, x))
    return tuple(out)


def special2_points(count: int = 20, seed: int = SPECIAL_POINTS_SEED) -> Tuple[Tuple[float, float, float, float], ...]:
    """Reproducible (a, b, c, lambda) with c <= b/2 - 3/4 and lambda <= 1.2 a."""
    rng = stream(seed, 2)
    out = []
    for _ in range(count):
        a = float(rng.uniform(0.5, 2.0))
        b = float(rng.uniform(-0.5, 1.5))
        c = b / 2.0 - float(rng.uniform(0.75, 2.0))
        lam = a * float(rng.uniform(0.1, 1.2))
        out.append((a, b, c, lam))
    return tuple(out)


def _echo(params: LcftParams, **extra) -> Dict[str, object]:
    out: Dict[str, object] = {"gamma": params.gamma}
    out.update(extra)
    return out


def _cosmo_echo(params: LcftParams, cosmo: Cosmology) -> Dict[str, object]:
    return {
        "mu": cosmo.mu,
        "mu_b": cosmo.mu_b,
        "branch": cosmo.branch.value,
        "x": x_parameter(params, cosmo.mu, cosmo.mu_b),
    }


# ==================== SPECIAL FUNCTION IDENTITIES ====================

def check_special1(a: float, x: float, tolerance: float = TOL_QUADRATURE_1D) -> VerificationReport:
    """Generalized Chebyshev series against cos(a arccos x)."""
    started = time.perf_counter()
    series = chebyshev_series(a, x)
    target = chebyshev_exact(a, x)
    return deterministic_report(
        "special1",
        {"a": a, "x": x},
        target,
        series.value,
        tolerance,
        started=started,
        abs_floor=1e-12,
        notes={"terms": series.terms_used, "tail_bound": series.tail_bound},
    )


def special2_quadrature(
    a: float, b: float, c: float, lam: float, inner_h: float = 1.0 / 32.0
) -> Tuple[QuadratureResult, float]:
    """
    int_0^inf int_0^inf y^b e^(-lam y) t^c exp(-y^2 t - a^2/t) dy dt.

    The outer t-integral is adaptive exp-sinh; the inner y-integral uses a fixed
    exp-sinh rule after rescaling y by 1/(lam + sqrt t), which keeps the inner
    integrand's decay length of order one for every t. Returns the result and
    the relative difference between the inner rule at h and at 2h.
    """
    fine_x, fine_w = exp_sinh_rule(b, inner_h)
    coarse_x, coarse_w = exp_sinh_rule(b, 2.0 * inner_h)
    a2 = a * a

    def inner(t, xs, ws):
        sigma = 1.0 / (lam + np.sqrt(t))
        s = sigma[:, None]
        with np.errstate(over="ignore", under="ignore"):
            y = s * xs[None, :]
            vals = np.exp(-lam * y - t[:, None] * y * y)
        return sigma ** (b + 1.0) * (vals @ ws)

    def outer(t, xs=fine_x, ws=fine_w):
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            return np.exp(-a2 / t) * inner(t, xs, ws)

    fine = quad_semiinfinite(outer, c, rel_tol=1e-11)
    coarse = quad_semiinfinite(lambda t: outer(t, coarse_x, coarse_w), c, rel_tol=1e-11)
    inner_diff = abs(fine.value - coarse.value) / max(abs(fine.value), 1e-300)
    return fine, inner_diff


def check_special2(
    a: float, b: float, c: float, lam: float, tolerance: float = TOL_QUADRATURE_1D
) -> VerificationReport:
    started = time.perf_counter()
    series = double_integral_series(a, b, c, lam)
    quad, inner_diff = special2_quadrature(a, b, c, lam)
    return deterministic_report(
        "special2",
        {"a": a, "b": b, "c": c, "lambda": lam},
        quad.value,
        series.value,
        tolerance,
        started=started,
        notes={
            "terms": series.terms_used,
            "tail_bound": series.tail_bound,
            "quad_error_estimate": quad.error_estimate,
            "inner_rule_rel_diff": inner_diff,
        },
    )


# ==================== AREA LAWS AND U ====================

def check_laplace_bessel(
    params: LcftParams, alpha: float, ell: float, mu: float, tolerance: float = TOL_LAPLACE
) -> VerificationReport:
    """Laplace transform of the area at length ell: direct quadrature against the Bessel form."""
    started = time.perf_counter()
    target = closed.laplace_area(params, alpha, ell, mu, normalized=True)
    law = closed.area_law_alpha(params, alpha)
    # at length ell the area is ell^2 times a unit-length area
    scaled = InverseGammaParams(law.shape, law.scale * ell * ell)

    def integrand(t):
        return np.exp(-mu * t + inv_gamma_logpdf(scaled, t))

    quad = quad_semiinfinite(integrand, 0.0, rel_tol=1e-13)
    return deterministic_report(
        "laplace_bessel",
        _echo(params, alpha=alpha, ell=ell, mu=mu),
        target,
        quad.value,
        tolerance,
        started=started,
        notes={"quad_error_estimate": quad.error_estimate, "evaluations": quad.evaluations},
    )


def _exp_minus_one_plus(y: np.ndarray) -> np.ndarray:
    """e^(-y) - 1 + y, summed as a series where the direct form cancels."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < 0.1
    ys = y[small]
    # y^2/2 - y^3/6 + ... ; twelve terms reach double precision for y < 0.1
    acc = np.zeros_like(ys)
    term = 0.5 * ys * ys
    for k in range(2, 14):
        acc += term
        term = -term * ys / (k + 1)
    out[small] = acc
    with np.errstate(over="ignore"):
        out[~small] = np.expm1(-y[~small]) + y[~small]
    return out


def u_length_integral(params: LcftParams, alpha: float, cosmo: Cosmology, k: int = 0) -> QuadratureResult:
    """
    int_0^inf ell^(-rho-1) (E[exp(-mu ell^2 A - mu_B ell)] - sum_{j<=k} c_j ell^j) d ell

    for A drawn from the unit-length area law; the returned value is the bare
    integral, without the length-density constant in front.
    """
    coeffs = closed.truncation_coefficients(cosmo.mu, cosmo.mu_b, k)
    law = closed.area_law_alpha(params, alpha).as_inverse_gamma()
    rho = params.rho(alpha)
    mu, mu_b = cosmo.mu, cosmo.mu_b

    def integrand(ell):
        with np.errstate(over="ignore", under="ignore"):
            y = mu_b * ell
            lm1 = inv_gamma_laplace_m1(law, mu * ell * ell)
            decay = np.exp(-y)
            if len(coeffs) == 1:
                return decay * lm1 + np.expm1(-y)
            return decay * lm1 + _exp_minus_one_plus(y)

    return quad_semiinfinite(integrand, -rho - 1.0, rel_tol=1e-12)


def _length_constant(params: LcftParams, alpha: float) -> float:
    return 2.0 / params.gamma * 2.0 ** (-alpha * alpha / 2.0) * closed.u0_bar(params, alpha)


def check_u_consistency(
    params: LcftParams, alpha: float, cosmo: Cosmology, tolerance: float = TOL_QUADRATURE_1D
) -> VerificationReport:
    """u_fzz against the length integral of the inverse gamma area law."""
    g, q = params.gamma, params.q
    if not 2.0 / g < alpha < q - g / 4.0:
        raise DomainError(
            "check_u_consistency", alpha, f"alpha must lie in (2/gamma, Q - gamma/4) = ({2.0 / g:.6g}, {q - g / 4.0:.6g})"
        )
    if not (cosmo.mu > 0.0 and cosmo.mu_b > 0.0):
        raise DomainError("check_u_consistency", (cosmo.mu, cosmo.mu_b), "need mu > 0 and mu_b > 0")
    started = time.perf_counter()
    target = closed.u_fzz(params, alpha, cosmo)
    quad = u_length_integral(params, alpha, cosmo, k=0)
    estimate = _length_constant(params, alpha) * quad.value
    return deterministic_report(
        "u_consistency",
        _echo(params, alpha=alpha, **_cosmo_echo(params, cosmo)),
        target,
        estimate,
        tolerance,
        started=started,
        notes={"quad_error_estimate": quad.error_estimate, "evaluations": quad.evaluations},
    )


def check_truncated_u(
    params: LcftParams, alpha: float, cosmo: Cosmology, k: int = 1, tolerance: float = TOL_QUADRATURE_1D
) -> VerificationReport:
    """u_fzz against the order-k truncated length integral, valid for alpha in the k-th window."""
    g, q = params.gamma, params.q
    lo, hi = q - g * (k + 1) / 2.0, q - g * k / 2.0
    # raises UnsupportedOrderError for k > 1
    closed.truncation_coefficients(cosmo.mu, cosmo.mu_b, k)
    if not lo < alpha < hi:
        raise DomainError("check_truncated_u", alpha, f"order {k} needs alpha in ({lo:.6g}, {hi:.6g})")
    started = time.perf_counter()
    target = closed.u_fzz(params, alpha, cosmo)
    quad = u_length_integral(params, alpha, cosmo, k=k)
    estimate = _length_constant(params, alpha) * quad.value
    return deterministic_report(
        "truncated_u",
        _echo(params, alpha=alpha, k=k, **_cosmo_echo(params, cosmo)),
        target,
        estimate,
        tolerance,
        started=started,
        notes={"quad_error_estimate": quad.error_estimate},
    )


def check_series_route(
    params: LcftParams, alpha: float, cosmo: Cosmology, tolerance: float = TOL_LAPLACE
) -> VerificationReport:
    started = time.perf_counter()
    target = closed.u_fzz(params, alpha, cosmo)
    estimate = closed.u_fzz_series(params, alpha, cosmo)
    return deterministic_report(
        "series_route",
        _echo(params, alpha=alpha, **_cosmo_echo(params, cosmo)),
        target,
        estimate,
        tolerance,
        started=started,
    )


def check_mu_zero_limit(
    params: LcftParams, alpha: float, mu_b: float, tolerance: float = TOL_LAPLACE
) -> VerificationReport:
    """u_mu_zero against the length integral with the area term switched off."""
    g, q = params.gamma, params.q
    if not q - g / 2.0 < alpha < q:
        raise DomainError("check_mu_zero_limit", alpha, "needs alpha in (Q - gamma/2, Q)")
    started = time.perf_counter()
    rho = params.rho(alpha)
    quad = quad_semiinfinite(lambda ell: np.expm1(-mu_b * ell), -rho - 1.0, rel_tol=1e-13)
    estimate = _length_constant(params, alpha) * quad.value
    target = closed.u_mu_zero(params, alpha, mu_b)
    return deterministic_report(
        "mu_zero_limit",
        _echo(params, alpha=alpha, mu=0.0, mu_b=mu_b),
        target,
        estimate,
        tolerance,
        started=started,
    )


# ==================== SELBERG AND ALGEBRAIC IDENTITIES ====================

def selberg_n1_quadrature(params: LcftParams, radius: float = 60.0, epsrel: float = 1e-9) -> Dict[str, float]:
    """
    int_H (2y)^(-p) |z^2 + 1|^(-e) d^2z with p = gamma^2/2, e = gamma Q - gamma^2 = 2 - p.

    The plane is split into the disk |z - i| < 1/2, integrated in polar
    coordinates with u = r^p, and the rest, integrated over x in [0, R] by
    symmetry with y = v^(1/(1-p)) below the disk. Beyond |x| = R the integrand
    is replaced by its |z|^(-2e) asymptote, integrated in closed form.
    """
    p = params.gamma ** 2 / 2.0
    e = 2.0 - p
    one_minus = 1.0 - p
    if not 0.0 < p < 1.0:
        raise DomainError("selberg_n1_quadrature", params.gamma, "need gamma < sqrt(2)")

    def modulus(x, y):
        return math.hypot(x * x - y * y + 1.0, 2.0 * x * y)

    def f(x, y):
        return (2.0 * y) ** (-p) * modulus(x, y) ** (-e)

    def disk_radial(u, phi):
        r = u ** (1.0 / p)
        x = r * math.cos(phi)
        y = 1.0 + r * math.sin(phi)
        return (2.0 * y) ** (-p) * math.hypot(x, y + 1.0) ** (-e) / p

    def disk_angle(phi):
        return integrate.quad(disk_radial, 0.0, 0.5 ** p, args=(phi,), epsabs=0.0, epsrel=epsrel, limit=200)[0]

    disk = integrate.quad(disk_angle, 0.0, 2.0 * math.pi, epsabs=0.0, epsrel=epsrel, limit=200)[0]

    def below(v, x):
        y = v ** (1.0 / one_minus)
        return 2.0 ** (-p) / one_minus * modulus(x, y) ** (-e)

    def column(x):
        if x < 0.5:
            h = math.sqrt(0.25 - x * x)
            lo, hi = 1.0 - h, 1.0 + h
        else:
            lo = hi = 1.0
        low = integrate.quad(below, 0.0, lo ** one_minus, args=(x,), epsabs=0.0, epsrel=epsrel, limit=200)[0]
        high = integrate.quad(lambda y: f(x, y), hi, math.inf, epsabs=0.0, epsrel=epsrel, limit=200)[0]
        return low + high

    half = 0.0
    for a, b in ((0.0, 0.5), (0.5, 2.0), (2.0, 10.0), (10.0, radius)):
        half += integrate.quad(column, a, b, epsabs=0.0, epsrel=epsrel, limit=200)[0]

    beta = special.beta(one_minus / 2.0, e - one_minus / 2.0)
    tail = 2.0 ** (-p) * 0.5 * beta * radius ** (p - 2.0) / (2.0 - p)
    value = disk + 2.0 * (half + tail)
    return {"value": value, "disk": disk, "outside": 2.0 * half, "tail": 2.0 * tail}


def check_selberg_n1(params: LcftParams, tolerance: float = TOL_QUADRATURE_2D) -> VerificationReport:
    if not params.gamma < math.sqrt(2.0):
        raise DomainError("check_selberg_n1", params.gamma, "n = 1 needs gamma < sqrt(2)")
    started = time.perf_counter()
    target = closed.selberg_rhs(params, 1)
    parts = selberg_n1_quadrature(params)
    ratio = parts["value"] / target
    logger.debug("selberg n=1: quadrature/closed form = %.8f", ratio)
    return deterministic_report(
        "selberg_n1",
        _echo(params, n=1),
        target,
        parts["value"],
        tolerance,
        started=started,
        notes={"observed_ratio": ratio, "tail": parts["tail"], "disk": parts["disk"]},
    )


def check_variance_identity(
    gammas: Sequence[float] = VARIANCE_GRID, tolerance: float = TOL_ALGEBRAIC
) -> VerificationReport:
    """2/sin(pi gamma^2/4) against the reflection-coefficient route, worst point on the grid."""
    started = time.perf_counter()
    worst = None
    for g in gammas:
        params = make_params(float(g))
        direct = closed.mot_variance(params)
        via_ratio = closed.mot_variance_from_ratio(params)
        err = abs(via_ratio - direct) / abs(direct)
        if worst is None or err > worst[0]:
            worst = (err, float(g), direct, via_ratio)
    _, g_worst, direct, via_ratio = worst
    return deterministic_report(
        "variance_identity",
        {"gamma_grid": [float(g) for g in gammas]},
        direct,
        via_ratio,
        tolerance,
        started=started,
        notes={"worst_gamma": g_worst},
    )


def check_gmc_selberg_first_moment(params: LcftParams, tolerance: float = TOL_ALGEBRAIC) -> VerificationReport:
    """At alpha = Q - gamma the bulk moment is the first Selberg-type integral."""
    started = time.perf_counter()
    alpha = params.q - params.gamma
    return deterministic_report(
        "gmc_selberg_first_moment",
        _echo(params, alpha=alpha),
        closed.selberg_rhs(params, 1),
        closed.gmc_moment_h(params, alpha),
        tolerance,
        started=started,
    )


def check_area_law_consistency(
    gammas: Sequence[float] = VARIANCE_GRID, tolerance: float = TOL_ALGEBRAIC
) -> VerificationReport:
    """The disk area law is the alpha = gamma insertion law with its shape shifted by one."""
    started = time.perf_counter()
    worst = (-1.0, None, 0.0, 0.0)
    for g in gammas:
        params = make_params(float(g))
        qd = closed.area_law_qd(params)
        ins = closed.area_law_alpha(params, params.gamma)
        for target, estimate in ((qd.scale, ins.scale), (qd.shape, ins.shape + 1.0)):
            err = abs(estimate - target) / abs(target)
            if err > worst[0]:
                worst = (err, float(g), target, estimate)
    _, g_worst, target, estimate = worst
    return deterministic_report(
        "area_law_consistency",
        {"gamma_grid": [float(g) for g in gammas]},
        target,
        estimate,
        tolerance,
        started=started,
        notes={"worst_gamma": g_worst},
    )


def check_cone_moment_identity(theta: float, p: float, tolerance: float = TOL_LAPLACE) -> VerificationReport:
    started = time.perf_counter()
    target = cone_moment_integral(theta, p)
    q = math.pi / theta

    def integrand(x):
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + x ** q) ** 2

    quad = quad_semiinfinite(integrand, p, rel_tol=1e-13)
    return deterministic_report(
        "cone_moment_identity",
        {"theta": theta, "p": p},
        target,
        quad.value,
        tolerance,
        started=started,
    )


# ==================== STATISTICS ====================

@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n_effective: float


def effective_sample_size(weights=None, log_weights=None) -> float:
    """(sum w)^2 / sum w^2, computed from log weights when given."""
    if log_weights is not None:
        lw = np.asarray(log_weights, dtype=float)
        return float(np.exp(2.0 * special.logsumexp(lw) - special.logsumexp(2.0 * lw)))
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def _normalized(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0.0) or not w.sum() > 0.0:
        raise DomainError("weights", w.shape, "need one non-negative weight per sample, not all zero")
    return w / w.sum()


def weighted_mean(values, weights=None) -> Tuple[float, float]:
    """Self-normalized mean and its delta-method standard error."""
    v = np.asarray(values, dtype=float)
    w = _normalized(weights, v.size)
    mean = float(np.dot(w, v))
    stderr = float(math.sqrt(np.sum(w * w * (v - mean) ** 2)))
    return mean, stderr


def weighted_correlation(x, y, weights=None) -> Tuple[float, float]:
    """Weighted Pearson correlation and its standard error under independence, 1/sqrt(ESS)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = _normalized(weights, x.size)
    mx, my = np.dot(w, x), np.dot(w, y)
    cov = np.dot(w, (x - mx) * (y - my))
    r = float(cov / math.sqrt(np.dot(w, (x - mx) ** 2) * np.dot(w, (y - my) ** 2)))
    return r, 1.0 / math.sqrt(effective_sample_size(w))


def ks_test(samples, cdf: Callable[[np.ndarray], np.ndarray], weights=None) -> KsResult:
    """
    One-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    With weights the empirical CDF is self-normalized and the effective
    sample size replaces n in the Stephens-corrected limit law.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_KS_SAMPLES:
        raise TooFewSamplesError(x.size, MIN_KS_SAMPLES)
    order = np.argsort(x, kind="stable")
    x = x[order]
    w = _normalized(None if weights is None else np.asarray(weights, dtype=float).ravel()[order], x.size)
    ecdf_hi = np.cumsum(w)
    ecdf_lo = ecdf_hi - w
    model = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    d = float(max(np.max(ecdf_hi - model), np.max(model - ecdf_lo), 0.0))
    d = min(d, 1.0)
    n_eff = float(x.size) if weights is None else effective_sample_size(w)
    root = math.sqrt(n_eff)
    p_value = float(stats.kstwobign.sf(d * (root + 0.12 + 0.11 / root)))
    return KsResult(d, min(max(p_value, 0.0), 1.0), n_eff)
