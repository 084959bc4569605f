"""
Closed-form constants and densities of boundary Liouville theory.

Every product of Gamma factors is formed in signed-log arithmetic; an
argument within POLE_TOL of a non-positive integer raises PoleError.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from .core import (
    Branch,
    Cosmology,
    DensityShape,
    LcftParams,
    Normalization,
    s_cosine_factor,
    x_parameter,
)
from .dist import InverseGammaParams
from .errors import DomainError, UnsupportedOrderError
from .specfn import SignedLogGamma, double_integral_series, gamma_signed, log_bessel_k

logger = logging.getLogger(__name__)

POLE_TOL = 1e-8
_LOG_MAX = math.log(np.finfo(float).max)

__all__ = [
    "AreaLaw",
    "DensityShape",
    "Normalization",
    "Provenance",
    "Weight",
    "area_law_alpha",
    "area_law_qd",
    "delta_alpha",
    "disk_length_shape",
    "gmc_moment_h",
    "laplace_area",
    "length_mass",
    "mot_variance",
    "mot_variance_from_ratio",
    "r_bar",
    "selberg_rhs",
    "truncation_coefficients",
    "u0_bar",
    "u_at_height",
    "u_fzz",
    "u_fzz_series",
    "u_mu_zero",
]


class Provenance(Enum):
    ALPHA_INSERTION = "alpha-insertion"
    QUANTUM_DISK = "quantum-disk"


class Weight(Enum):
    HALF_GAMMA_SQ = "half-gamma-sq"
    TWO = "two"


@dataclass(frozen=True)
class AreaLaw:
    shape: float
    scale: float
    provenance: Provenance

    def __post_init__(self):
        if not (math.isfinite(self.shape) and self.shape > 0.0):
            raise DomainError("AreaLaw", self.shape, "shape must be finite and > 0")
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise DomainError("AreaLaw", self.scale, "scale must be finite and > 0")

    def as_inverse_gamma(self) -> InverseGammaParams:
        return InverseGammaParams(self.shape, self.scale)


def _gamma(x: float, operation: str, label: str) -> SignedLogGamma:
    return gamma_signed(x, pole_tol=POLE_TOL, operation=operation, label=label)


def _check_extended(params: LcftParams, alpha: float, operation: str) -> None:
    g, q = params.gamma, params.q
    if not g / 2.0 < alpha < q:
        raise DomainError(operation, alpha, f"alpha must lie in (gamma/2, Q) = ({g / 2.0:.6g}, {q:.6g})")


def delta_alpha(params: LcftParams, alpha: float) -> float:
    return alpha / 2.0 * (params.q - alpha / 2.0)


def _exp_or_inf(log_value: float, operation: str) -> float:
    if log_value > _LOG_MAX:
        logger.warning("%s: value exp(%.6g) overflows, returning +inf", operation, log_value)
        return math.inf
    return math.exp(log_value)


def _log_u0_bar(params: LcftParams, alpha: float) -> float:
    g = params.gamma
    if not alpha > g / 2.0:
        raise DomainError("u0_bar", alpha, f"alpha must exceed gamma/2 = {g / 2.0:.6g}")
    arg = g * alpha / 2.0 - g * g / 4.0
    if arg <= POLE_TOL:
        logger.warning("u0_bar: alpha=%.12g sits on the Gamma(0) pole, returning +inf", alpha)
        return math.inf
    rho = params.rho(alpha)
    log_base = -g * alpha / 2.0 * math.log(2.0) + math.log(2.0 * math.pi)
    log_base -= _gamma(1.0 - g * g / 4.0, "u0_bar", "1-gamma^2/4").log_abs
    return rho * log_base + _gamma(arg, "u0_bar", "gamma*alpha/2-gamma^2/4").log_abs


def u0_bar(params: LcftParams, alpha: float) -> float:
    """Expected boundary length moment of the alpha-insertion field."""
    return _exp_or_inf(_log_u0_bar(params, alpha), "u0_bar")


def _log_length_constant(params: LcftParams, alpha: float) -> float:
    # log of (2/gamma) 2^(-alpha^2/2) u0_bar(alpha)
    return math.log(2.0 / params.gamma) - alpha * alpha / 2.0 * math.log(2.0) + _log_u0_bar(params, alpha)


def length_mass(params: LcftParams, alpha: float, ell):
    """Boundary length density (2/gamma) 2^(-alpha^2/2) u0_bar(alpha) ell^((2/gamma)(alpha-Q)-1)."""
    rho = params.rho(alpha)
    ell = np.asarray(ell, dtype=float)
    out = np.exp(_log_length_constant(params, alpha) - (rho + 1.0) * np.log(ell))
    return out if out.ndim else float(out)


def u_fzz(params: LcftParams, alpha: float, cosmo: Cosmology) -> float:
    """The one-point bulk structure constant of boundary Liouville theory."""
    op = "u_fzz"
    _check_extended(params, alpha, op)
    if not cosmo.mu > 0.0:
        raise DomainError(op, cosmo.mu, "mu must be > 0; use u_mu_zero at mu = 0")
    g, q = params.gamma, params.q
    g1 = _gamma(g * alpha / 2.0 - g * g / 4.0, op, "gamma*alpha/2-gamma^2/4")
    g2 = _gamma(2.0 * alpha / g - 4.0 / (g * g) - 1.0, op, "2alpha/gamma-4/gamma^2-1")
    log_inner = (
        math.log(math.pi * cosmo.mu)
        - g * alpha * math.log(2.0)
        + _gamma(g * g / 4.0, op, "gamma^2/4").log_abs
        - _gamma(1.0 - g * g / 4.0, op, "1-gamma^2/4").log_abs
    )
    log_abs = (
        math.log(4.0 / g)
        - alpha * alpha / 2.0 * math.log(2.0)
        + (q - alpha) / g * log_inner
        + g1.log_abs
        + g2.log_abs
    )
    return g1.sign * g2.sign * math.exp(log_abs) * s_cosine_factor(params, alpha, cosmo)


def u_fzz_series(
    params: LcftParams, alpha: float, cosmo: Cosmology, n_terms: Optional[int] = None
) -> float:
    """
    u_fzz rebuilt from the two double-integral series in lambda = mu_B/sqrt(mu).

    Integrating the length integral by parts and averaging over the inverse
    gamma area law leaves two integrals of the double-integral-series type,
    one with weight lambda and one with weight 2. Needs x < 1 and
    alpha in (Q - gamma/2, Q).
    """
    op = "u_fzz_series"
    g, q = params.gamma, params.q
    if not q - g / 2.0 < alpha < q:
        raise DomainError(op, alpha, "series route needs alpha in (Q - gamma/2, Q)")
    if cosmo.branch is not Branch.REAL_S:
        raise DomainError(op, x_parameter(params, cosmo.mu, cosmo.mu_b), "series route needs x < 1")
    rho = params.rho(alpha)
    beta = 1.0 / (4.0 * math.sin(params.theta))
    a = math.sqrt(beta)
    lam = cosmo.mu_b / math.sqrt(cosmo.mu)
    c_len = math.exp(_log_length_constant(params, alpha))
    c_prime = -c_len / rho * cosmo.mu ** (rho / 2.0)
    pref = c_prime * math.exp(rho * math.log(beta) - _gamma(rho, op, "rho").log_abs)
    first = double_integral_series(a, -rho, -rho - 1.0, lam, n_terms)
    second = double_integral_series(a, 1.0 - rho, -rho, lam, n_terms)
    logger.debug(
        "u_fzz_series: %d + %d terms, tails %.3g %.3g",
        first.terms_used, second.terms_used, first.tail_bound, second.tail_bound,
    )
    return pref * (lam * first.value + 2.0 * second.value)


def u_at_height(params: LcftParams, alpha: float, cosmo: Cosmology, height: float) -> float:
    """One-point function with the insertion at x + i*height."""
    if not height > 0.0:
        raise DomainError("u_at_height", height, "height must be > 0")
    return u_fzz(params, alpha, cosmo) / height ** (2.0 * delta_alpha(params, alpha))


def u_mu_zero(params: LcftParams, alpha: float, mu_b: float) -> float:
    op = "u_mu_zero"
    _check_extended(params, alpha, op)
    if not mu_b > 0.0:
        raise DomainError(op, mu_b, "mu_b must be > 0")
    g, q = params.gamma, params.q
    rho = params.rho(alpha)
    gm = _gamma(2.0 / g * (alpha - q), op, "(2/gamma)(alpha-Q)")
    log_abs = _log_length_constant(params, alpha) + rho * math.log(mu_b) + gm.log_abs
    return gm.sign * math.exp(log_abs)


def _log_r_bar(params: LcftParams) -> float:
    g2 = params.gamma ** 2
    m = 4.0 / g2
    one_minus = 1.0 - g2 / 4.0
    if one_minus <= 0.0:
        return math.inf
    log_val = (m - 1.0) * math.log(2.0 * math.pi) - math.log(one_minus)
    return log_val - m * _gamma(one_minus, "r_bar", "1-gamma^2/4").log_abs


def r_bar(params: LcftParams) -> float:
    """Boundary reflection coefficient of the two-pointed quantum disk."""
    return _exp_or_inf(_log_r_bar(params), "r_bar")


def mot_variance(params: LcftParams) -> float:
    return 2.0 / math.sin(params.theta)


def mot_variance_from_ratio(params: LcftParams) -> float:
    g = params.gamma
    s = math.sin(params.theta)
    # the ratio of the two constants is formed in log space; each alone overflows for small gamma
    ratio = math.exp(_log_r_bar(params) - _log_u0_bar(params, g))
    return ratio * 2.0 ** (g * g / 2.0 - 1.0) * math.pi * (params.q - g) ** 2 / ((4.0 / g ** 2 - 1.0) * s * s)


def area_law_alpha(params: LcftParams, alpha: float) -> AreaLaw:
    _check_extended(params, alpha, "area_law_alpha")
    return AreaLaw(
        shape=params.rho(alpha),
        scale=1.0 / (4.0 * math.sin(params.theta)),
        provenance=Provenance.ALPHA_INSERTION,
    )


def area_law_qd(params: LcftParams) -> AreaLaw:
    s = math.sin(params.theta)
    return AreaLaw(
        shape=4.0 / params.gamma ** 2,
        scale=1.0 / (2.0 * mot_variance(params) * s * s),
        provenance=Provenance.QUANTUM_DISK,
    )


def disk_length_shape(params: LcftParams, weight: Weight, ell: float, r: float) -> DensityShape:
    if not (ell > 0.0 and r > 0.0):
        raise DomainError("disk_length_shape", (ell, r), "lengths must be > 0")
    m = 4.0 / params.gamma ** 2
    if weight is Weight.HALF_GAMMA_SQ:
        value = (ell * r) ** (m - 1.0) / (ell ** m + r ** m) ** 2
    else:
        value = (ell + r) ** (-m - 1.0)
    return DensityShape(value, Normalization.UP_TO_CONSTANT)


def gmc_moment_h(params: LcftParams, alpha: float) -> float:
    """E[mu(H)^((Q-alpha)/gamma)] for the field with profile -2Q log|z|_+ + alpha G(z, i)."""
    op = "gmc_moment_h"
    _check_extended(params, alpha, op)
    g, q = params.gamma, params.q
    g1 = _gamma(g * alpha / 2.0 - g * g / 4.0, op, "gamma*alpha/2-gamma^2/4")
    g2 = _gamma(alpha / g - 2.0 / (g * g), op, "alpha/gamma-2/gamma^2")
    log_inner = (
        math.log(math.pi)
        - (g * alpha + 2.0) * math.log(2.0)
        + _gamma(g * g / 4.0, op, "gamma^2/4").log_abs
        - _gamma(1.0 - g * g / 4.0, op, "1-gamma^2/4").log_abs
    )
    log_abs = math.log(2.0 / math.sqrt(math.pi)) + (q - alpha) / g * log_inner + g1.log_abs + g2.log_abs
    return g1.sign * g2.sign * math.exp(log_abs) * math.cos(math.pi * (alpha - q) / g)


def selberg_rhs(params: LcftParams, n: int) -> float:
    """Closed form of the n-fold bulk integral over the upper half plane."""
    op = "selberg_rhs"
    g2 = params.gamma ** 2
    if int(n) != n or n < 1:
        raise DomainError(op, n, "n must be a positive integer")
    if not n < 2.0 / g2:
        raise DomainError(op, n, f"need n < 2/gamma^2 = {2.0 / g2:.6g}")
    n = int(n)
    log_inner = (
        math.log(math.pi)
        - (4.0 + g2 * (1.0 - 2.0 * n) / 2.0) * math.log(2.0)
        + _gamma(g2 / 4.0, op, "gamma^2/4").log_abs
        - _gamma(1.0 - g2 / 4.0, op, "1-gamma^2/4").log_abs
    )
    ga = _gamma(1.0 - g2 * n / 2.0, op, "1-gamma^2 n/2")
    gb = _gamma(0.5 - n, op, "1/2-n")
    sign = (-1) ** n * ga.sign * gb.sign
    value = sign * math.exp(math.log(2.0 / math.sqrt(math.pi)) + n * log_inner + ga.log_abs + gb.log_abs)
    if not value > 0.0:
        raise DomainError(op, n, f"closed form is not positive ({value:.6g}) at gamma={params.gamma:.6g}")
    return value


def laplace_area(params: LcftParams, alpha: float, ell: float, mu: float, normalized: bool = True) -> float:
    """Laplace transform of the area at boundary length ell, in Bessel-K form."""
    op = "laplace_area"
    _check_extended(params, alpha, op)
    if not ell > 0.0:
        raise DomainError(op, ell, "ell must be > 0")
    if not mu >= 0.0:
        raise DomainError(op, mu, "mu must be >= 0")
    rho = params.rho(alpha)
    if mu == 0.0:
        value = 1.0
    else:
        z = ell * math.sqrt(mu / math.sin(params.theta))
        log_val = math.log(2.0) - _gamma(rho, op, "rho").log_abs + rho * math.log(0.5 * z)
        value = math.exp(log_val + log_bessel_k(rho, z))
    if normalized:
        return value
    return value * length_mass(params, alpha, ell)


def truncation_coefficients(mu: float, mu_b: float, k: int) -> List[float]:
    """Coefficients of exp(-mu l^2 A - mu_B l) in powers of l up to order k."""
    if int(k) != k or k < 0:
        raise DomainError("truncation_coefficients", k, "k must be a non-negative integer")
    if k > 1:
        raise UnsupportedOrderError("truncation_coefficients", k)
    return [1.0] if k == 0 else [1.0, -float(mu_b)]
