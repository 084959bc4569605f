"""
Special functions used by the closed forms.

Gamma values are carried as (log|value|, sign) pairs so that products of
Gamma factors at negative arguments never overflow or lose their sign.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import DomainError, PoleError
from .quadrature import quad_semiinfinite

logger = logging.getLogger(__name__)

MAX_SERIES_TERMS = 4000
SERIES_REL_TOL = 1e-14
# above this argument log K_nu is taken from its large-argument expansion
KVE_ASYMPTOTIC = 1e6


@dataclass(frozen=True)
class SignedLogGamma:
    log_abs: float
    sign: int

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_abs)

    def __mul__(self, other: "SignedLogGamma") -> "SignedLogGamma":
        return SignedLogGamma(self.log_abs + other.log_abs, self.sign * other.sign)

    def __truediv__(self, other: "SignedLogGamma") -> "SignedLogGamma":
        return SignedLogGamma(self.log_abs - other.log_abs, self.sign * other.sign)


@dataclass(frozen=True)
class SeriesResult:
    value: float
    tail_bound: float
    terms_used: int
    last_term: float

    def __float__(self):
        return self.value


def gamma_signed(
    x: float, pole_tol: float = 1e-10, operation: str = "gamma_signed", label: Optional[str] = None
) -> SignedLogGamma:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(operation, x, "argument must be finite")
    nearest = round(x)
    if x <= 0.5 and nearest <= 0 and abs(x - nearest) <= pole_tol:
        raise PoleError(operation, x, int(nearest), label)
    if x > 0.0:
        return SignedLogGamma(float(special.gammaln(x)), 1)
    # reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
    s = math.sin(math.pi * x)
    log_abs = math.log(math.pi) - math.log(abs(s)) - float(special.gammaln(1.0 - x))
    return SignedLogGamma(log_abs, 1 if s > 0 else -1)


def log_kve(nu: float, x):
    """
    log(K_nu(x) e^x) for x > 0, elementwise.

    scipy's kve returns nan for non-integer order at very large x; past
    KVE_ASYMPTOTIC the Hankel expansion is used, whose third term is below
    double precision there.
    """
    x = np.asarray(x, dtype=float)
    nu = abs(float(nu))
    large = x > KVE_ASYMPTOTIC
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log(special.kve(nu, np.where(large, 1.0, x)))
        m = 4.0 * nu * nu
        inv = 1.0 / (8.0 * np.where(large, x, KVE_ASYMPTOTIC))
        corr = (m - 1.0) * inv * (1.0 + 0.5 * (m - 9.0) * inv)
        asym = 0.5 * np.log(0.5 * math.pi / np.where(large, x, 1.0)) + np.log1p(corr)
    out = np.where(large, asym, direct)
    return out if out.ndim else float(out)


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x), nu >= 0, x > 0."""
    if not nu >= 0.0:
        raise DomainError("bessel_k", nu, "order nu must be >= 0")
    if not x > 0.0:
        raise DomainError("bessel_k", x, "argument must be > 0")
    if x > KVE_ASYMPTOTIC:
        return 0.0
    return float(special.kve(nu, x)) * math.exp(-x)


def log_bessel_k(nu: float, x: float) -> float:
    """log K_nu(x), finite where K_nu itself over- or underflows."""
    if not x > 0.0:
        raise DomainError("log_bessel_k", x, "argument must be > 0")
    return log_kve(nu, x) - x


def bessel_k_integral(nu: float, x: float) -> float:
    """K_nu(x) = (1/2)(x/2)^nu int_0^inf exp(-s - x^2/(4s)) s^(-nu-1) ds, by exp-sinh quadrature."""
    if not x > 0.0:
        raise DomainError("bessel_k_integral", x, "argument must be > 0")
    z2 = 0.25 * x * x
    res = quad_semiinfinite(lambda s: np.exp(-s - z2 / s), -nu - 1.0, rel_tol=1e-13)
    return 0.5 * (0.5 * x) ** nu * res.value


def _is_integer(a: float, tol: float = 1e-10) -> bool:
    return abs(a - round(a)) <= tol


def chebyshev_exact(a: float, x: float) -> float:
    return math.cos(a * math.acos(x))


def chebyshev_series(a: float, x: float, n_terms: Optional[int] = None) -> SeriesResult:
    """
    Partial sum (a/2) sin(pi a) sum_n (-2)^(n-1) / (pi n!) Gamma((n+a)/2) Gamma((n-a)/2) x^n.

    With n_terms=None the sum stops once the last term and the geometric tail
    estimate are both below 1e-14 of the partial sum.
    """
    if not abs(x) < 1.0:
        raise DomainError("chebyshev_generalized", x, "|x| must be < 1")
    if _is_integer(a):
        raise DomainError("chebyshev_generalized", a, "a must not be an integer (Gamma poles)")
    pref = 0.5 * a * math.sin(math.pi * a)
    limit = MAX_SERIES_TERMS if n_terms is None else int(n_terms)
    log_x = math.log(abs(x)) if x != 0.0 else -math.inf
    sign_x = -1 if x < 0 else 1
    total = 0.0
    term = 0.0
    prev_abs = math.inf
    tail = math.inf
    n = 0
    for n in range(limit):
        if n > 0 and x == 0.0:
            term = 0.0
            tail = 0.0
            break
        g1 = gamma_signed((n + a) / 2.0, operation="chebyshev_generalized")
        g2 = gamma_signed((n - a) / 2.0, operation="chebyshev_generalized")
        log_abs = (n - 1) * math.log(2.0) - math.log(math.pi) - special.gammaln(n + 1.0)
        log_abs += g1.log_abs + g2.log_abs + (n * log_x if n else 0.0)
        sign = (-1) ** (n - 1) * g1.sign * g2.sign * sign_x ** n
        term = pref * sign * math.exp(log_abs)
        total += term
        ratio = abs(term) / prev_abs if prev_abs > 0 and math.isfinite(prev_abs) else abs(x)
        r = min(max(ratio, abs(x)), 0.999999)
        tail = abs(term) * r / (1.0 - r)
        prev_abs = abs(term)
        if n_terms is None and n >= 2 and abs(term) < SERIES_REL_TOL * abs(total) \
                and tail < SERIES_REL_TOL * abs(total):
            break
    return SeriesResult(total, tail, n + 1, term)


def chebyshev_generalized(a: float, x: float, n_terms: Optional[int] = None) -> float:
    return chebyshev_series(a, x, n_terms).value


def double_integral_series(
    a: float, b: float, c: float, lam: float, n_terms: Optional[int] = None
) -> SeriesResult:
    """
    (1/2) sum_n ((-lam)^n / n!) a^(-n+2c-b+1) Gamma(n/2 + b/2 - c - 1/2) Gamma(n/2 + b/2 + 1/2),
    the expansion of int_0^inf int_0^inf y^b e^(-lam y) t^c exp(-y^2 t - a^2/t) dy dt.
    """
    op = "double_integral_series"
    if not a > 0.0:
        raise DomainError(op, a, "need a > 0")
    if not b > -1.0:
        raise DomainError(op, b, "need b > -1")
    if not c < b / 2.0 - 0.5:
        raise DomainError(op, c, "need c < b/2 - 1/2")
    if not 0.0 < lam < 2.0 * a:
        raise DomainError(op, lam, "need 0 < lambda < 2a")
    limit = MAX_SERIES_TERMS if n_terms is None else int(n_terms)
    log_a = math.log(a)
    log_lam = math.log(lam)
    total = 0.0
    term = 0.0
    tail = math.inf
    prev_abs = math.inf
    asymptotic_ratio = lam / (2.0 * a)
    n = 0
    for n in range(limit):
        log_abs = (
            n * log_lam
            - special.gammaln(n + 1.0)
            + (-n + 2.0 * c - b + 1.0) * log_a
            + special.gammaln(n / 2.0 + b / 2.0 - c - 0.5)
            + special.gammaln(n / 2.0 + b / 2.0 + 0.5)
        )
        term = 0.5 * (-1) ** n * math.exp(log_abs)
        total += term
        ratio = abs(term) / prev_abs if math.isfinite(prev_abs) else asymptotic_ratio
        r = min(max(ratio, asymptotic_ratio), 0.999999)
        tail = abs(term) * r / (1.0 - r)
        prev_abs = abs(term)
        if n_terms is None and n >= 2 and abs(term) < SERIES_REL_TOL * abs(total) \
                and tail < SERIES_REL_TOL * abs(total):
            break
    logger.debug("double_integral_series: %d terms, tail %.3g", n + 1, tail)
    return SeriesResult(total, tail, n + 1, term)


def x_over_sin(x: float) -> float:
    if not 0.0 < x < math.pi:
        raise DomainError("x_over_sin", x, "x must lie in (0, pi)")
    if x < 1e-6:
        x2 = x * x
        return 1.0 + x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    return x / math.sin(x)


def x_over_sin_closed(x: float) -> float:
    """x/sin x on [0, pi) with the removable point x = 0 filled in."""
    if x == 0.0:
        return 1.0
    return x_over_sin(x)
