"""
Probability laws with closed forms: the inverse gamma law and the exit and
duration laws of planar Brownian motion in a cone.

Evaluators accept scalars or numpy arrays. Samplers take an explicit
numpy Generator; see `stream` for how generators are keyed.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import DensityShape, Normalization
from .errors import DomainError
from .specfn import gamma_signed, log_kve, x_over_sin_closed

logger = logging.getLogger(__name__)

# below this value of scale * t the Laplace transform minus one is summed as a series
LAPLACE_SERIES_CUTOFF = 0.25
_SERIES_TERMS = 40


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream id)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


# ==================== INVERSE GAMMA ====================

@dataclass(frozen=True)
class InverseGammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (math.isfinite(self.shape) and self.shape > 0.0):
            raise DomainError("InverseGammaParams", self.shape, "shape must be finite and > 0")
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise DomainError("InverseGammaParams", self.scale, "scale must be finite and > 0")


def _positive(x, operation):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError(operation, x, "argument must be > 0")
    return arr


def inv_gamma_logpdf(p: InverseGammaParams, x):
    x = _positive(x, "inv_gamma_pdf")
    a, b = p.shape, p.scale
    out = a * math.log(b) - special.gammaln(a) - (a + 1.0) * np.log(x) - b / x
    return out if out.ndim else float(out)


def inv_gamma_pdf(p: InverseGammaParams, x):
    out = np.exp(inv_gamma_logpdf(p, x))
    return out if np.ndim(out) else float(out)


def inv_gamma_cdf(p: InverseGammaParams, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("inv_gamma_cdf", x, "argument must be >= 0")
    with np.errstate(divide="ignore"):
        z = np.where(x > 0.0, p.scale / np.where(x > 0.0, x, 1.0), np.inf)
    out = special.gammaincc(p.shape, z)
    return out if out.ndim else float(out)


def inv_gamma_sample(p: InverseGammaParams, rng: np.random.Generator, size=None):
    return p.scale / rng.standard_gamma(p.shape, size=size)


def inv_gamma_mean(p: InverseGammaParams) -> float:
    return p.scale / (p.shape - 1.0) if p.shape > 1.0 else math.inf


def inv_gamma_mode(p: InverseGammaParams) -> float:
    return p.scale / (p.shape + 1.0)


def inv_gamma_reciprocal_mean(p: InverseGammaParams) -> float:
    return p.shape / p.scale


def inv_gamma_laplace(p: InverseGammaParams, t):
    """E[exp(-t X)] = 2 (b t)^(a/2) K_a(2 sqrt(b t)) / Gamma(a)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise DomainError("inv_gamma_laplace", t, "t must be >= 0")
    a = p.shape
    w = p.scale * t
    with np.errstate(divide="ignore", invalid="ignore"):
        z = 2.0 * np.sqrt(w)
        log_val = (
            math.log(2.0) + 0.5 * a * np.log(w) + log_kve(a, z) - z - special.gammaln(a)
        )
        out = np.where(w > 0.0, np.exp(log_val), 1.0)
        out = np.where(np.isinf(w), 0.0, out)
    return out if out.ndim else float(out)


def _laplace_m1_series(a: float, w: np.ndarray) -> np.ndarray:
    # Gamma(1-a) [ sum_{k>=1} w^k/(k! Gamma(k+1-a)) - w^a sum_{k>=0} w^k/(k! Gamma(k+1+a)) ]
    g = gamma_signed(1.0 - a, operation="inv_gamma_laplace_m1").value
    s1 = np.zeros_like(w)
    s2 = np.zeros_like(w)
    wk = np.ones_like(w)
    for k in range(_SERIES_TERMS):
        if k >= 1:
            inv_g = 1.0 / gamma_signed(k + 1.0 - a, operation="inv_gamma_laplace_m1").value
            s1 += wk * inv_g / math.factorial(k)
        s2 += wk / (math.factorial(k) * math.gamma(k + 1.0 + a))
        wk = wk * w
    return g * (s1 - w ** a * s2)


def inv_gamma_laplace_m1(p: InverseGammaParams, t):
    """E[exp(-t X)] - 1 without cancellation at small t."""
    t = np.asarray(t, dtype=float)
    a = p.shape
    w = np.atleast_1d(p.scale * t)
    out = np.atleast_1d(np.asarray(inv_gamma_laplace(p, t), dtype=float) - 1.0).copy()
    if abs(a - round(a)) < 1e-6:
        # the series has Gamma poles at integer shape
        logger.debug("inv_gamma_laplace_m1: integer shape %.6g, direct evaluation", a)
    else:
        small = (w > 0.0) & (w < LAPLACE_SERIES_CUTOFF)
        if np.any(small):
            out[small] = _laplace_m1_series(a, w[small])
    out = out.reshape(t.shape)
    return out if out.ndim else float(out)


# ==================== CONE LAWS ====================

def cone_moment_integral(theta: float, p: float) -> float:
    """int_0^inf x^p (1 + x^(pi/theta))^(-2) dx = (theta/pi) f(pi - theta (p + 1)), f(x) = x/sin x."""
    if not 0.0 < theta < 2.0 * math.pi:
        raise DomainError("cone_moment_integral", theta, "need 0 < theta < 2*pi")
    if not -1.0 < p < 2.0 * math.pi / theta - 1.0:
        raise DomainError("cone_moment_integral", p, "need -1 < p < 2*pi/theta - 1")
    return theta / math.pi * x_over_sin_closed(abs(math.pi - theta * (p + 1.0)))


@dataclass(frozen=True)
class ConeExitKernel:
    """Law of the side-wall exit radius r, optionally reweighted by (r/u)^(-weight_exponent)."""
    theta: float
    u: float
    weight_exponent: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.theta < 2.0 * math.pi:
            raise DomainError("ConeExitKernel", self.theta, "need 0 < theta < 2*pi")
        if not self.u > 0.0:
            raise DomainError("ConeExitKernel", self.u, "need u > 0")
        if not 0.0 <= self.weight_exponent < math.pi / self.theta:
            raise DomainError(
                "ConeExitKernel", self.weight_exponent, "need 0 <= weight exponent < pi/theta"
            )

    @property
    def power(self) -> float:
        return math.pi / self.theta

    @property
    def beta_index(self) -> float:
        # int_0^X x^p (1+x^q)^-2 dx is a regularized incomplete beta with this first index
        return (self.power - self.weight_exponent) / self.power

    def pdf(self, r):
        r = _positive(r, "cone_exit_pdf")
        q = self.power
        x = r / self.u
        p = q - 1.0 - self.weight_exponent
        norm = cone_moment_integral(self.theta, p)
        out = x ** p / (1.0 + x ** q) ** 2 / (norm * self.u)
        return out if out.ndim else float(out)

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        y = (np.maximum(r, 0.0) / self.u) ** self.power
        s = self.beta_index
        with np.errstate(invalid="ignore"):
            z = np.where(np.isinf(y), 1.0, y / (1.0 + y))
        out = special.betainc(s, 2.0 - s, z)
        return out if out.ndim else float(out)


def cone_exit_pdf(theta: float, u: float, r):
    """Density of the exit radius on the ray arg = theta for a path started at u."""
    return ConeExitKernel(theta, u).pdf(r)


def cone_exit_cdf(theta: float, u: float, r):
    return ConeExitKernel(theta, u).cdf(r)


def cone_exit_sample(theta: float, u: float, rng: np.random.Generator, size=None):
    v = rng.random(size)
    return cone_exit_quantile(theta, u, v)


def cone_exit_quantile(theta: float, u: float, v):
    v = np.asarray(v, dtype=float)
    out = u * (v / (1.0 - v)) ** (theta / math.pi)
    return out if out.ndim else float(out)


def cone_duration_invgamma(phi: float, r: float) -> InverseGammaParams:
    """Duration law of a cone path from radius r to the vertex."""
    if not 0.0 < phi < 2.0 * math.pi:
        raise DomainError("cone_duration_invgamma", phi, "need 0 < phi < 2*pi")
    if not r > 0.0:
        raise DomainError("cone_duration_invgamma", r, "need r > 0")
    return InverseGammaParams(shape=math.pi / phi, scale=0.5 * r * r)


def cone_duration_density_shape(phi: float, w: complex, t: float) -> DensityShape:
    arg = cmath.phase(w)
    if not 0.0 < arg < phi:
        raise DomainError("cone_duration_density_shape", w, "arg w must lie in (0, phi)")
    if not t > 0.0:
        raise DomainError("cone_duration_density_shape", t, "need t > 0")
    k = math.pi / phi
    rw = abs(w)
    value = t ** (-1.0 - k) * rw ** k * math.exp(-rw * rw / (2.0 * t)) * math.sin(k * arg)
    return DensityShape(value, Normalization.UP_TO_CONSTANT)


def moment_ratio(theta: float, phi: float, eps: float) -> float:
    """E[(L/u)^eps] under the exit law weighted by (L/u)^(-pi/phi)."""
    if not 0.0 < theta < phi < 2.0 * math.pi:
        raise DomainError("moment_ratio", (theta, phi), "need 0 < theta < phi < 2*pi")
    if not 0.0 < eps < math.pi / phi:
        raise DomainError("moment_ratio", eps, "need 0 < eps < pi/phi")
    base = math.pi * theta / phi
    value = x_over_sin_closed(base - theta * eps) / x_over_sin_closed(base)
    if not value < 1.0:
        raise DomainError("moment_ratio", eps, f"ratio {value:.17g} is not below 1; eps is too close to 0")
    return value
