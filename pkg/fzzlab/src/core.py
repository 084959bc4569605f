"""
Parameter types shared by every module: the coupling, insertions,
cosmological constants and cone geometries.

All types are frozen; constructing one validates it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError

# |x - 1| below this is treated as the branch point of the cosine factor
DEGENERATE_TOL = 1e-12


class Window(Enum):
    SEIBERG_BULK = "seiberg-bulk"   # alpha in (2/gamma, Q)
    EXTENDED = "extended"           # alpha in (gamma/2, Q)
    UNRESTRICTED = "unrestricted"


class Branch(Enum):
    REAL_S = "real-s"
    IMAGINARY_S = "imaginary-s"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class LcftParams:
    gamma: float
    q: float
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and 0.0 < self.gamma < 2.0):
            raise DomainError("LcftParams", self.gamma, "gamma must lie in (0, 2)")
        q = self.gamma / 2.0 + 2.0 / self.gamma
        if not math.isclose(self.q, q, rel_tol=1e-12):
            raise DomainError("LcftParams", self.q, f"q must equal gamma/2 + 2/gamma = {q!r}")
        if not math.isclose(self.kappa, self.gamma ** 2, rel_tol=1e-12):
            raise DomainError("LcftParams", self.kappa, "kappa must equal gamma^2")

    @property
    def theta(self) -> float:
        """Inner cone angle pi*gamma^2/4."""
        return math.pi * self.gamma ** 2 / 4.0

    def rho(self, alpha: float) -> float:
        """Shape exponent (2/gamma)(Q - alpha) of the insertion."""
        return 2.0 / self.gamma * (self.q - alpha)


@dataclass(frozen=True)
class InsertionSpec:
    alpha: float
    delta_alpha: float
    window: Window


@dataclass(frozen=True)
class Cosmology:
    mu: float
    mu_b: float
    branch: Branch
    gamma: float

    def __post_init__(self):
        if not (self.mu >= 0.0 and math.isfinite(self.mu)):
            raise DomainError("Cosmology", self.mu, "mu must be finite and >= 0")
        if not (self.mu_b > 0.0 and math.isfinite(self.mu_b)):
            raise DomainError("Cosmology", self.mu_b, "mu_b must be finite and > 0")
        if not 0.0 < self.gamma < 2.0:
            raise DomainError("Cosmology", self.gamma, "gamma must lie in (0, 2)")
        expected = branch_of(self.x)
        if self.branch is not expected:
            raise DomainError(
                "Cosmology", self.branch.value, f"x = {self.x:.12g} puts (mu, mu_b) on the {expected.value} branch"
            )

    @property
    def x(self) -> float:
        return _x_value(self.gamma, self.mu, self.mu_b)


@dataclass(frozen=True)
class ConeGeometry:
    theta: float
    phi: float
    u: float

    def __post_init__(self):
        if not (0.0 < self.theta < self.phi < 2.0 * math.pi):
            raise DomainError(
                "ConeGeometry", (self.theta, self.phi), "need 0 < theta < phi < 2*pi"
            )
        if not self.u > 0.0:
            raise DomainError("ConeGeometry", self.u, "start abscissa u must be > 0")


def make_params(gamma: float) -> LcftParams:
    if not (isinstance(gamma, (int, float)) and math.isfinite(gamma) and 0.0 < gamma < 2.0):
        raise DomainError("make_params", gamma, "gamma must lie in (0, 2)")
    gamma = float(gamma)
    return LcftParams(gamma=gamma, q=gamma / 2.0 + 2.0 / gamma, kappa=gamma * gamma)


def insertion_spec(params: LcftParams, alpha: float) -> InsertionSpec:
    """Scaling dimension of an alpha-insertion and the narrowest window holding it."""
    g, q = params.gamma, params.q
    delta = alpha / 2.0 * (q - alpha / 2.0)
    if 2.0 / g < alpha < q:
        window = Window.SEIBERG_BULK
    elif g / 2.0 < alpha < q:
        window = Window.EXTENDED
    else:
        window = Window.UNRESTRICTED
    return InsertionSpec(alpha=float(alpha), delta_alpha=delta, window=window)


def _x_value(gamma: float, mu: float, mu_b: float) -> float:
    if mu == 0.0:
        return math.inf
    return mu_b / math.sqrt(mu) * math.sqrt(math.sin(math.pi * gamma ** 2 / 4.0))


def x_parameter(params: LcftParams, mu: float, mu_b: float) -> float:
    """x = (mu_B / sqrt(mu)) * sqrt(sin(pi*gamma^2/4)); +inf when mu == 0."""
    return _x_value(params.gamma, mu, mu_b)


def branch_of(x: float) -> Branch:
    if abs(x - 1.0) <= DEGENERATE_TOL:
        return Branch.DEGENERATE
    if x < 1.0:
        return Branch.REAL_S
    return Branch.IMAGINARY_S


def make_cosmology(params: LcftParams, mu: float, mu_b: float) -> Cosmology:
    if not (mu >= 0.0 and math.isfinite(mu)):
        raise DomainError("make_cosmology", mu, "mu must be finite and >= 0")
    if not (mu_b > 0.0 and math.isfinite(mu_b)):
        raise DomainError("make_cosmology", mu_b, "mu_b must be finite and > 0")
    branch = branch_of(x_parameter(params, mu, mu_b))
    return Cosmology(mu=float(mu), mu_b=float(mu_b), branch=branch, gamma=params.gamma)


def cone_geometry(params: LcftParams, alpha: float) -> ConeGeometry:
    g, q = params.gamma, params.q
    if not alpha > g / 2.0:
        raise DomainError("cone_geometry", alpha, f"alpha must exceed gamma/2 = {g / 2.0:.6g}")
    if not alpha < q - g / 4.0:
        raise DomainError(
            "cone_geometry", alpha, f"alpha must be below Q - gamma/4 = {q - g / 4.0:.6g} (phi < 2*pi)"
        )
    theta = params.theta
    phi = g * math.pi / (2.0 * (q - alpha))
    u = 1.0 / math.sqrt(2.0 * math.sin(theta))
    return ConeGeometry(theta=theta, phi=phi, u=u)


def cosine_argument(x: float, nu: float) -> float:
    """cos(nu*arccos x) for x <= 1, cosh(nu*arccosh x) for x > 1."""
    if abs(x - 1.0) <= DEGENERATE_TOL:
        # both branches agree with 1 + nu^2 (x - 1) to first order
        return 1.0 + nu * nu * (x - 1.0)
    if x < 1.0:
        return math.cos(nu * math.acos(x))
    return math.cosh(nu * math.acosh(x))


def s_cosine_factor(params: LcftParams, alpha: float, cosmo: Cosmology) -> float:
    if cosmo.mu == 0.0:
        raise DomainError(
            "s_cosine_factor", cosmo.mu, "factor undefined at mu = 0; use u_mu_zero instead"
        )
    x = x_parameter(params, cosmo.mu, cosmo.mu_b)
    nu = 2.0 * (alpha - params.q) / params.gamma
    return cosine_argument(x, nu)


class Normalization(Enum):
    EXACT_PDF = "exact-pdf"
    UP_TO_CONSTANT = "up-to-constant"


@dataclass(frozen=True)
class DensityShape:
    """A density value; UP_TO_CONSTANT values are only comparable as ratios."""
    value: float
    normalization: Normalization
