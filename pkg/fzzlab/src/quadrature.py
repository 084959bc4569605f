"""
Double-exponential quadrature on (0, inf).

The exp-sinh map x = exp((pi/2) sinh t) turns algebraic endpoint behaviour
at 0 and exponential decay at infinity into double-exponential decay in t,
so the trapezoidal rule in t converges geometrically. Each level halves the
step and reuses every node of the previous level; the difference between
consecutive levels is the error estimate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import QuadratureError

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * math.pi
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int
    level: int = 0

    def __float__(self):
        return self.value


def _log_x_limit(power: float) -> float:
    """Largest |log x| such that x**power stays inside the float range."""
    return min(690.0, 700.0 / max(abs(power), 1e-12))


def quad_semiinfinite(
    f: Callable[[np.ndarray], np.ndarray],
    singular_exponent_at_zero: float = 0.0,
    rel_tol: float = 1e-12,
    abs_tol: float = 0.0,
    max_level: int = 10,
    min_level: int = 3,
    h0: float = 0.5,
) -> QuadratureResult:
    """
    Integrate x**p * f(x) over (0, inf) where p = singular_exponent_at_zero.

    f is called with a 1-D array of abscissae and must return an array of the
    same shape. The power is applied in log space together with the Jacobian,
    so x**p may overflow on its own as long as x**p * f(x) does not.
    """
    p = float(singular_exponent_at_zero)
    log_xmax = _log_x_limit(p + 1.0)
    t_max = math.asinh(log_xmax / HALF_PI)

    def g(t):
        s = HALF_PI * np.sinh(t)
        x = np.exp(s)
        with np.errstate(over="ignore", under="ignore"):
            jac = HALF_PI * np.cosh(t) * np.exp((p + 1.0) * s)
            vals = np.asarray(f(x), dtype=float) * jac
        return vals

    k = int(math.floor(t_max / h0))
    t = h0 * np.arange(-k, k + 1, dtype=float)
    vals = g(t)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("non-finite integrand on the initial grid", {"p": p, "level": 0})
    total = float(np.sum(vals))
    total_abs = float(np.sum(np.abs(vals)))
    evaluations = t.size
    h = h0
    prev = h * total
    err = math.inf

    for level in range(1, max_level + 1):
        h *= 0.5
        j = int(math.floor((t_max / h - 1.0) / 2.0))
        t = h * (2.0 * np.arange(-j - 1, j + 1, dtype=float) + 1.0)
        vals = g(t)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError(
                "non-finite integrand during refinement", {"p": p, "level": level}
            )
        total += float(np.sum(vals))
        total_abs += float(np.sum(np.abs(vals)))
        evaluations += t.size
        est = h * total
        err = abs(est - prev)
        noise = 64.0 * _EPS * h * total_abs
        logger.debug("exp-sinh level %d: value=%.16g err=%.3g", level, est, err)
        if level >= min_level and err <= max(abs_tol, rel_tol * abs(est), noise):
            return QuadratureResult(est, err, evaluations, level)
        prev = est

    raise QuadratureError(
        f"no convergence after {max_level} levels",
        {"p": p, "value": prev, "error_estimate": err, "evaluations": evaluations},
    )


def exp_sinh_rule(power: float = 0.0, h: float = 1.0 / 64.0):
    """
    Fixed exp-sinh nodes and weights for int_0^inf x**power * g(x) dx.

    Returns (x, w) so that the integral is approximately sum(w * g(x)); the
    power and the Jacobian are folded into w.
    """
    log_xmax = _log_x_limit(power + 1.0)
    t_max = math.asinh(log_xmax / HALF_PI)
    k = int(math.floor(t_max / h))
    t = h * np.arange(-k, k + 1, dtype=float)
    s = HALF_PI * np.sinh(t)
    with np.errstate(under="ignore"):
        w = h * HALF_PI * np.cosh(t) * np.exp((power + 1.0) * s)
    return np.exp(s), w
