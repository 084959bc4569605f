#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Identity suite - deterministic replays of the FZZ derivation chain
Every check is quadrature or algebra against a closed form; no sampling.
With --gamma-grid the gamma-dependent checks run once per grid value.
"""

import math
import os
import sys

parent_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, parent_dir)

from src.core import make_cosmology, make_params
from src import verify

# x = (mu_B / sqrt(mu)) sqrt(sin(pi gamma^2/4)) on each side of the branch point, and at it
BRANCH_X = (0.5, 1.0, 2.0)


def cosmology_at(params, mu, x):
    mu_b = x * math.sqrt(mu) / math.sqrt(math.sin(params.theta))
    return make_cosmology(params, mu, mu_b)


def gamma_values(config):
    return tuple(config.gamma_grid) or (config.gamma,)


def one_point_checks(params, config):
    """Laplace, consistency, series, truncation and mu = 0 checks at one gamma."""
    g, q = params.gamma, params.q
    tol_1d = config.tolerance("quadrature_1d")
    tol_laplace = config.tolerance("laplace")
    reports = []

    alphas = [config.alpha] if config.alpha is not None else verify.consistency_alphas(params)
    for alpha in alphas:
        reports.append(verify.check_laplace_bessel(params, alpha, 1.0, config.mu, tol_laplace))
        for x in BRANCH_X:
            cosmo = cosmology_at(params, config.mu, x)
            reports.append(verify.check_u_consistency(params, alpha, cosmo, tol_1d))
            if x < 1.0:
                reports.append(verify.check_series_route(params, alpha, cosmo, tol_laplace))

    for alpha in verify.truncation_alphas(params):
        for x in (BRANCH_X[0], BRANCH_X[-1]):
            cosmo = cosmology_at(params, config.mu, x)
            reports.append(verify.check_truncated_u(params, alpha, cosmo, 1, tol_1d))
    reports.append(verify.check_mu_zero_limit(params, q - g / 4.0, config.mu_b, tol_laplace))

    for p in (0.5, math.pi / params.theta - 1.5):
        reports.append(verify.check_cone_moment_identity(params.theta, p, tol_laplace))
    if g < math.sqrt(2.0):
        reports.append(verify.check_gmc_selberg_first_moment(params, config.tolerance("algebraic")))
    return reports


def run_suite(config):
    tol_1d = config.tolerance("quadrature_1d")
    tol_alg = config.tolerance("algebraic")
    reports = []

    # ========== special functions ==========
    for a, x in verify.special1_points():
        reports.append(verify.check_special1(a, x, tol_1d))
    for a, b, c, lam in verify.special2_points():
        reports.append(verify.check_special2(a, b, c, lam, tol_1d))

    # ========== one-point function, per gamma ==========
    for gamma in gamma_values(config):
        reports.extend(one_point_checks(make_params(gamma), config))

    # ========== gamma-independent identities ==========
    reports.append(verify.check_variance_identity(tolerance=tol_alg))
    reports.append(verify.check_area_law_consistency(tolerance=tol_alg))

    # 2D Selberg quadrature at the primary gamma only
    params = make_params(config.gamma)
    if params.gamma < math.sqrt(2.0):
        reports.append(verify.check_selberg_n1(params, config.tolerance("quadrature_2d")))

    return reports
