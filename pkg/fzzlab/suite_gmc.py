#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
GMC suite - lattice Liouville fields with an alpha-insertion
Boundary presets test the length moment; bulk presets test the
conditional area law, the bulk moment and U end to end.
"""

import os
import sys

parent_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, parent_dir)

from src import gmc
from src.core import make_cosmology, make_params

STREAM_BOUNDARY = 11
STREAM_AREA = 12
STREAM_MOMENT = 13
STREAM_END_TO_END = 14
STREAM_DUMP = 15


def lattice_for(config):
    return gmc.LATTICE_PRESETS[config.preset_value("gmc", "lattice")]


def coarser(spec):
    """Half the cells along each axis, or None below the minimum lattice"""
    half = spec.n_cells // 2
    if half < 16 or half % 2:
        return None
    n_y = None if spec.n_y is None else max(4, spec.n_y // 2)
    return gmc.LatticeSpec(spec.kind, spec.extent, half, n_y)


def default_alphas(params):
    """Per estimator: moment exponents 1 (length, area), 0.3 (bulk), and an alpha inside (2/gamma, Q - gamma/4)"""
    g, q = params.gamma, params.q
    lo, hi = 2.0 / g, q - g / 4.0
    return {
        "length": q - g / 2.0,
        "area": q - g / 2.0,
        "bulk": q - 0.3 * g,
        "u": lo + 0.8 * (hi - lo),
    }


def run_suite(config):
    params = make_params(config.gamma)
    spec = lattice_for(config)
    n = config.samples("gmc")
    threads = config.threads
    alphas = default_alphas(params)
    if config.alpha is not None:
        alphas = {key: config.alpha for key in alphas}
    reports = []

    if spec.kind is gmc.LatticeKind.BOUNDARY_1D:
        reports.append(gmc.estimate_u0_bar(
            params, alphas["length"], spec, n, config.rng(STREAM_BOUNDARY), threads,
            coarse_spec=coarser(spec), rel_tol=config.tolerance("u0_bar"),
        ))
        return reports

    reports.append(gmc.estimate_conditional_area(
        params, alphas["area"], spec, n, config.rng(STREAM_AREA), threads,
        rel_tol=config.tolerance("conditional_area"),
    ))
    reports.append(gmc.estimate_bulk_moment(
        params, alphas["bulk"], spec, n, config.rng(STREAM_MOMENT), threads,
        rel_tol=config.tolerance("bulk_moment"),
    ))
    cosmo = make_cosmology(params, config.mu, config.mu_b)
    reports.append(gmc.estimate_u_end_to_end(
        params, alphas["u"], cosmo, spec, n, config.rng(STREAM_END_TO_END), threads,
        rel_tol=config.tolerance("u_end_to_end"),
    ))
    return reports


def dump_samples(config):
    """Per-draw observables (nu, mu, weight) of the selected lattice"""
    params = make_params(config.gamma)
    spec = lattice_for(config)
    n = config.samples("gmc")
    alpha = config.alpha if config.alpha is not None else default_alphas(params)["area"]
    handle = gmc.build_covariance(spec)
    draws = gmc.draw_observables(handle, params, alpha, n, config.rng(STREAM_DUMP), config.threads)
    header = ("stream_id", "draw_id", "nu", "mu", "weight")
    sidecar = {
        "requested": n,
        "lattice": spec.to_dict(),
        "chol_id": handle.chol_id,
        "jitter": handle.jitter,
        "alpha": alpha,
        "gamma": params.gamma,
        "weight": "nu^((2/gamma)(Q - alpha)), unnormalized",
        "tail_bound": gmc.tail_bound(params, alpha, spec).relative,
    }
    return header, draws.csv_rows(), sidecar
