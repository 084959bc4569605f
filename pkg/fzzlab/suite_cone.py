#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Cone suite - Brownian motion in cones and the inverse gamma fixed point
Tests: exit kernel, small moments of the weighted split, the recursion,
independence of the second leg, start-offset bias and the shear map.
"""

import math
import os
import sys

parent_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, parent_dir)

from src import conesim
from src.closed import mot_variance
from src.core import cone_geometry, make_params

# stream ids, one per independent sample set
STREAM_KERNEL = 1
STREAM_SPLITS = 2
STREAM_RECURSION = 3
STREAM_INDEPENDENCE = 4
STREAM_OFFSET = 5
STREAM_SHEAR = 6


def default_alpha(params):
    """The insertion with phi = pi"""
    return params.q - params.gamma / 2.0


def setup(config):
    params = make_params(config.gamma)
    alpha = config.alpha if config.alpha is not None else default_alpha(params)
    geom = cone_geometry(params, alpha)
    cfg = conesim.PathConfig.relative(
        geom.u,
        rel_dt=config.preset_value("cone", "rel_dt"),
        eps=config.preset_value("cone", "eps"),
    )
    return params, geom, cfg


def run_suite(config):
    params, geom, cfg = setup(config)
    n = config.samples("cone")
    depth = int(config.preset_value("cone", "depth"))
    ks_alpha = config.tolerance("ks_alpha")
    threads = config.threads
    reports = []

    plain = conesim.weighted_split_sampler(
        geom, n, cfg, config.rng(STREAM_KERNEL), threads=threads, weighted=False
    )
    reports.append(conesim.exit_kernel_check(geom, plain, cfg, ks_alpha))

    splits = conesim.weighted_split_sampler(geom, n, cfg, config.rng(STREAM_SPLITS), threads=threads)
    reports.append(conesim.moment_ratio_check(geom, splits, cfg, eps=0.5 * math.pi / geom.phi))

    result = conesim.recursion_fixed_point(geom, depth, n, cfg, config.rng(STREAM_RECURSION), splits=splits)
    reports.extend(conesim.recursion_checks(geom, result, cfg, ks_alpha))

    reports.extend(conesim.independence_check(
        geom, n, cfg, config.rng(STREAM_INDEPENDENCE), splits=splits, alpha=ks_alpha
    ))

    reports.append(conesim.start_offset_check(geom, cfg, n, config.rng(STREAM_OFFSET)))
    reports.extend(conesim.shear_covariance_check(
        geom.theta, mot_variance(params), n, config.rng(STREAM_SHEAR)
    ))
    return reports


def dump_samples(config):
    """Weighted ray-exit splits: header, row iterator and sidecar metadata"""
    _, geom, cfg = setup(config)
    n = config.samples("cone")
    splits = conesim.weighted_split_sampler(geom, n, cfg, config.rng(STREAM_SPLITS), threads=config.threads)
    header = ("stream_id", "path_id", "A", "L", "weight", "exit_side")
    sidecar = {
        "requested": n,
        "trials": splits.n_trials,
        "not_kept": splits.n_rejected,
        "ess": splits.ess,
        "theta": geom.theta,
        "phi": geom.phi,
        "u": geom.u,
        "dt": cfg.dt,
        "start_offset_eps": cfg.start_offset_eps,
        "weight": "(L/u)^(-pi/phi), largest weight scaled to 1",
        "rows_note": "only ray exits are written; real-axis exits and ray exits past the quota are not_kept",
    }
    return header, splits.csv_rows(), sidecar
