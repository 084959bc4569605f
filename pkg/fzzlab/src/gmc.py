"""
Lattice Gaussian multiplicative chaos on the upper half plane.

The free-boundary GFF is discretized by its cell averages: boundary
segments of the real axis (Boundary1D) or rectangles of [-R, R] x (0, R]
together with the boundary segments below them (Bulk2D), in one Gaussian
vector. The covariance is the cell average of

    G(z, w) = -log|z - w| - log|z - conj(w)| + 2 log|z|_+ + 2 log|w|_+.

Nearby pairs of cells are averaged exactly through closed-form
antiderivatives of log|z|^2; the rest use tensor Gauss nodes. The zero mode
of the field is never sampled; estimators integrate it out analytically.
"""

from __future__ import annotations

import functools
import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg, special
from scipy.spatial import cKDTree

from . import closed
from .core import Cosmology, LcftParams, x_parameter
from .dist import inv_gamma_cdf
from .errors import DomainError, FactorizationError
from .quadrature import exp_sinh_rule
from .report import VerificationReport, statistical_report
from .verify import effective_sample_size, ks_test, weighted_mean

logger = logging.getLogger(__name__)

# a pair of cells closer than NEAR_FACTOR diameters is averaged exactly
NEAR_FACTOR = 3.0
FAR_NODES_1D = 4
FAR_NODES_2D = 2
PROFILE_NODES = 8
MAX_JITTER = 1e-4
CHUNK_ELEMENTS = 1 << 22
LATTICE_NOTE = "lattice tolerances are engineering choices; no convergence rate is known with an insertion"


class LatticeKind(Enum):
    BOUNDARY_1D = "boundary-1d"
    BULK_2D = "bulk-2d"


@dataclass(frozen=True)
class LatticeSpec:
    """
    kind, truncation radius R and n_cells, the number of cells along the
    real axis; Bulk2D lattices also carry n_y rows (default n_cells).
    """
    kind: LatticeKind
    extent: float
    n_cells: int
    n_y: Optional[int] = None

    def __post_init__(self):
        if self.n_cells < 16 or self.n_cells % 2:
            raise DomainError("LatticeSpec", self.n_cells, "n_cells must be even and >= 16")
        if not self.extent > 2.0:
            raise DomainError("LatticeSpec", self.extent, "extent must be > 2")
        if self.n_y is not None and self.n_y < 4:
            raise DomainError("LatticeSpec", self.n_y, "n_y must be >= 4")

    @property
    def rows(self) -> int:
        return self.n_y if self.n_y is not None else self.n_cells

    @property
    def size(self) -> int:
        if self.kind is LatticeKind.BOUNDARY_1D:
            return self.n_cells
        return self.n_cells + self.n_cells * self.rows

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind.value, "extent": self.extent, "n_cells": self.n_cells, "n_y": self.rows}


LATTICE_PRESETS: Dict[str, LatticeSpec] = {
    "boundary-small": LatticeSpec(LatticeKind.BOUNDARY_1D, 20.0, 512),
    "boundary-reference": LatticeSpec(LatticeKind.BOUNDARY_1D, 40.0, 4096),
    "bulk-small": LatticeSpec(LatticeKind.BULK_2D, 4.0, 24),
    "bulk-reference": LatticeSpec(LatticeKind.BULK_2D, 8.0, 96),
}


# ==================== GEOMETRY ====================

def _unit_edges(n: int) -> np.ndarray:
    # [0, 1], cells shrinking toward both ends
    t = np.linspace(0.0, 1.0, n + 1)
    return 0.5 * t + 0.25 * (1.0 - np.cos(np.pi * t))


def _half_line_edges(extent: float, n: int) -> np.ndarray:
    """Edges of [0, extent]: n/2 cells on [0, 1], the rest geometric from 1."""
    n_in = max(2, n // 2)
    n_out = n - n_in
    if n_out < 1:
        raise DomainError("lattice", n, "too few cells to reach past |z| = 1")
    outer = extent ** (np.arange(1, n_out + 1) / n_out)
    return np.concatenate([_unit_edges(n_in), outer])


def _axis_edges(extent: float, n: int) -> np.ndarray:
    half = _half_line_edges(extent, n // 2)
    return np.concatenate([-half[::-1], half[1:]])


@dataclass(frozen=True)
class LatticeCells:
    """Cells as rectangles; boundary segments have y0 == y1 == 0 and come first."""
    x0: np.ndarray
    x1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    n_boundary: int

    @property
    def size(self) -> int:
        return int(self.x0.size)

    @property
    def is_segment(self) -> np.ndarray:
        return np.arange(self.size) < self.n_boundary

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.x0 + self.x1) + 0.5j * (self.y0 + self.y1)

    @property
    def diameters(self) -> np.ndarray:
        return np.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def measure(self) -> np.ndarray:
        """Length of a segment, area of a rectangle."""
        width = self.x1 - self.x0
        return np.where(self.is_segment, width, width * (self.y1 - self.y0))


def lattice_cells(spec: LatticeSpec) -> LatticeCells:
    xe = _axis_edges(spec.extent, spec.n_cells)
    seg_x0, seg_x1 = xe[:-1], xe[1:]
    zeros = np.zeros(spec.n_cells)
    if spec.kind is LatticeKind.BOUNDARY_1D:
        return LatticeCells(seg_x0, seg_x1, zeros, zeros, spec.n_cells)
    ye = _half_line_edges(spec.extent, spec.rows)
    gx0, gy0 = np.meshgrid(seg_x0, ye[:-1], indexing="xy")
    gx1, gy1 = np.meshgrid(seg_x1, ye[1:], indexing="xy")
    return LatticeCells(
        np.concatenate([seg_x0, gx0.ravel()]),
        np.concatenate([seg_x1, gx1.ravel()]),
        np.concatenate([zeros, gy0.ravel()]),
        np.concatenate([zeros, gy1.ravel()]),
        spec.n_cells,
    )


def _gauss_nodes(cells: LatticeCells, idx: np.ndarray, n1d: int, n2d: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes (complex) and normalized weights per cell; segments get n1d, rectangles n2d^2."""
    q = max(n1d, n2d * n2d)
    nodes = np.zeros((idx.size, q), dtype=complex)
    weights = np.zeros((idx.size, q))
    seg = idx < cells.n_boundary
    if np.any(seg):
        t, w = leggauss(n1d)
        i = idx[seg]
        mid = 0.5 * (cells.x0[i] + cells.x1[i])
        half = 0.5 * (cells.x1[i] - cells.x0[i])
        nodes[seg, :n1d] = mid[:, None] + half[:, None] * t[None, :]
        weights[seg, :n1d] = 0.5 * w[None, :]
    if np.any(~seg):
        t, w = leggauss(n2d)
        tx, ty = np.meshgrid(t, t, indexing="ij")
        wxy = np.outer(w, w).ravel() / 4.0
        i = idx[~seg]
        mx, hx = 0.5 * (cells.x0[i] + cells.x1[i]), 0.5 * (cells.x1[i] - cells.x0[i])
        my, hy = 0.5 * (cells.y0[i] + cells.y1[i]), 0.5 * (cells.y1[i] - cells.y0[i])
        m = n2d * n2d
        nodes[~seg, :m] = (mx[:, None] + hx[:, None] * tx.ravel()[None, :]) + 1j * (
            my[:, None] + hy[:, None] * ty.ravel()[None, :]
        )
        weights[~seg, :m] = wxy[None, :]
    return nodes, weights


def _cell_average(cells: LatticeCells, f, n: int = PROFILE_NODES) -> np.ndarray:
    """Cell average of f(z) with n (segments) or n x n (rectangles) Gauss nodes."""
    nodes, weights = _gauss_nodes(cells, np.arange(cells.size), n, n)
    vals = np.where(weights > 0.0, f(np.where(weights > 0.0, nodes, 1.0)), 0.0)
    return np.sum(vals * weights, axis=1)


# ==================== KERNEL ====================

def green_function(z, w):
    """Pointwise G_H(z, w) for z != w in the closed upper half plane."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return (
        -np.log(np.abs(z - w)) - np.log(np.abs(z - np.conj(w)))
        + 2.0 * np.maximum(np.log(np.abs(z)), 0.0) + 2.0 * np.maximum(np.log(np.abs(w)), 0.0)
    )


def _phi(t):
    """Second antiderivative of log|t|, zero at t = 0."""
    t = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t > 0.0, 0.5 * t * t * np.log(t) - 0.75 * t * t, 0.0)


def _f4(s, t):
    """A fourth antiderivative (twice in s, twice in t) of log(s^2 + t^2), even in s and t."""
    s = np.abs(s)
    t = np.abs(t)
    r2 = s * s + t * t
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.where(r2 > 0.0, 0.5 * np.log(r2), 0.0)
    theta = np.arctan2(t, s)
    re4 = s ** 4 - 6.0 * s * s * t * t + t ** 4
    im4 = 4.0 * s * t * (s * s - t * t)
    return -(re4 * log_r - im4 * theta) / 12.0 + 25.0 / 144.0 * re4 + math.pi / 6.0 * s * t ** 3


def _f4_dt(s, t):
    """d/dt of _f4."""
    sign = np.sign(t)
    s = np.abs(s)
    t = np.abs(t)
    r2 = s * s + t * t
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.where(r2 > 0.0, 0.5 * np.log(r2), 0.0)
    theta = np.arctan2(t, s)
    val = (t ** 3 - 3.0 * s * s * t) * (11.0 / 18.0 - log_r / 3.0) + (s ** 3 - 3.0 * s * t * t) * theta / 3.0
    return sign * (val + math.pi / 2.0 * s * t * t)


def _second_difference(a0, a1, b0, b1):
    # int_{a0}^{a1} int_{b0}^{b1} g''(x - y) dy dx = sum of sign * g(difference)
    return ((a1 - b0, 1.0), (a0 - b0, -1.0), (a1 - b1, -1.0), (a0 - b1, 1.0))


def _exact_log_average(cells: LatticeCells, i: np.ndarray, j: np.ndarray, reflected: bool) -> np.ndarray:
    """Average of log|z - w|^2 (or log|z - conj w|^2) over z in cell i, w in cell j."""
    out = np.zeros(i.size)
    seg_i = i < cells.n_boundary
    seg_j = j < cells.n_boundary
    x0, x1, y0, y1 = cells.x0, cells.x1, cells.y0, cells.y1

    both = seg_i & seg_j
    if np.any(both):
        a, b = i[both], j[both]
        total = sum(sg * _phi(d) for d, sg in _second_difference(x0[a], x1[a], x0[b], x1[b]))
        out[both] = 2.0 * total / ((x1[a] - x0[a]) * (x1[b] - x0[b]))

    mixed = seg_i ^ seg_j
    if np.any(mixed):
        rect = np.where(seg_i[mixed], j[mixed], i[mixed])
        seg = np.where(seg_i[mixed], i[mixed], j[mixed])
        total = 0.0
        for d, sg in _second_difference(x0[rect], x1[rect], x0[seg], x1[seg]):
            total = total + sg * (_f4_dt(d, y1[rect]) - _f4_dt(d, y0[rect]))
        area = (x1[rect] - x0[rect]) * (y1[rect] - y0[rect])
        out[mixed] = total / (area * (x1[seg] - x0[seg]))

    rects = ~seg_i & ~seg_j
    if np.any(rects):
        a, b = i[rects], j[rects]
        if reflected:
            v0, v1 = -y1[b], -y0[b]
        else:
            v0, v1 = y0[b], y1[b]
        total = 0.0
        for dx, sx in _second_difference(x0[a], x1[a], x0[b], x1[b]):
            for dy, sy in _second_difference(y0[a], y1[a], v0, v1):
                total = total + sx * sy * _f4(dx, dy)
        area = (x1[a] - x0[a]) * (y1[a] - y0[a]) * (x1[b] - x0[b]) * (y1[b] - y0[b])
        out[rects] = total / area
    return out


def _near_pairs(cells: LatticeCells, reflected: bool) -> Tuple[np.ndarray, np.ndarray]:
    centers = cells.centers
    pts = np.column_stack([centers.real, centers.imag])
    query = np.column_stack([centers.real, -centers.imag]) if reflected else pts
    tree = cKDTree(pts)
    radius = NEAR_FACTOR * np.maximum(cells.diameters, 1e-15)
    hits = tree.query_ball_point(query, r=radius)
    rows = np.concatenate([np.full(len(h), k) for k, h in enumerate(hits)])
    cols = np.concatenate([np.asarray(h, dtype=int) for h in hits])
    # symmetrize so the criterion uses the larger of the two diameters
    pairs = np.unique(np.concatenate([rows * cells.size + cols, cols * cells.size + rows]))
    return pairs // cells.size, pairs % cells.size


def _log_plus_average(cells: LatticeCells) -> np.ndarray:
    """Cell average of log|z|_+, exact on segments."""
    out = _cell_average(cells, lambda z: np.maximum(np.log(np.abs(z)), 0.0))

    def antider(x):
        ax = np.abs(x)
        return np.where(ax > 1.0, np.sign(x) * (ax * np.log(np.maximum(ax, 1.0)) - ax + 1.0), 0.0)

    seg = cells.is_segment
    a, b = cells.x0[seg], cells.x1[seg]
    out[seg] = (antider(b) - antider(a)) / (b - a)
    return out


@dataclass(frozen=True)
class CovarianceFactor:
    spec: LatticeSpec
    cells: LatticeCells
    matrix: np.ndarray
    chol: np.ndarray
    jitter: float
    log_plus: np.ndarray

    @property
    def chol_id(self) -> str:
        key = repr(self.spec.to_dict()).encode()
        return hashlib.sha1(key).hexdigest()[:12]

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.matrix)


def _assemble(cells: LatticeCells) -> Tuple[np.ndarray, np.ndarray]:
    n = cells.size
    all_idx = np.arange(n)
    nodes, weights = _gauss_nodes(cells, all_idx, FAR_NODES_1D, FAR_NODES_2D)
    q = nodes.shape[1]
    plus = _log_plus_average(cells)
    near_d = _near_pairs(cells, reflected=False)
    near_r = _near_pairs(cells, reflected=True)
    exact_d = _exact_log_average(cells, near_d[0], near_d[1], reflected=False)
    exact_r = _exact_log_average(cells, near_r[0], near_r[1], reflected=True)

    cov = np.empty((n, n))
    chunk = max(1, CHUNK_ELEMENTS // (q * q * n))
    conj_nodes = np.conj(nodes)
    for r0 in range(0, n, chunk):
        r1 = min(n, r0 + chunk)
        zi = nodes[r0:r1, :, None, None]
        wi = weights[r0:r1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ld = np.log(np.abs(zi - nodes[None, None, :, :]) ** 2)
            lr = np.log(np.abs(zi - conj_nodes[None, None, :, :]) ** 2)
        # padded nodes carry zero weight; coincident far nodes do not occur
        ld = np.where(np.isfinite(ld), ld, 0.0)
        lr = np.where(np.isfinite(lr), lr, 0.0)
        avg_d = np.einsum("iq,iqjr,jr->ij", wi, ld, weights, optimize=True)
        avg_r = np.einsum("iq,iqjr,jr->ij", wi, lr, weights, optimize=True)
        for (rows, cols), exact, target in ((near_d, exact_d, avg_d), (near_r, exact_r, avg_r)):
            sel = (rows >= r0) & (rows < r1)
            target[rows[sel] - r0, cols[sel]] = exact[sel]
        cov[r0:r1] = -0.5 * (avg_d + avg_r) + 2.0 * plus[r0:r1, None] + 2.0 * plus[None, :]
    cov = 0.5 * (cov + cov.T)
    logger.debug("assembled %dx%d covariance, %d + %d exact pairs", n, n, near_d[0].size, near_r[0].size)
    return cov, plus


@functools.lru_cache(maxsize=4)
def build_covariance(spec: LatticeSpec) -> CovarianceFactor:
    """Cell-averaged kernel and its lower Cholesky factor; cached per spec and shared read-only."""
    if spec.size > 12000:
        raise DomainError("build_covariance", spec.size, "dense factorization limited to 12000 cells")
    started = time.perf_counter()
    cells = lattice_cells(spec)
    cov, plus = _assemble(cells)
    scale = float(np.mean(np.diag(cov)))
    jitter = 0.0
    step = 1e-12 * scale
    while True:
        try:
            chol = linalg.cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True, check_finite=False)
            break
        except linalg.LinAlgError:
            jitter = step if jitter == 0.0 else jitter * 10.0
            if jitter > MAX_JITTER * scale:
                raise FactorizationError(cov.shape[0], jitter)
            logger.debug("cholesky failed, retrying with jitter %.3g", jitter)
    if jitter > 0.0:
        logger.warning("covariance factorized with diagonal jitter %.3g", jitter)
    cov.setflags(write=False)
    chol.setflags(write=False)
    logger.debug("factorized %s in %.2fs", spec.to_dict(), time.perf_counter() - started)
    return CovarianceFactor(spec, cells, cov, chol, jitter, plus)


# ==================== FIELDS AND MASSES ====================

def profile_at(params: LcftParams, alpha: float, z, log_term: bool = True):
    """-2Q log|z|_+ + alpha G_H(z, i), pointwise."""
    z = np.asarray(z, dtype=complex)
    log_plus = np.maximum(np.log(np.abs(z)), 0.0)
    green_i = -np.log(np.abs(z - 1j)) - np.log(np.abs(z + 1j)) + 2.0 * log_plus
    out = alpha * green_i
    if log_term:
        out = out - 2.0 * params.q * log_plus
    return out


@functools.lru_cache(maxsize=16)
def _cell_profile(spec: LatticeSpec, q: float, alpha: float, log_term: bool) -> np.ndarray:
    factor = build_covariance(spec)
    cells = factor.cells
    plus = factor.log_plus
    # G(z, i) = -log|z - i| - log|z + i| + 2 log|z|_+, the log terms averaged with Gauss nodes
    logs = _cell_average(cells, lambda z: np.log(np.abs(z - 1j)) + np.log(np.abs(z + 1j)))
    out = alpha * (-logs + 2.0 * plus)
    if log_term:
        out = out - 2.0 * q * plus
    out.setflags(write=False)
    return out


def _plus_power_integral(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    """int_a^b |x|_+^p dx."""
    def antider(x):
        ax = np.abs(x)
        inner = np.minimum(ax, 1.0)
        outer = np.where(ax > 1.0, (np.maximum(ax, 1.0) ** (p + 1.0) - 1.0) / (p + 1.0), 0.0)
        return np.sign(x) * (inner + outer)
    return antider(b) - antider(a)


@functools.lru_cache(maxsize=16)
def _mass_weights(spec: LatticeSpec, gamma: float) -> np.ndarray:
    """
    Expected chaos mass of each cell without profile: int |x|_+^(gamma^2/2) dx on
    segments, int (2y)^(-gamma^2/2) |z|_+^(2 gamma^2) dA on rectangles.
    """
    cells = build_covariance(spec).cells
    out = np.empty(cells.size)
    seg = cells.is_segment
    out[seg] = _plus_power_integral(cells.x0[seg], cells.x1[seg], gamma * gamma / 2.0)
    rect = np.nonzero(~seg)[0]
    if rect.size:
        p = gamma * gamma / 2.0
        if p >= 1.0:
            raise DomainError("bulk lattice", gamma, "bulk mass near the boundary needs gamma < sqrt(2)")
        tx, wx = leggauss(PROFILE_NODES)
        ty, wy = leggauss(PROFILE_NODES)
        # bottom row: Gauss-Jacobi absorbs the y^(-p) endpoint singularity
        tj, wj = special.roots_jacobi(PROFILE_NODES, 0.0, -p)
        x0, x1, y0, y1 = cells.x0[rect], cells.x1[rect], cells.y0[rect], cells.y1[rect]
        hx = 0.5 * (x1 - x0)
        xs = 0.5 * (x0 + x1)[:, None] + hx[:, None] * tx[None, :]
        bottom = y0 == 0.0
        ys = np.where(bottom[:, None], 0.5 * y1[:, None] * (1.0 + tj[None, :]),
                      0.5 * (y0 + y1)[:, None] + 0.5 * (y1 - y0)[:, None] * ty[None, :])
        z = xs[:, :, None] + 1j * ys[:, None, :]
        plus = np.maximum(np.log(np.abs(z)), 0.0)
        g = np.exp(2.0 * gamma * gamma * plus)
        wy_full = np.where(
            bottom[:, None],
            wj[None, :] * (0.5 * y1[:, None]) ** (1.0 - p) * 2.0 ** (-p),
            wy[None, :] * 0.5 * (y1 - y0)[:, None] * (2.0 * ys) ** (-p),
        )
        out[rect] = np.einsum("kx,kxy,ky->k", wx[None, :] * hx[:, None], g, wy_full)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GffRealization:
    """Draws of the cell-averaged field h (rows) with the deterministic profile kept separate."""
    values: np.ndarray
    profile: np.ndarray
    variance: np.ndarray
    chol_id: str
    spec: LatticeSpec


@dataclass(frozen=True)
class GmcObservables:
    boundary_length: np.ndarray
    bulk_area: np.ndarray
    is_weight: np.ndarray


def sample_field_with_insertion(
    handle: CovarianceFactor,
    params: LcftParams,
    alpha: float,
    rng: np.random.Generator,
    size: int = 1,
    log_term: bool = True,
) -> GffRealization:
    """size draws of h = L xi plus the profile -2Q log|z|_+ + alpha G(z, i); no zero mode."""
    xi = rng.standard_normal((size, handle.cells.size))
    values = xi @ handle.chol.T
    return GffRealization(
        values=values,
        profile=_cell_profile(handle.spec, params.q, float(alpha), log_term),
        variance=handle.variance,
        chol_id=handle.chol_id,
        spec=handle.spec,
    )


def gmc_masses(field: GffRealization, params: LcftParams, alpha: float) -> GmcObservables:
    """
    Boundary mass sum exp((g/2) phi_k - (g^2/8) Var_k) w_k and bulk mass
    sum exp(g phi_k - (g^2/2) Var_k) w_k, phi = h + profile, with the
    importance weight nu^((2/g)(Q - alpha)).
    """
    g = params.gamma
    weights = _mass_weights(field.spec, g)
    nb = field.spec.n_cells
    phi = np.atleast_2d(field.values) + field.profile[None, :]
    var = field.variance
    nu = np.exp(0.5 * g * phi[:, :nb] - g * g / 8.0 * var[None, :nb]) @ weights[:nb]
    if field.spec.kind is LatticeKind.BULK_2D:
        mu = np.exp(g * phi[:, nb:] - g * g / 2.0 * var[None, nb:]) @ weights[nb:]
    else:
        mu = np.zeros(nu.shape)
    rho = params.rho(alpha)
    return GmcObservables(boundary_length=nu, bulk_area=mu, is_weight=nu ** rho)


@dataclass(frozen=True)
class ObservableDraws:
    nu: np.ndarray
    mu: np.ndarray
    weight: np.ndarray
    stream_id: np.ndarray
    draw_id: np.ndarray

    @property
    def n(self) -> int:
        return int(self.nu.size)

    def csv_rows(self):
        for k in range(self.n):
            yield (int(self.stream_id[k]), int(self.draw_id[k]), self.nu[k], self.mu[k], self.weight[k])


def draw_observables(
    handle: CovarianceFactor,
    params: LcftParams,
    alpha: float,
    n_draws: int,
    rng: np.random.Generator,
    threads: int = 1,
    unit_draws: int = 256,
) -> ObservableDraws:
    """Observables of n_draws fields, in work units with spawned child generators."""
    if n_draws < 1:
        raise DomainError("draw_observables", n_draws, "need n_draws >= 1")
    sizes = [unit_draws] * (n_draws // unit_draws)
    if n_draws % unit_draws:
        sizes.append(n_draws % unit_draws)
    children = rng.spawn(len(sizes))

    def run(k):
        field = sample_field_with_insertion(handle, params, alpha, children[k], size=sizes[k])
        return gmc_masses(field, params, alpha)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    return ObservableDraws(
        nu=np.concatenate([p.boundary_length for p in parts]),
        mu=np.concatenate([p.bulk_area for p in parts]),
        weight=np.concatenate([p.is_weight for p in parts]),
        stream_id=np.concatenate([np.full(s, k) for k, s in enumerate(sizes)]),
        draw_id=np.concatenate([np.arange(s) for s in sizes]),
    )


# ==================== ESTIMATORS ====================

@dataclass(frozen=True)
class TailBound:
    mass: float
    relative: float


def tail_bound(params: LcftParams, alpha: float, spec: LatticeSpec) -> TailBound:
    """
    Expected boundary mass beyond |x| = R. Far out the profile is -2Q log|x|,
    so the mass density is |x|^(g^2/2 - g Q) = |x|^(-2) and the tail is 2/R;
    the chaos factor has mean one. `relative` divides by the lattice's
    expected mass.
    """
    g = params.gamma
    mass = 2.0 / spec.extent
    weights = _mass_weights(spec, g)
    profile = _cell_profile(spec, params.q, float(alpha), True)
    nb = spec.n_cells
    lattice_mass = float(np.sum(weights[:nb] * np.exp(0.5 * g * profile[:nb])))
    return TailBound(mass, mass / lattice_mass)


def _lattice_echo(params: LcftParams, alpha: float, spec: LatticeSpec, **extra) -> Dict[str, object]:
    out: Dict[str, object] = {"gamma": params.gamma, "alpha": alpha, "lattice": spec.to_dict()}
    out.update(extra)
    return out


def _require_kind(spec: LatticeSpec, kind: LatticeKind, operation: str) -> None:
    if spec.kind is not kind:
        raise DomainError(operation, spec.kind.value, f"needs a {kind.value} lattice")


def _tail_notes(params: LcftParams, alpha: float, spec: LatticeSpec) -> Dict[str, object]:
    bound = tail_bound(params, alpha, spec)
    if bound.relative > 0.01:
        logger.warning("boundary mass beyond R=%g is up to %.2f%% of the lattice mass", spec.extent, 100 * bound.relative)
    return {"tail_bound": bound.relative, "tail_mass": bound.mass, "lattice_note": LATTICE_NOTE}


def estimate_u0_bar(
    params: LcftParams,
    alpha: float,
    spec: LatticeSpec,
    n_draws: int,
    rng: np.random.Generator,
    threads: int = 1,
    coarse_spec: Optional[LatticeSpec] = None,
    rel_tol: float = 0.05,
) -> VerificationReport:
    """Monte Carlo E[nu^((2/g)(Q - alpha))] on a boundary lattice against the closed form."""
    op = "estimate_u0_bar"
    _require_kind(spec, LatticeKind.BOUNDARY_1D, op)
    if not alpha > params.gamma / 2.0:
        raise DomainError(op, alpha, "alpha must exceed gamma/2")
    rho = params.rho(alpha)
    if rho > 1.0:
        raise DomainError(op, rho, "moment exponent above 1 refused (variance blow-up)")
    started = time.perf_counter()
    target = closed.u0_bar(params, alpha)
    if rho == 0.0:
        return statistical_report(op, _lattice_echo(params, alpha, spec), target, 1.0, 0.0,
                                  rel_tol=rel_tol, started=started, n_samples=n_draws)
    notes = _tail_notes(params, alpha, spec)
    draws = draw_observables(build_covariance(spec), params, alpha, n_draws, rng, threads)
    est, stderr = weighted_mean(draws.nu ** rho)
    if coarse_spec is not None:
        coarse = draw_observables(build_covariance(coarse_spec), params, alpha, n_draws, rng, threads)
        coarse_est, coarse_se = weighted_mean(coarse.nu ** rho)
        notes["refinement"] = [
            {"n_cells": coarse_spec.n_cells, "estimate": coarse_est, "stderr": coarse_se},
            {"n_cells": spec.n_cells, "estimate": est, "stderr": stderr},
        ]
    return statistical_report(
        op, _lattice_echo(params, alpha, spec), target, est, stderr,
        rel_tol=rel_tol, started=started, n_samples=n_draws, notes=notes,
    )


def conditional_area_samples(draws: ObservableDraws) -> np.ndarray:
    """Unit-boundary-length area X = mu/nu^2, invariant under a constant shift of the field."""
    return draws.mu / draws.nu ** 2


def estimate_conditional_area(
    params: LcftParams,
    alpha: float,
    spec: LatticeSpec,
    n_draws: int,
    rng: np.random.Generator,
    threads: int = 1,
    rel_tol: float = 0.10,
    ess_floor: float = 0.05,
) -> VerificationReport:
    """
    Weighted E[1/X] with X = mu/nu^2 and weight nu^((2/g)(Q - alpha)) against
    shape/scale of the inverse gamma area law; the weighted KS test against
    that law goes to the notes.
    """
    op = "estimate_conditional_area"
    _require_kind(spec, LatticeKind.BULK_2D, op)
    law = closed.area_law_alpha(params, alpha)
    started = time.perf_counter()
    draws = draw_observables(build_covariance(spec), params, alpha, n_draws, rng, threads)
    x = conditional_area_samples(draws)
    rho = params.rho(alpha)
    log_w = rho * np.log(draws.nu)
    w = np.exp(log_w - np.max(log_w))
    ess = effective_sample_size(log_weights=log_w)
    est, stderr = weighted_mean(1.0 / x, w)
    inv = law.as_inverse_gamma()
    ks = ks_test(x, lambda v: inv_gamma_cdf(inv, v), weights=w)
    notes = _tail_notes(params, alpha, spec)
    notes.update({"ks_statistic": ks.statistic, "ks_p_value": ks.p_value, "shape": law.shape, "scale": law.scale})
    if ess < ess_floor * n_draws:
        logger.warning("conditional area weights degenerate: ESS %.1f of %d", ess, n_draws)
        notes["ess_warning"] = True
    return statistical_report(
        op, _lattice_echo(params, alpha, spec), law.shape / law.scale, est, stderr,
        rel_tol=rel_tol, started=started, n_samples=n_draws, ess=ess, notes=notes,
    )


def estimate_bulk_moment(
    params: LcftParams,
    alpha: float,
    spec: LatticeSpec,
    n_draws: int,
    rng: np.random.Generator,
    threads: int = 1,
    rel_tol: float = 0.10,
) -> VerificationReport:
    """Monte Carlo E[mu(H)^((Q - alpha)/g)] against the closed-form bulk moment."""
    op = "estimate_bulk_moment"
    _require_kind(spec, LatticeKind.BULK_2D, op)
    m = (params.q - alpha) / params.gamma
    if not 0.0 <= m <= 0.5:
        raise DomainError(op, m, "moment (Q - alpha)/gamma must lie in [0, 1/2]")
    started = time.perf_counter()
    echo = _lattice_echo(params, alpha, spec, moment=m)
    if m == 0.0:
        return statistical_report(op, echo, 1.0, 1.0, 0.0, rel_tol=rel_tol, started=started, n_samples=n_draws)
    target = closed.gmc_moment_h(params, alpha)
    draws = draw_observables(build_covariance(spec), params, alpha, n_draws, rng, threads)
    est, stderr = weighted_mean(draws.mu ** m)
    notes = {"lattice_note": LATTICE_NOTE}
    return statistical_report(op, echo, target, est, stderr, rel_tol=rel_tol, started=started,
                              n_samples=n_draws, notes=notes)


def u_from_observables(
    params: LcftParams, alpha: float, mu: float, mu_b: float, nu: np.ndarray, area: np.ndarray, h: float = 1.0 / 32.0
) -> Tuple[float, float, float]:
    """
    (2/g) 2^(-alpha^2/2) mean_j nu_j^rho int_0^inf l^(-rho-1) (exp(-mu l^2 X_j - mu_B l) - 1) dl,
    X_j = area_j/nu_j^2, with the l-integral on a fixed exp-sinh rule.

    Returns (estimate, stderr, relative change of the estimate between step h and 2h).
    """
    rho = params.rho(alpha)
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(area, dtype=float) / nu ** 2
    const = 2.0 / params.gamma * 2.0 ** (-alpha * alpha / 2.0)

    def per_draw(step):
        ell, w = exp_sinh_rule(-rho - 1.0, step)
        with np.errstate(over="ignore", under="ignore"):
            expo = np.broadcast_to(-mu_b * ell[None, :], (x.size, ell.size))
            if mu > 0.0:
                expo = expo - mu * ell[None, :] ** 2 * x[:, None]
            vals = np.expm1(expo)
        return const * nu ** rho * (vals @ w)

    fine = per_draw(h)
    coarse = per_draw(2.0 * h)
    est, stderr = weighted_mean(fine)
    rule_diff = abs(float(np.mean(coarse)) - est) / max(abs(est), 1e-300)
    return est, stderr, rule_diff


def estimate_u_end_to_end(
    params: LcftParams,
    alpha: float,
    cosmo: Cosmology,
    spec: LatticeSpec,
    n_draws: int,
    rng: np.random.Generator,
    threads: int = 1,
    rel_tol: float = 0.15,
) -> VerificationReport:
    """U through lattice draws of (nu, mu), against u_fzz."""
    op = "estimate_u_end_to_end"
    _require_kind(spec, LatticeKind.BULK_2D, op)
    g, q = params.gamma, params.q
    if not 2.0 / g < alpha < q - g / 4.0:
        raise DomainError(op, alpha, "alpha must lie in (2/gamma, Q - gamma/4)")
    started = time.perf_counter()
    target = closed.u_fzz(params, alpha, cosmo)
    draws = draw_observables(build_covariance(spec), params, alpha, n_draws, rng, threads)
    est, stderr, rule_diff = u_from_observables(params, alpha, cosmo.mu, cosmo.mu_b, draws.nu, draws.mu)
    notes = _tail_notes(params, alpha, spec)
    notes["quad_rule_rel_diff"] = rule_diff
    echo = _lattice_echo(params, alpha, spec, mu=cosmo.mu, mu_b=cosmo.mu_b,
                         x=x_parameter(params, cosmo.mu, cosmo.mu_b))
    return statistical_report(op, echo, target, est, stderr, rel_tol=rel_tol, started=started,
                              n_samples=n_draws, notes=notes)


def covariance_fidelity(handle: CovarianceFactor, n_draws: int, rng: np.random.Generator, cells: List[int]) -> np.ndarray:
    """Entrywise z-scores of the empirical covariance of the chosen cells against the matrix."""
    idx = np.asarray(cells)
    xi = rng.standard_normal((n_draws, handle.cells.size))
    h = (xi @ handle.chol.T)[:, idx]
    emp = h.T @ h / n_draws
    sub = handle.matrix[np.ix_(idx, idx)]
    # Var(h_i h_j) = C_ii C_jj + C_ij^2 for a centered Gaussian pair
    d = np.diag(sub)
    se = np.sqrt((np.outer(d, d) + sub ** 2) / n_draws)
    return (emp - sub) / se
