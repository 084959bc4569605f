"""
Planar Brownian motion in cones.

Paths start at u(1 + i*eps) inside C_theta = {0 < arg z < theta} and run
until they leave through the real axis or through the ray arg z = theta.
Only ray exits are kept; they give the duration A and exit radius L of the
inner-cone leg. The importance weight (L/u)^(-pi/phi) turns those into the
split used by the inverse gamma fixed-point recursion.

Paths advance in blocks of steps held as one (paths x steps) array; each
work unit owns a child generator spawned from the caller's generator, so
results do not depend on the thread count.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Union

import numpy as np

from .core import ConeGeometry
from .dist import (
    InverseGammaParams,
    cone_duration_invgamma,
    cone_exit_cdf,
    inv_gamma_cdf,
    inv_gamma_reciprocal_mean,
    inv_gamma_sample,
    moment_ratio,
)
from .errors import DomainError, SimulationTimeoutError
from .report import VerificationReport, ks_report, statistical_report
from .verify import effective_sample_size, ks_test, weighted_correlation, weighted_mean

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
RAY = 1
REAL_AXIS = 2
SIDE_NAMES = {RAY: "ray", REAL_AXIS: "real"}

# array elements per stepping block, and the largest number of paths in one wave
BLOCK_ELEMENTS = 1 << 20
MAX_WAVE = 16384
MAX_BLOCK_STEPS = 256


@dataclass(frozen=True)
class PathConfig:
    dt: float
    start_offset_eps: float = 1e-2
    bridge_correction: bool = True
    max_steps: int = 5_000_000
    unit_size: int = 2048
    ess_floor: float = 0.05

    def __post_init__(self):
        if not self.dt > 0.0:
            raise DomainError("PathConfig", self.dt, "dt must be > 0")
        if not 0.0 < self.start_offset_eps < 0.1:
            raise DomainError("PathConfig", self.start_offset_eps, "start offset eps must lie in (0, 0.1)")
        if self.max_steps < 1 or self.unit_size < 1:
            raise DomainError("PathConfig", (self.max_steps, self.unit_size), "budgets must be positive")

    @classmethod
    def relative(cls, u: float, rel_dt: float, eps: float = 1e-2, **kwargs) -> "PathConfig":
        """A config whose step is rel_dt * u^2."""
        return cls(dt=rel_dt * u * u, start_offset_eps=eps, **kwargs)


@dataclass(frozen=True)
class ConeSplitSample:
    duration_a: float
    exit_radius_l: float
    is_weight: float

    def __post_init__(self):
        if not (self.duration_a > 0.0 and self.exit_radius_l > 0.0 and self.is_weight > 0.0):
            raise DomainError(
                "ConeSplitSample", (self.duration_a, self.exit_radius_l, self.is_weight), "all fields must be > 0"
            )


@dataclass(frozen=True)
class RealAxisExit:
    """The path left through the real axis; callers reject it."""
    duration: float


@dataclass
class ExitBatch:
    side: np.ndarray
    duration: np.ndarray
    radius: np.ndarray
    steps: int = 0

    @property
    def ray(self) -> np.ndarray:
        return self.side == RAY


@dataclass
class SplitSet:
    """Ray-exit samples of the inner leg with their importance weights."""
    a: np.ndarray
    l: np.ndarray
    log_weights: np.ndarray
    stream_id: np.ndarray
    path_id: np.ndarray
    n_trials: int
    u: float
    ess: float = field(init=False)

    def __post_init__(self):
        self.ess = effective_sample_size(log_weights=self.log_weights) if self.a.size else 0.0

    @property
    def weights(self) -> np.ndarray:
        # normalized so that the largest weight is one
        return np.exp(self.log_weights - np.max(self.log_weights))

    @property
    def n(self) -> int:
        return int(self.a.size)

    @property
    def n_rejected(self) -> int:
        return self.n_trials - self.n

    def samples(self) -> Iterator[ConeSplitSample]:
        w = self.weights
        for i in range(self.n):
            yield ConeSplitSample(float(self.a[i]), float(self.l[i]), float(w[i]))

    def csv_rows(self):
        w = self.weights
        for i in range(self.n):
            yield (int(self.stream_id[i]), int(self.path_id[i]), self.a[i], self.l[i], w[i], SIDE_NAMES[RAY])


# ==================== PATH SIMULATION ====================

def _arg(z: complex) -> float:
    return math.atan2(z.imag, z.real) % TWO_PI


def _check_cone(theta: float, u: float) -> None:
    if not 0.0 < theta < TWO_PI:
        raise DomainError("sample_exit_through_ray", theta, "need 0 < theta < 2*pi")
    if not u > 0.0:
        raise DomainError("sample_exit_through_ray", u, "need u > 0")


def simulate_exits(theta: float, start: complex, cfg: PathConfig, n: int, rng: np.random.Generator) -> ExitBatch:
    """
    First exit of n independent paths from C_theta, all started at `start`.

    Each step adds N(0, dt) to both coordinates. With the bridge correction a
    step whose endpoints both lie inside also exits with probability
    1 - exp(-2 d0 d1 / dt) per wall, d0 and d1 being the endpoint distances
    to that wall. Ray exits are projected back onto the ray.
    """
    if not 0.0 < _arg(start) < theta:
        raise DomainError("simulate_exits", start, "start point must lie inside the cone")
    c, s = math.cos(theta), math.sin(theta)
    dt = cfg.dt
    sd = math.sqrt(dt)
    exit_split = 0.5 * (theta + TWO_PI)

    x = np.full(n, start.real)
    y = np.full(n, start.imag)
    side = np.zeros(n, dtype=np.int8)
    duration = np.zeros(n)
    radius = np.zeros(n)
    alive = np.arange(n)
    base = 0

    while alive.size:
        if base >= cfg.max_steps:
            raise SimulationTimeoutError(
                f"{alive.size} paths still inside after {base} steps",
                {"alive": int(alive.size), "steps": base, "exited": int(n - alive.size), "dt": dt},
            )
        m = alive.size
        k = int(min(MAX_BLOCK_STEPS, max(1, BLOCK_ELEMENTS // m), cfg.max_steps - base))
        inc = rng.standard_normal((2, m, k)) * sd
        px = x[alive, None] + np.cumsum(inc[0], axis=1)
        py = y[alive, None] + np.cumsum(inc[1], axis=1)
        qx = np.concatenate([x[alive, None], px[:, :-1]], axis=1)
        qy = np.concatenate([y[alive, None], py[:, :-1]], axis=1)

        ang = np.mod(np.arctan2(py, px), TWO_PI)
        outside = (ang >= theta) | (ang <= 0.0)
        ray_d1 = px * s - py * c
        ray_d0 = qx * s - qy * c

        if cfg.bridge_correction:
            draws = rng.random((2, m, k))
            with np.errstate(over="ignore"):
                real_ok = (qy > 0.0) & (py > 0.0) & (qx > 0.0) & (px > 0.0)
                p_real = np.where(real_ok, np.exp(-2.0 * qy * py / dt), 0.0)
                ray_ok = (ray_d0 > 0.0) & (ray_d1 > 0.0) & (qx * c + qy * s > 0.0) & (px * c + py * s > 0.0)
                p_ray = np.where(ray_ok, np.exp(-2.0 * ray_d0 * ray_d1 / dt), 0.0)
            hit_real = draws[0] < p_real
            hit_ray = draws[1] < p_ray
            bridged = ~outside & (hit_real | hit_ray)
            # a step that could have crossed both walls goes to the likelier one
            bridge_ray = hit_ray & (~hit_real | (p_ray >= p_real))
        else:
            bridged = bridge_ray = np.zeros_like(outside)

        event = outside | bridged
        has_event = event.any(axis=1)
        j = np.argmax(event, axis=1)
        rows = np.nonzero(has_event)[0]
        jj = j[rows]
        idx = alive[rows]

        out_rows = outside[rows, jj]
        to_ray = np.where(
            out_rows,
            (ang[rows, jj] >= theta) & (ang[rows, jj] < exit_split),
            bridge_ray[rows, jj],
        )
        d0 = ray_d0[rows, jj]
        d1 = ray_d1[rows, jj]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(out_rows & to_ray & (d0 - d1 > 0.0), d0 / (d0 - d1), 0.5)
        frac = np.clip(frac, 0.0, 1.0)
        ex = qx[rows, jj] + frac * (px[rows, jj] - qx[rows, jj])
        ey = qy[rows, jj] + frac * (py[rows, jj] - qy[rows, jj])
        proj = np.maximum(ex * c + ey * s, np.finfo(float).tiny)

        side[idx] = np.where(to_ray, RAY, REAL_AXIS)
        duration[idx] = (base + jj + frac) * dt
        radius[idx] = np.where(to_ray, proj, 0.0)

        keep = ~has_event
        x[alive[keep]] = px[keep, -1]
        y[alive[keep]] = py[keep, -1]
        alive = alive[keep]
        base += k

    return ExitBatch(side=side, duration=duration, radius=radius, steps=base)


def start_point(u: float, cfg: PathConfig) -> complex:
    return complex(u, u * cfg.start_offset_eps)


def ray_exit_probability(theta: float, start: complex) -> float:
    """Harmonic measure of the ray arg = theta seen from `start`: arg(start)/theta."""
    return _arg(start) / theta


def sample_exit_through_ray(
    theta: float, u: float, cfg: PathConfig, rng: np.random.Generator
) -> Union[ConeSplitSample, RealAxisExit]:
    """One path from u(1 + i*eps); the split sample on a ray exit, else a RealAxisExit marker."""
    _check_cone(theta, u)
    batch = simulate_exits(theta, start_point(u, cfg), cfg, 1, rng)
    if batch.side[0] == RAY:
        return ConeSplitSample(float(batch.duration[0]), float(batch.radius[0]), 1.0)
    return RealAxisExit(float(batch.duration[0]))


def _ray_exit_unit(theta: float, u: float, cfg: PathConfig, quota: int, rng: np.random.Generator):
    start = start_point(u, cfg)
    p = ray_exit_probability(theta, start)
    a_parts: List[np.ndarray] = []
    l_parts: List[np.ndarray] = []
    got = 0
    trials = 0
    while got < quota:
        need = quota - got
        wave = int(min(MAX_WAVE, math.ceil(1.2 * need / p) + 16))
        batch = simulate_exits(theta, start, cfg, wave, rng)
        hit = batch.ray
        trials += wave
        a_parts.append(batch.duration[hit])
        l_parts.append(batch.radius[hit])
        got += int(hit.sum())
    # ray exits past the quota are dropped; trials counts every simulated path
    return np.concatenate(a_parts)[:quota], np.concatenate(l_parts)[:quota], trials


def ray_exit_samples(
    theta: float, u: float, n: int, cfg: PathConfig, rng: np.random.Generator, threads: int = 1
):
    """n ray-exit (A, L) pairs, produced in work units of cfg.unit_size paths."""
    _check_cone(theta, u)
    if n < 1:
        raise DomainError("ray_exit_samples", n, "need n >= 1")
    quotas = [cfg.unit_size] * (n // cfg.unit_size)
    if n % cfg.unit_size:
        quotas.append(n % cfg.unit_size)
    children = rng.spawn(len(quotas))

    def run(i):
        return _ray_exit_unit(theta, u, cfg, quotas[i], children[i])

    started = time.perf_counter()
    if threads > 1 and len(quotas) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(len(quotas))))
    else:
        results = [run(i) for i in range(len(quotas))]
    a = np.concatenate([r[0] for r in results])
    l = np.concatenate([r[1] for r in results])
    trials = sum(r[2] for r in results)
    stream_id = np.concatenate([np.full(q, i) for i, q in enumerate(quotas)])
    path_id = np.concatenate([np.arange(q) for q in quotas])
    logger.debug(
        "ray exits: %d accepted of ~%d trials in %d units, %.2fs",
        n, trials, len(quotas), time.perf_counter() - started,
    )
    return a, l, trials, stream_id, path_id


# ==================== WEIGHTED SPLITS ====================

def weighted_split_sampler(
    geom: ConeGeometry, n: int, cfg: PathConfig, rng: np.random.Generator, threads: int = 1, weighted: bool = True
) -> SplitSet:
    """Ray-exit splits of C_theta weighted by (L/u)^(-pi/phi); weighted=False gives unit weights."""
    a, l, trials, stream_id, path_id = ray_exit_samples(geom.theta, geom.u, n, cfg, rng, threads)
    k = math.pi / geom.phi if weighted else 0.0
    log_w = -k * np.log(l / geom.u)
    splits = SplitSet(a, l, log_w, stream_id, path_id, trials, geom.u)
    if splits.ess < cfg.ess_floor * splits.n:
        logger.warning("weighted splits degenerate: ESS %.1f of %d samples", splits.ess, splits.n)
    return splits


def systematic_resample(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn by systematic resampling, returned in random order."""
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    positions = (rng.random() + np.arange(n)) / n
    idx = np.minimum(np.searchsorted(cdf, positions, side="right"), w.size - 1)
    return rng.permutation(idx)


@dataclass
class RecursionResult:
    s: np.ndarray
    residual: np.ndarray
    partial_sums: np.ndarray
    target: InverseGammaParams
    ess: float


def recursion_fixed_point(
    geom: ConeGeometry,
    depth: int,
    n_paths: int,
    cfg: PathConfig,
    rng: np.random.Generator,
    splits: Optional[SplitSet] = None,
    threads: int = 1,
) -> RecursionResult:
    """
    S_n = A_1 + (L_1/u)^2 (A_2 + (L_2/u)^2 (... A_n)).

    One weighted pool of splits is simulated (or passed in) and every level
    resamples it independently. Partial sums S_1..S_n are kept, row k being
    S_(k+1); they are non-decreasing along each column.
    """
    if depth < 1:
        raise DomainError("recursion_fixed_point", depth, "depth must be >= 1")
    if splits is None:
        splits = weighted_split_sampler(geom, n_paths, cfg, rng, threads)
    w = splits.weights
    u2 = geom.u * geom.u
    s = np.zeros(n_paths)
    factor = np.ones(n_paths)
    history = np.empty((depth, n_paths))
    for level in range(depth):
        idx = systematic_resample(w, n_paths, rng)
        s = s + factor * splits.a[idx]
        factor = factor * splits.l[idx] ** 2 / u2
        history[level] = s
    return RecursionResult(
        s=s,
        residual=factor,
        partial_sums=history,
        target=cone_duration_invgamma(geom.phi, geom.u),
        ess=splits.ess,
    )


def shear_matrix(theta: float, a2: float) -> np.ndarray:
    if not a2 > 0.0:
        raise DomainError("shear_map", a2, "variance must be > 0")
    return math.sqrt(a2) * np.array([[math.sin(theta), -math.cos(theta)], [0.0, 1.0]])


def shear_map(theta: float, a2: float, points):
    """
    Apply Lambda = sqrt(a2) [[sin theta, -cos theta], [0, 1]].

    `points` is complex (any shape) or real with a trailing axis of size 2;
    the result has the same form.
    """
    lam = shear_matrix(theta, a2)
    arr = np.asarray(points)
    if np.iscomplexobj(arr):
        xy = np.stack([arr.real, arr.imag], axis=-1)
        out = xy @ lam.T
        return out[..., 0] + 1j * out[..., 1]
    if arr.shape[-1] != 2:
        raise DomainError("shear_map", arr.shape, "real input needs a trailing axis of size 2")
    return arr @ lam.T


@dataclass(frozen=True)
class Extrapolation:
    eps: float
    value_eps: float
    value_half: float

    @property
    def extrapolated(self) -> float:
        # bias is first order in eps
        return 2.0 * self.value_half - self.value_eps


def mean_log_radius(l: np.ndarray, u: float) -> float:
    """E[log(L/u)], zero under the exact exit kernel."""
    return float(np.mean(np.log(l / u)))


def start_offset_extrapolation(
    theta: float, u: float, cfg: PathConfig, n: int, rng: np.random.Generator, statistic=mean_log_radius
) -> Extrapolation:
    """Evaluate a ray-exit statistic at eps and eps/2 and extrapolate to eps = 0."""
    values = []
    for eps in (cfg.start_offset_eps, 0.5 * cfg.start_offset_eps):
        run_cfg = PathConfig(
            dt=cfg.dt, start_offset_eps=eps, bridge_correction=cfg.bridge_correction,
            max_steps=cfg.max_steps, unit_size=cfg.unit_size, ess_floor=cfg.ess_floor,
        )
        _, l, _, _, _ = ray_exit_samples(theta, u, n, run_cfg, rng)
        values.append(statistic(l, u))
    return Extrapolation(cfg.start_offset_eps, values[0], values[1])


# ==================== CHECKS ====================

def _geom_echo(geom: ConeGeometry, cfg: PathConfig, **extra) -> Dict[str, object]:
    out = {
        "theta": geom.theta,
        "phi": geom.phi,
        "u": geom.u,
        "dt": cfg.dt,
        "start_offset_eps": cfg.start_offset_eps,
        "bridge_correction": cfg.bridge_correction,
    }
    out.update(extra)
    return out


def exit_kernel_check(geom: ConeGeometry, splits: SplitSet, cfg: PathConfig, alpha: float = 0.01) -> VerificationReport:
    """Unweighted ray-exit radii against the closed-form exit kernel."""
    started = time.perf_counter()
    ks = ks_test(splits.l, lambda r: cone_exit_cdf(geom.theta, geom.u, r))
    return ks_report(
        "cone_exit_kernel", _geom_echo(geom, cfg), ks.statistic, ks.p_value, alpha,
        started=started, n_samples=splits.n,
        notes={"trials": splits.n_trials},
    )


def moment_ratio_check(geom: ConeGeometry, splits: SplitSet, cfg: PathConfig, eps: float) -> VerificationReport:
    """Weighted E[(L/u)^eps] against f(pi theta/phi - theta eps)/f(pi theta/phi)."""
    started = time.perf_counter()
    target = moment_ratio(geom.theta, geom.phi, eps)
    est, stderr = weighted_mean((splits.l / geom.u) ** eps, splits.weights)
    return statistical_report(
        "cone_moment_ratio", _geom_echo(geom, cfg, eps=eps), target, est, stderr,
        started=started, ess=splits.ess, n_samples=splits.n,
    )


def recursion_checks(
    geom: ConeGeometry, result: RecursionResult, cfg: PathConfig, alpha: float = 0.01
) -> List[VerificationReport]:
    depth = result.partial_sums.shape[0]
    echo = _geom_echo(geom, cfg, depth=depth)
    target = result.target
    n = int(result.s.size)
    reports = []

    started = time.perf_counter()
    ks = ks_test(result.s, lambda x: inv_gamma_cdf(target, x))
    reports.append(ks_report("cone_recursion_ks", echo, ks.statistic, ks.p_value, alpha,
                             started=started, n_samples=n, ess=result.ess))

    started = time.perf_counter()
    est, stderr = weighted_mean(1.0 / result.s)
    reports.append(statistical_report(
        "cone_recursion_reciprocal_mean", echo, inv_gamma_reciprocal_mean(target), est, stderr,
        started=started, n_samples=n, ess=result.ess,
    ))

    median = float(np.median(result.residual))
    reports.append(VerificationReport(
        check="cone_recursion_residual",
        params=echo,
        target=0.0,
        estimate=median,
        abs_err=median,
        rel_err=median,
        tolerance=1e-3,
        verdict="pass" if median < 1e-3 else "fail",
        criterion="median residual factor < 1e-3",
        n_samples=n,
    ))
    return reports


def independence_check(
    geom: ConeGeometry,
    n_paths: int,
    cfg: PathConfig,
    rng: np.random.Generator,
    splits: Optional[SplitSet] = None,
    alpha: float = 0.01,
    threads: int = 1,
) -> List[VerificationReport]:
    """
    Two-leg paths T = A + (L/u)^2 Y with Y a fresh draw of the duration law.

    Y must be uncorrelated with A and L, and both T and Y must follow the
    inverse gamma law with shape pi/phi and scale u^2/2.
    """
    if splits is None:
        splits = weighted_split_sampler(geom, n_paths, cfg, rng, threads)
    target = cone_duration_invgamma(geom.phi, geom.u)
    w = splits.weights
    y = inv_gamma_sample(target, rng, splits.n)
    t = splits.a + (splits.l / geom.u) ** 2 * y
    echo = _geom_echo(geom, cfg)
    common = {"n_samples": splits.n, "ess": splits.ess}
    reports = []

    for name, other in (("a", splits.a), ("l", splits.l)):
        started = time.perf_counter()
        r, stderr = weighted_correlation(y, other, w)
        reports.append(statistical_report(
            f"cone_independence_y_{name}", echo, 0.0, r, stderr, started=started, **common
        ))

    def cdf(x):
        return inv_gamma_cdf(target, x)

    started = time.perf_counter()
    ks = ks_test(t, cdf, weights=w)
    reports.append(ks_report("cone_independence_t_ks", echo, ks.statistic, ks.p_value, alpha,
                             started=started, **common))

    started = time.perf_counter()
    est, stderr = weighted_mean(1.0 / t, w)
    reports.append(statistical_report(
        "cone_independence_t_reciprocal_mean", echo, inv_gamma_reciprocal_mean(target), est, stderr,
        started=started, **common,
    ))

    started = time.perf_counter()
    ks = ks_test(y, cdf)
    reports.append(ks_report("cone_independence_y_ks", echo, ks.statistic, ks.p_value, alpha,
                             started=started, n_samples=splits.n))
    return reports


def start_offset_check(
    geom: ConeGeometry, cfg: PathConfig, n: int, rng: np.random.Generator, n_sigma: float = 3.0
) -> VerificationReport:
    """
    Extrapolated E[log(L/u)] against 0. Under the exit kernel (L/u)^(pi/theta)
    has density (1 + y)^-2, so log(L/u) is logistic with sd theta/sqrt(3).
    """
    started = time.perf_counter()
    ext = start_offset_extrapolation(geom.theta, geom.u, cfg, n, rng)
    # 2 v_half - v_eps from independent runs
    stderr = math.sqrt(5.0 / n) * geom.theta / math.sqrt(3.0)
    return statistical_report(
        "cone_start_offset", _geom_echo(geom, cfg), 0.0, ext.extrapolated, stderr,
        n_sigma=n_sigma, started=started, n_samples=n,
        notes={"value_eps": ext.value_eps, "value_half_eps": ext.value_half},
    )


def shear_covariance_check(
    theta: float, a2: float, n: int, rng: np.random.Generator
) -> List[VerificationReport]:
    """Empirical covariance of Lambda applied to standard increments against a2 [[1, -cos], [-cos, 1]]."""
    started = time.perf_counter()
    inc = rng.standard_normal((n, 2))
    img = shear_map(theta, a2, inc)
    target = a2 * np.array([[1.0, -math.cos(theta)], [-math.cos(theta), 1.0]])
    echo = {"theta": theta, "a2": a2}
    reports = []
    for name, (i, j) in (("xx", (0, 0)), ("xy", (0, 1)), ("yy", (1, 1))):
        prod = img[:, i] * img[:, j]
        est = float(np.mean(prod))
        stderr = float(np.std(prod) / math.sqrt(n))
        reports.append(statistical_report(
            f"shear_covariance_{name}", echo, float(target[i, j]), est, stderr,
            started=started, n_samples=n,
        ))
    return reports
