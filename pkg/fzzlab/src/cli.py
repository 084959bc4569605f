"""
Command line surface: eval, verify and dump.

Reports go to stdout as JSON lines; banners and PASS/FAIL lines go to
stderr so stdout can be piped. Exit codes: 0 all checks pass, 1 a check
failed, 2 usage or domain error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import closed
from .core import make_cosmology, make_params, s_cosine_factor, x_parameter
from .dist import stream
from .errors import (
    ConfigError,
    FzzLabError,
    NumericalError,
    ParameterError,
    ReportIOError,
    SimulationError,
)
from .report import VerificationReport, append_reports, summarize, write_csv, write_reports
from .verify import CONSISTENCY_GAMMAS, TOL_ALGEBRAIC, TOL_LAPLACE, TOL_QUADRATURE_1D, TOL_QUADRATURE_2D

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3

THREADS_ENV = "FZZLAB_THREADS"
BANNER = "=" * 69

FORMULAS = (
    "u_fzz",
    "u0_bar",
    "u_mu_zero",
    "r_bar",
    "mot_variance",
    "gmc_moment_h",
    "selberg_rhs",
    "laplace_area",
    "area_law",
)
SUITES = ("identities", "cone", "gmc")
DUMPS = ("cone", "gmc")

# tolerance names accepted by --tol, with their defaults
DEFAULT_TOLERANCES: Dict[str, float] = {
    "algebraic": TOL_ALGEBRAIC,
    "quadrature_1d": TOL_QUADRATURE_1D,
    "laplace": TOL_LAPLACE,
    "quadrature_2d": TOL_QUADRATURE_2D,
    "u0_bar": 0.05,
    "conditional_area": 0.10,
    "bulk_moment": 0.10,
    "u_end_to_end": 0.15,
    "ks_alpha": 0.01,
}

# reference configurations; n is the default sample count
PRESETS: Dict[str, Dict[str, object]] = {
    "cone-small": {"suite": "cone", "rel_dt": 1e-3, "eps": 1e-2, "n": 20_000, "depth": 30},
    "cone-reference": {"suite": "cone", "rel_dt": 1e-5, "eps": 1e-3, "n": 100_000, "depth": 30},
    "boundary-small": {"suite": "gmc", "lattice": "boundary-small", "n": 2_000},
    "boundary-reference": {"suite": "gmc", "lattice": "boundary-reference", "n": 10_000},
    "bulk-small": {"suite": "gmc", "lattice": "bulk-small", "n": 2_000},
    "bulk-reference": {"suite": "gmc", "lattice": "bulk-reference", "n": 10_000},
}
DEFAULT_PRESET = {"cone": "cone-small", "gmc": "boundary-small"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    target: str
    gamma: float = 1.0
    gamma_grid: Tuple[float, ...] = ()
    alpha: Optional[float] = None
    mu: float = 1.0
    mu_b: float = 1.0
    seed: int = 0
    n_samples: Optional[int] = None
    preset: Optional[str] = None
    tolerances: Tuple[Tuple[str, float], ...] = ()
    out: Optional[str] = None
    dump_path: Optional[str] = None
    threads: int = 1
    ell: float = 1.0
    order: int = 1
    verbose: bool = False

    def tolerance(self, name: str) -> float:
        overrides = dict(self.tolerances)
        return overrides.get(name, DEFAULT_TOLERANCES[name])

    def preset_for(self, suite: str) -> str:
        """The selected preset when it belongs to suite, else that suite's default."""
        if self.preset is not None and PRESETS[self.preset]["suite"] == suite:
            return self.preset
        return DEFAULT_PRESET[suite]

    def preset_value(self, suite: str, key: str):
        return PRESETS[self.preset_for(suite)][key]

    def samples(self, suite: str) -> int:
        if self.n_samples is not None:
            return self.n_samples
        return int(self.preset_value(suite, "n"))

    def rng(self, stream_id: int = 0):
        return stream(self.seed, stream_id)

    def echo(self) -> Dict[str, object]:
        out = asdict(self)
        out["tolerances"] = dict(self.tolerances)
        return {k: v for k, v in out.items() if v not in (None, {}, ())}


# ==================== PARSING ====================

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _gamma_list(text: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text}")
    if not values:
        raise argparse.ArgumentTypeError("empty gamma grid")
    return values


def _tolerance(text: str) -> Tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text}")
    if name not in DEFAULT_TOLERANCES:
        raise argparse.ArgumentTypeError(f"unknown tolerance '{name}' (known: {', '.join(DEFAULT_TOLERANCES)})")
    try:
        tol = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name} is not a number: {value}")
    if not (math.isfinite(tol) and tol > 0.0):
        raise argparse.ArgumentTypeError(f"tolerance {name} must be finite and > 0")
    return name, tol


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, default=1.0, help="coupling in (0, 2)")
    p.add_argument("--alpha", type=float, default=None, help="insertion weight")
    p.add_argument("--mu", type=float, default=1.0, help="bulk cosmological constant")
    p.add_argument("--mu-b", dest="mu_b", type=float, default=1.0, help="boundary cosmological constant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", dest="n_samples", type=_positive_int, default=None, help="samples or draws")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--tol", dest="tolerances", type=_tolerance, action="append", default=[],
                   metavar="NAME=VALUE", help="override a tolerance; repeatable")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV}, else CPU count)")
    p.add_argument("--out", default=None, help="also append JSON-lines reports to this file")
    p.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fzzlab", description="FZZ formula verification lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a closed-form formula")
    p_eval.add_argument("target", choices=FORMULAS)
    p_eval.add_argument("--ell", type=float, default=1.0, help="boundary length for laplace_area")
    p_eval.add_argument("--order", type=_positive_int, default=1, help="n for selberg_rhs")
    _common(p_eval)

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("target", choices=SUITES + ("all",))
    p_verify.add_argument("--gamma-grid", dest="gamma_grid", type=_gamma_list, nargs="?", const=CONSISTENCY_GAMMAS,
                          default=(), metavar="G1,G2,...",
                          help="run the identity checks at each gamma (bare flag: the reference grid)")
    _common(p_verify)

    p_dump = sub.add_parser("dump", help="write raw samples as CSV")
    p_dump.add_argument("target", choices=DUMPS)
    p_dump.add_argument("--path", dest="dump_path", default=None, help="CSV path (default: <target>_samples.csv)")
    _common(p_dump)
    return parser


def resolve_threads(flag: Optional[int], environ=None) -> int:
    """Flag wins over the environment variable, which wins over the CPU count."""
    if flag is not None:
        return flag
    environ = os.environ if environ is None else environ
    raw = environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer")
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
        return value
    return os.cpu_count() or 1


def config_from_args(args: argparse.Namespace, environ=None) -> RunConfig:
    preset = args.preset
    if preset is not None and args.command != "eval":
        suite = PRESETS[preset]["suite"]
        if args.target not in (suite, "all"):
            raise ConfigError(f"preset '{preset}' belongs to the {suite} suite, not {args.target}")
    return RunConfig(
        command=args.command,
        target=args.target,
        gamma=args.gamma,
        gamma_grid=tuple(getattr(args, "gamma_grid", ()) or ()),
        alpha=args.alpha,
        mu=args.mu,
        mu_b=args.mu_b,
        seed=args.seed,
        n_samples=args.n_samples,
        preset=preset,
        tolerances=tuple(args.tolerances),
        out=args.out,
        dump_path=getattr(args, "dump_path", None),
        threads=resolve_threads(args.threads, environ),
        ell=getattr(args, "ell", 1.0),
        order=getattr(args, "order", 1),
        verbose=args.verbose,
    )


# ==================== CONSOLE ====================

def _say(text: str = "") -> None:
    print(text, file=sys.stderr)


def print_banner(title: str, subtitle: str = "") -> None:
    _say(BANNER)
    _say(f" {title}")
    if subtitle:
        _say(f" {subtitle}")
    _say(BANNER)


def print_report_line(report: VerificationReport) -> None:
    mark = "✓ PASS" if report.passed else "✗ FAIL"
    detail = f"estimate={report.estimate:.10g} target={report.target:.10g} rel_err={report.rel_err:.3g}"
    _say(f"  {mark}: {report.check} ({detail})")
    notes = report.notes
    if notes.get("ess_warning"):
        _say(f"  ⚠ {report.check}: effective sample size {report.ess:.1f} below floor")
    if notes.get("tail_bound", 0.0) > 0.01:
        _say(f"  ⚠ {report.check}: truncation tail bound {notes['tail_bound']:.3g} exceeds 1%")


def print_summary(reports: List[VerificationReport]) -> None:
    counts = summarize(reports)
    _say()
    _say(BANNER)
    _say(f"RESULT: {counts['passed']}/{counts['total']} checks passed")
    _say(BANNER)


# ==================== COMMANDS ====================

def _require_alpha(config: RunConfig) -> float:
    if config.alpha is None:
        raise ConfigError(f"{config.target} needs --alpha")
    return config.alpha


def cmd_eval(config: RunConfig, out=None) -> int:
    """Evaluate one closed form; prints a JSON object with value, diagnostics and echo."""
    out = sys.stdout if out is None else out
    params = make_params(config.gamma)
    name = config.target
    diagnostics: Dict[str, object] = {}
    if name == "u_fzz":
        alpha = _require_alpha(config)
        cosmo = make_cosmology(params, config.mu, config.mu_b)
        diagnostics = {
            "branch": cosmo.branch.value,
            "x": x_parameter(params, config.mu, config.mu_b),
            "cosine_factor": s_cosine_factor(params, alpha, cosmo),
        }
        value = closed.u_fzz(params, alpha, cosmo)
    elif name == "u0_bar":
        value = closed.u0_bar(params, _require_alpha(config))
    elif name == "u_mu_zero":
        value = closed.u_mu_zero(params, _require_alpha(config), config.mu_b)
    elif name == "r_bar":
        value = closed.r_bar(params)
    elif name == "mot_variance":
        value = closed.mot_variance(params)
        diagnostics = {"from_ratio": closed.mot_variance_from_ratio(params)}
    elif name == "gmc_moment_h":
        value = closed.gmc_moment_h(params, _require_alpha(config))
    elif name == "selberg_rhs":
        value = closed.selberg_rhs(params, config.order)
    elif name == "laplace_area":
        value = closed.laplace_area(params, _require_alpha(config), config.ell, config.mu)
    else:
        law = closed.area_law_alpha(params, _require_alpha(config))
        value = law.shape / law.scale
        diagnostics = {"shape": law.shape, "scale": law.scale, "provenance": law.provenance.value}
    payload = {"formula": name, "value": value, "diagnostics": diagnostics, "config": config.echo()}
    _say(f"{name} = {value!r}")
    try:
        out.write(json.dumps(payload, default=str) + "\n")
        out.flush()
    except OSError as e:
        raise ReportIOError(getattr(out, "name", "<stdout>"), str(e)) from e
    return EXIT_PASS


SuiteLoader = Callable[[str], object]


def cmd_verify(config: RunConfig, load_suite: SuiteLoader, out=None) -> int:
    """Run the selected suites; exit 0 iff every report passes."""
    out = sys.stdout if out is None else out
    names = SUITES if config.target == "all" else (config.target,)
    reports: List[VerificationReport] = []
    for name in names:
        suite = load_suite(name)
        if suite is None:
            raise ConfigError(f"suite '{name}' not found")
        print_banner(f"SUITE: {name.upper()}", f"gamma={config.gamma} seed={config.seed} threads={config.threads}")
        started = time.perf_counter()
        produced = list(suite.run_suite(config))
        echo = config.echo()
        for rep in produced:
            rep.notes.setdefault("config", echo)
            if rep.seed is None and rep.n_samples is not None:
                rep.seed = config.seed
            print_report_line(rep)
        write_reports(produced, out)
        if config.out:
            append_reports(produced, config.out)
        logger.debug("suite %s: %d reports in %.2fs", name, len(produced), time.perf_counter() - started)
        reports.extend(produced)
    print_summary(reports)
    return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL


def cmd_dump(config: RunConfig, load_suite: SuiteLoader) -> int:
    """Write raw samples of one suite to CSV, with a JSON sidecar."""
    suite = load_suite(config.target)
    if suite is None or not hasattr(suite, "dump_samples"):
        raise ConfigError(f"no sample dump for '{config.target}'")
    path = config.dump_path or f"{config.target}_samples.csv"
    header, rows, sidecar = suite.dump_samples(config)
    sidecar = dict(sidecar)
    sidecar["config"] = config.echo()
    count = write_csv(path, header, rows, sidecar)
    _say(f"✓ wrote {count} rows to {path}")
    return EXIT_PASS


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None, load_suite: Optional[SuiteLoader] = None, environ=None) -> int:
    """Parse, dispatch and map errors to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_PASS if e.code == 0 else EXIT_USAGE
    configure_logging(args.verbose)
    try:
        config = config_from_args(args, environ)
        if config.command == "eval":
            return cmd_eval(config)
        if load_suite is None:
            raise ConfigError("no suite loader available")
        if config.command == "verify":
            return cmd_verify(config, load_suite)
        return cmd_dump(config, load_suite)
    except ParameterError as e:
        _say(f"❌ {e}")
        return EXIT_USAGE
    except ReportIOError as e:
        _say(f"❌ {e}")
        return EXIT_IO
    except OSError as e:
        _say(f"❌ I/O error: {e}")
        return EXIT_IO
    except (NumericalError, SimulationError) as e:
        _say(f"✗ FAIL: {e}")
        return EXIT_FAIL
    except FzzLabError as e:
        _say(f"❌ {e}")
        return EXIT_FAIL
