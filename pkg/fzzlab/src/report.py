"""
Verification reports and sample dumps.

A report is one JSON object per line; dumps are CSV with a JSON sidecar
describing how the rows were produced.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, IO, Iterable, List, Optional, Sequence

from .errors import ReportIOError

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"


@dataclass
class VerificationReport:
    check: str
    params: Dict[str, Any]
    target: float
    estimate: float
    abs_err: float
    rel_err: float
    tolerance: float
    verdict: str
    criterion: str = "rel_err <= tolerance"
    stderr: Optional[float] = None
    ess: Optional[float] = None
    n_samples: Optional[int] = None
    seed: Optional[int] = None
    runtime_ms: float = 0.0
    notes: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        return {k: _jsonable(v) for k, v in out.items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value


def _elapsed_ms(started: Optional[float]) -> float:
    return 0.0 if started is None else (time.perf_counter() - started) * 1000.0


def deterministic_report(
    check: str,
    params: Dict[str, Any],
    target: float,
    estimate: float,
    tolerance: float,
    started: Optional[float] = None,
    abs_floor: float = 0.0,
    notes: Optional[Dict[str, Any]] = None,
) -> VerificationReport:
    """Pass iff |estimate - target| <= max(tolerance * |target|, abs_floor)."""
    abs_err = abs(estimate - target)
    scale = abs(target)
    rel_err = abs_err / scale if scale > 0.0 else (0.0 if abs_err == 0.0 else math.inf)
    ok = math.isfinite(abs_err) and abs_err <= max(tolerance * scale, abs_floor)
    criterion = "rel_err <= tolerance"
    if abs_floor > 0.0:
        criterion = f"abs_err <= max(tolerance * |target|, {abs_floor:g})"
    return VerificationReport(
        check=check,
        params=dict(params),
        target=target,
        estimate=estimate,
        abs_err=abs_err,
        rel_err=rel_err,
        tolerance=tolerance,
        verdict=PASS if ok else FAIL,
        criterion=criterion,
        runtime_ms=_elapsed_ms(started),
        notes=dict(notes or {}),
    )


def statistical_report(
    check: str,
    params: Dict[str, Any],
    target: float,
    estimate: float,
    stderr: float,
    rel_tol: float = 0.0,
    n_sigma: float = 3.0,
    started: Optional[float] = None,
    **extra,
) -> VerificationReport:
    """Pass iff |estimate - target| <= max(rel_tol * |target|, n_sigma * stderr)."""
    abs_err = abs(estimate - target)
    rel_err = abs_err / abs(target) if target != 0.0 else abs_err
    bound = max(rel_tol * abs(target), n_sigma * stderr)
    ok = math.isfinite(abs_err) and abs_err <= bound
    notes = dict(extra.pop("notes", None) or {})
    notes.setdefault("acceptance_bound", bound)
    return VerificationReport(
        check=check,
        params=dict(params),
        target=target,
        estimate=estimate,
        abs_err=abs_err,
        rel_err=rel_err,
        tolerance=rel_tol,
        verdict=PASS if ok else FAIL,
        criterion=f"abs_err <= max({rel_tol:g} * |target|, {n_sigma:g} * stderr)",
        stderr=stderr,
        runtime_ms=_elapsed_ms(started),
        notes=notes,
        **extra,
    )


def ks_report(
    check: str,
    params: Dict[str, Any],
    statistic: float,
    p_value: float,
    alpha: float = 0.01,
    started: Optional[float] = None,
    **extra,
) -> VerificationReport:
    """Pass iff the KS p-value exceeds alpha; target is alpha, estimate the p-value."""
    notes = dict(extra.pop("notes", None) or {})
    notes["ks_statistic"] = statistic
    return VerificationReport(
        check=check,
        params=dict(params),
        target=alpha,
        estimate=p_value,
        abs_err=statistic,
        rel_err=statistic,
        tolerance=alpha,
        verdict=PASS if p_value > alpha else FAIL,
        criterion=f"ks p_value > {alpha:g}",
        runtime_ms=_elapsed_ms(started),
        notes=notes,
        **extra,
    )


def write_reports(reports: Iterable[VerificationReport], stream: IO[str]) -> None:
    try:
        for rep in reports:
            stream.write(rep.to_json() + "\n")
        stream.flush()
    except OSError as e:
        raise ReportIOError(getattr(stream, "name", "<stream>"), str(e)) from e


def append_reports(reports: Sequence[VerificationReport], path: str) -> None:
    try:
        with open(path, "a", encoding="utf-8") as f:
            write_reports(reports, f)
    except OSError as e:
        raise ReportIOError(path, str(e)) from e


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]], sidecar: Optional[Dict[str, Any]] = None) -> int:
    """Write rows to path; returns the row count. The sidecar goes to path + '.json'."""
    count = 0
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(list(header))
            for row in rows:
                writer.writerow([_csv_cell(v) for v in row])
                count += 1
        if sidecar is not None:
            meta = dict(sidecar)
            meta["rows"] = count
            with open(path + ".json", "w", encoding="utf-8") as f:
                json.dump(_jsonable(meta), f, indent=2, sort_keys=True)
                f.write("\n")
    except OSError as e:
        raise ReportIOError(path, str(e)) from e
    logger.debug("wrote %d rows to %s", count, path)
    return count


def _csv_cell(value):
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return value


def summarize(reports: List[VerificationReport]) -> Dict[str, int]:
    passed = sum(1 for r in reports if r.passed)
    return {"total": len(reports), "passed": passed, "failed": len(reports) - passed}
