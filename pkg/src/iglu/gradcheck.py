"""Central finite-difference checks for analytic derivatives."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

REL_FLOOR = 1e-12
STEP = 1e-6


class GradCheckUsageError(ValueError):
    pass


@dataclass
class GradCheckReport:
    points_checked: int
    max_rel_error: float
    argmax_point: float
    tolerance: float
    passed: bool
    excluded_points: list = field(default_factory=list)
    label: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _split(points, exclusions):
    pts = np.asarray(points, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(pts)):
        raise GradCheckUsageError("points must be finite")
    mask = np.ones(pts.shape, dtype=bool)
    for center, radius in exclusions:
        mask &= ~(np.abs(pts - center) <= radius)
    kept = pts[mask]
    if kept.size == 0:
        raise GradCheckUsageError("no points left after exclusions")
    return kept, [float(p) for p in pts[~mask]]


def _report(analytic, numeric, kept, excluded, tol, label):
    analytic = np.asarray(analytic, dtype=np.float64)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic), REL_FLOOR)
    i = int(np.argmax(rel))
    worst = float(rel[i])
    return GradCheckReport(points_checked=int(kept.size), max_rel_error=worst,
                           argmax_point=float(kept[i]), tolerance=tol,
                           passed=bool(worst <= tol), excluded_points=excluded, label=label)


def check_derivative(f: Callable, df: Callable, points: Sequence[float], tol: float = 1e-6,
                     exclusions: Sequence[tuple[float, float]] = (), label: str = "") -> GradCheckReport:
    """Compare ``df(x)`` to ``(f(x+h) - f(x-h)) / 2h`` with ``h = 1e-6 max(1, |x|)``.

    ``f`` and ``df`` are applied to float64 arrays and must act elementwise.
    Points within ``radius`` of any exclusion ``(center, radius)`` are skipped
    and listed in the report.
    """
    kept, excluded = _split(points, exclusions)
    h = STEP * np.maximum(1.0, np.abs(kept))
    numeric = (np.asarray(f(kept + h), dtype=np.float64)
               - np.asarray(f(kept - h), dtype=np.float64)) / (2.0 * h)
    return _report(df(kept), numeric, kept, excluded, tol, label)


def check_param_derivative(f: Callable, df: Callable, param: float, points: Sequence[float],
                           tol: float = 1e-6, exclusions: Sequence[tuple[float, float]] = (),
                           label: str = "") -> GradCheckReport:
    """Same check for a scalar parameter: ``f(p, xs)`` is differentiated in ``p``
    at every point of ``xs``; ``df(xs)`` is the analytic derivative at ``param``.
    """
    kept, excluded = _split(points, exclusions)
    h = STEP * max(1.0, abs(param))
    numeric = (np.asarray(f(param + h, kept), dtype=np.float64)
               - np.asarray(f(param - h, kept), dtype=np.float64)) / (2.0 * h)
    return _report(df(kept), numeric, kept, excluded, tol, label)
