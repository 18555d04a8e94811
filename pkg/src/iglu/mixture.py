"""Numerical check that the half-normal scale mixture of GELU gates is the
Cauchy-CDF gate.

The mixture ``Z(x; sigma) = int_0^inf Phi(a x) f(a; sigma) da`` with the
half-normal density ``f`` is evaluated two independent ways:

* adaptive Gauss-Kronrod (7/15) quadrature on ``[0, 12 sigma]``; the dropped
  tail carries mass ``erfc(12/sqrt 2) < 2e-33``;
* Monte Carlo over ``a = sigma |g|`` with ``g`` standard normal.

Both are compared against :func:`iglu.gates.iglu_gate`.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from iglu.gates import gaussian_cdf, iglu_gate

TRUNCATION_SIGMAS = 12.0

# 15-point Kronrod nodes on [-1, 1] (non-negative half) and weights, with the
# embedded 7-point Gauss weights at the odd-indexed nodes (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[[13, 11, 9]] = _WG[:3]
_GAUSS_W[7] = _WG[3]


class QuadratureError(RuntimeError):
    """Adaptive quadrature ran out of budget; ``result`` holds the best estimate."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class VerificationError(AssertionError):
    def __init__(self, message, x, sigma, deviation):
        super().__init__(message)
        self.x = x
        self.sigma = sigma
        self.deviation = deviation


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


def gauss_kronrod_15(f, a: float, b: float) -> tuple[float, float]:
    """K15 estimate of int_a^b f and the |K15 - G7| error estimate."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = np.asarray(f(mid + half * _NODES), dtype=np.float64)
    k = half * float(_KRONROD_W @ y)
    g = half * float(_GAUSS_W @ y)
    return k, abs(k - g)


def adaptive_quad(f: Callable[[np.ndarray], np.ndarray], breakpoints: Sequence[float],
                  tol: float, max_evals: int = 300_000) -> QuadratureResult:
    """Globally adaptive G7/K15 quadrature.

    ``f`` must be vectorised.  ``breakpoints`` is the sorted initial partition
    of the domain; the interval with the largest error estimate is bisected
    until the summed estimate is at most ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    pts = sorted(set(float(p) for p in breakpoints))
    if len(pts) < 2:
        raise ValueError("need at least two breakpoints")
    heap = []
    total = 0.0
    err = 0.0
    evals = 0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = gauss_kronrod_15(f, lo, hi)
        evals += 15
        heapq.heappush(heap, (-e, lo, hi, v))
        total += v
        err += e
    while err > tol:
        if evals + 30 > max_evals:
            best = QuadratureResult(total, err, evals)
            raise QuadratureError(
                f"no convergence after {evals} evaluations (error {err:.3e} > {tol:.3e})", best)
        neg_e, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            # interval cannot be split further in floating point
            best = QuadratureResult(total, err, evals)
            raise QuadratureError("interval underflow during bisection", best)
        v1, e1 = gauss_kronrod_15(f, lo, mid)
        v2, e2 = gauss_kronrod_15(f, mid, hi)
        evals += 30
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        total += v1 + v2 - v
        err += e1 + e2 + neg_e
    # re-sum to shed the drift of the running updates
    total = math.fsum(item[3] for item in heap)
    err = math.fsum(-item[0] for item in heap)
    return QuadratureResult(total, err, evals)


@dataclass(frozen=True)
class HalfNormalDensity:
    """Density of ``sigma |G|`` for standard normal ``G``."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("half-normal sigma must be positive")

    def __call__(self, a):
        s = self.sigma
        a = np.asarray(a, dtype=np.float64)
        return 2.0 / (s * math.sqrt(2.0 * math.pi)) * np.exp(-0.5 * (a / s) ** 2)

    @property
    def upper(self) -> float:
        return TRUNCATION_SIGMAS * self.sigma

    def breakpoints(self, feature_scale: float | None = None) -> list[float]:
        """Initial partition of ``[0, 12 sigma]``.

        Splits at multiples of sigma and, when the integrand has a second
        length scale (``1/|x|`` for the mixture), at multiples of that too so
        that a narrow transition near 0 cannot slip between the nodes.
        """
        s = self.sigma
        up = self.upper
        pts = {0.0, up}
        pts.update(c * s for c in (0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0))
        if feature_scale is not None:
            pts.update(c * feature_scale for c in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0))
        return sorted(p for p in pts if 0.0 <= p <= up)


def z_by_quadrature(x: float, sigma: float, tol: float = 1e-10,
                    max_evals: int = 300_000) -> QuadratureResult:
    density = HalfNormalDensity(sigma)
    x = float(x)

    def integrand(a):
        return gaussian_cdf(a * x) * density(a)

    scale = 1.0 / abs(x) if x != 0.0 else None
    return adaptive_quad(integrand, density.breakpoints(scale), tol, max_evals)


def half_normal_mass(sigma: float, tol: float = 1e-12) -> QuadratureResult:
    density = HalfNormalDensity(sigma)
    return adaptive_quad(density, density.breakpoints(), tol)


def inner_integral(s: float, sigma: float, tol: float = 1e-12) -> QuadratureResult:
    """Quadrature of ``int_0^inf a exp(-a^2 (sigma^-2 + s^2) / 2) da``.

    Closed form: ``sigma^2 / (1 + sigma^2 s^2)``.
    """
    c = sigma ** -2 + s * s

    def integrand(a):
        return a * np.exp(-0.5 * c * a * a)

    up = TRUNCATION_SIGMAS / math.sqrt(c)
    return adaptive_quad(integrand, np.linspace(0.0, up, 9), tol)


def z_by_monte_carlo(x: float, sigma: float, n: int, seed: int) -> float:
    """Sample mean of ``Phi(a x)`` with ``a = sigma |g|``.

    Draws come from numpy's PCG64 bit generator seeded with ``seed``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    a = sigma * np.abs(rng.standard_normal(int(n)))
    return float(np.mean(gaussian_cdf(a * float(x))))


@dataclass
class MixtureReport:
    max_abs_dev: float
    argmax_x: float
    argmax_sigma: float
    pairs_checked: int
    tol: float
    passed: bool
    violations: int = 0
    schema: str = field(default="iglu-verify-mixture/1")

    def to_dict(self) -> dict:
        return asdict(self)


def default_grid() -> tuple[np.ndarray, tuple[float, ...]]:
    return np.linspace(-50.0, 50.0, 201), (0.1, 0.5, 1.0, 5.0, 10.0)


def verify_closed_form(grid_x: Sequence[float], grid_sigma: Sequence[float],
                       tol: float = 1e-8, quad_tol: float = 1e-11,
                       raise_on_violation: bool = False) -> MixtureReport:
    """Compare quadrature of the mixture with the closed-form gate on a grid."""
    xs = [float(v) for v in grid_x]
    ss = [float(v) for v in grid_sigma]
    if not xs or not ss:
        raise ValueError("grids must be non-empty")
    worst = (-1.0, math.nan, math.nan)
    violations = 0
    for s in ss:
        for x in xs:
            q = z_by_quadrature(x, s, quad_tol)
            dev = abs(q.value - iglu_gate(x, s))
            if dev > worst[0]:
                worst = (dev, x, s)
            if dev > tol:
                violations += 1
                if raise_on_violation:
                    raise VerificationError(
                        f"|quadrature - closed form| = {dev:.3e} > {tol:.3e} at x={x}, sigma={s}",
                        x, s, dev)
    return MixtureReport(max_abs_dev=worst[0], argmax_x=worst[1], argmax_sigma=worst[2],
                         pairs_checked=len(xs) * len(ss), tol=tol,
                         passed=violations == 0, violations=violations)
