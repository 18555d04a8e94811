"""Scalar gate functions g(x) for self-gated activations f(x) = x * g(x).

Every function here accepts a Python float or a numpy array and returns the
same kind of object.  These are the numpy reference implementations; the
fused elementwise kernels in :mod:`iglu.activations` are checked against them.

Conventions
-----------
* ``step(0) == 1`` so that ``x * step(x) == max(0, x)`` everywhere.
* The IGLU gate is evaluated as ``atan2(1, -sigma*x) / pi``, which equals
  ``1/2 + atan(sigma*x)/pi`` but keeps full relative precision in the
  negative tail, where the naive form cancels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy import special

ArrayLike = Union[float, np.ndarray]

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
GELU_TANH_COEFF = 0.044715


class DomainError(ValueError):
    """Input outside the domain of a gate function."""


def _asarray(x):
    return np.asarray(x, dtype=np.float64)


def _wrap(x_in, out):
    if np.ndim(x_in) == 0:
        return float(out)
    return out


def _require_finite(x, name="x"):
    arr = _asarray(x)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def softplus(raw: ArrayLike) -> ArrayLike:
    return _wrap(raw, np.logaddexp(0.0, _asarray(raw)))


def inverse_softplus(value: float) -> float:
    """Unconstrained pre-image of a strictly positive value under softplus."""
    if not value > 0:
        raise DomainError("softplus pre-image requires value > 0")
    return float(value + math.log(-math.expm1(-value)))


@dataclass(frozen=True)
class SharpnessParam:
    """The sharpness sigma >= 0 of the IGLU gate.

    In ``"learnable"`` mode the stored ``value`` is always
    ``softplus(raw)`` and the optimizer updates ``raw``.  Instances are
    immutable; :meth:`with_raw` returns the updated snapshot.
    """

    value: float
    mode: str = "fixed"
    raw: float | None = None

    def __post_init__(self):
        if self.mode == "learnable":
            if self.raw is None or not math.isfinite(self.raw):
                raise DomainError("learnable sigma needs a finite raw value")
            value = float(softplus(float(self.raw)))
            if value <= 0.0:
                raise DomainError(f"raw={self.raw} underflows sigma to 0")
            object.__setattr__(self, "value", value)
        elif self.mode == "fixed":
            if not (math.isfinite(self.value) and self.value >= 0.0):
                raise DomainError(f"sigma must be finite and >= 0, got {self.value}")
            object.__setattr__(self, "value", float(self.value))
            object.__setattr__(self, "raw", None)
        else:
            raise DomainError(f"unknown sigma mode {self.mode!r}")

    @classmethod
    def fixed(cls, value: float) -> "SharpnessParam":
        return cls(value=float(value), mode="fixed")

    @classmethod
    def learnable(cls, value: float) -> "SharpnessParam":
        """Learnable sigma initialised at ``value`` (> 0)."""
        return cls(value=float(value), mode="learnable", raw=inverse_softplus(value))

    @classmethod
    def from_raw(cls, raw: float) -> "SharpnessParam":
        return cls(value=0.0, mode="learnable", raw=float(raw))

    @property
    def learnable_mode(self) -> bool:
        return self.mode == "learnable"

    def dvalue_draw(self) -> float:
        """d sigma / d raw (the logistic function); 1 in fixed mode."""
        if self.mode != "learnable":
            return 1.0
        return float(special.expit(self.raw))

    def with_raw(self, raw: float) -> "SharpnessParam":
        if self.mode != "learnable":
            raise DomainError("with_raw() needs a learnable sigma")
        return replace(self, raw=float(raw))


def as_sharpness(sigma) -> SharpnessParam:
    if isinstance(sigma, SharpnessParam):
        return sigma
    return SharpnessParam.fixed(float(sigma))


def step(x: ArrayLike) -> ArrayLike:
    """Heaviside step with ``step(0) = 1``; raises on non-finite input."""
    arr = _require_finite(x)
    return _wrap(x, np.where(arr < 0.0, 0.0, 1.0))


def gaussian_cdf(x: ArrayLike) -> ArrayLike:
    """Standard normal CDF, computed as ``erfc(-x/sqrt(2))/2``.

    The erfc form keeps relative accuracy deep in the lower tail, which the
    textbook ``(1 + erf(x/sqrt 2))/2`` loses to cancellation.
    """
    arr = _require_finite(x)
    return _wrap(x, 0.5 * special.erfc(-arr / _SQRT2))


def gaussian_pdf(x: ArrayLike) -> ArrayLike:
    arr = _asarray(x)
    return _wrap(x, np.exp(-0.5 * arr * arr) / math.sqrt(2.0 * math.pi))


def gelu_a_gate(x: ArrayLike, a: float) -> ArrayLike:
    if not a >= 0:
        raise DomainError("a must be >= 0")
    return _wrap(x, gaussian_cdf(a * _asarray(x)))


def tanh_gelu_gate(x: ArrayLike) -> ArrayLike:
    arr = _asarray(x)
    u = _SQRT_2_OVER_PI * (arr + GELU_TANH_COEFF * arr**3)
    # (1 + tanh u)/2 written as sigmoid(2u): same value, no tail cancellation
    return _wrap(x, special.expit(2.0 * u))


def logistic(x: ArrayLike) -> ArrayLike:
    return _wrap(x, special.expit(_asarray(x)))


def mish_gate(x: ArrayLike) -> ArrayLike:
    return _wrap(x, np.tanh(np.logaddexp(0.0, _asarray(x))))


def hardswish_gate(x: ArrayLike) -> ArrayLike:
    return _wrap(x, np.clip(_asarray(x) + 3.0, 0.0, 6.0) / 6.0)


def _cauchy_kernel(u):
    # 1 / (1 + u^2) without overflowing for huge |u|
    u = _asarray(u)
    big = np.abs(u) > 1.0
    w = np.divide(1.0, u, out=np.zeros_like(u), where=big)
    small = np.where(big, 0.0, u)
    return np.where(big, w * w / (1.0 + w * w), 1.0 / (1.0 + small * small))


def iglu_gate(x: ArrayLike, sigma) -> ArrayLike:
    """Cauchy-CDF gate ``1/2 + arctan(sigma*x)/pi``; identically 1/2 at sigma=0."""
    s = as_sharpness(sigma).value
    u = s * _asarray(x)
    return _wrap(x, np.arctan2(1.0, -u) / math.pi)


def iglu_gate_dx(x: ArrayLike, sigma) -> ArrayLike:
    s = as_sharpness(sigma).value
    arr = _asarray(x)
    return _wrap(x, s * _cauchy_kernel(s * arr) / math.pi)


def iglu_gate_dsigma(x: ArrayLike, sigma) -> ArrayLike:
    """Partial derivative of the gate with respect to sigma itself.

    Learnable callers must multiply by ``sigma.dvalue_draw()``.
    """
    s = as_sharpness(sigma).value
    arr = _asarray(x)
    return _wrap(x, arr * _cauchy_kernel(s * arr) / math.pi)


def relu(x: ArrayLike) -> ArrayLike:
    return _wrap(x, np.maximum(0.0, _asarray(x)))


def iglu_gate_approx(x: ArrayLike, sigma) -> ArrayLike:
    """Rational gate built only from ReLUs:
    ``(1 + 2 relu(s x)) / (2 (1 + relu(s x) + relu(-s x)))``.
    """
    s = as_sharpness(sigma).value
    u = s * _asarray(x)
    pos = np.maximum(0.0, u)
    neg = np.maximum(0.0, -u)
    return _wrap(x, 0.5 * (1.0 + 2.0 * pos) / (1.0 + pos + neg))


def arctan_rational(u: ArrayLike) -> ArrayLike:
    arr = _asarray(u)
    return _wrap(u, (math.pi / 2.0) * arr / (1.0 + np.abs(arr)))


def cauchy_cdf(x: ArrayLike, scale: float) -> ArrayLike:
    if not (scale > 0 and math.isfinite(scale)):
        raise DomainError(f"Cauchy scale must be positive, got {scale}")
    return _wrap(x, np.arctan2(scale, -_asarray(x)) / math.pi)
