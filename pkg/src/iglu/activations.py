"""Elementwise activation zoo: forward, input gradient and parameter gradient.

Formulas (``Z`` is the IGLU gate, ``Phi`` the standard normal CDF)::

    identity     x
    relu         x * step(x)                      step(0) = 1
    gelu_exact   x * Phi(x)
    gelu_tanh    x/2 * (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
    gelu_a       x * Phi(a x)
    iglu         x * (1/2 + atan(sigma x)/pi)
    iglu_approx  x/2 * (1 + 2 relu(sigma x)) / (1 + relu(sigma x) + relu(-sigma x))
    silu         x * sigmoid(x)
    mish         x * tanh(softplus(x))
    hardswish    x * relu6(x + 3) / 6

All kernels compute in float64 and write into the requested output dtype
(float32 by default).  Derivative conventions at kinks: relu'(0) = 1;
hardswish' is (2x+3)/6 on the closed interval [-3, 3], 0 below and 1 above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from iglu import _kernels as K
from iglu import gates
from iglu.gates import SharpnessParam, as_sharpness


class Kind(str, Enum):
    IDENTITY = "identity"
    RELU = "relu"
    GELU_EXACT = "gelu_exact"
    GELU_TANH = "gelu_tanh"
    GELU_A = "gelu_a"
    IGLU = "iglu"
    IGLU_APPROX = "iglu_approx"
    SILU = "silu"
    MISH = "mish"
    HARDSWISH = "hardswish"


SIGMA_KINDS = frozenset({Kind.IGLU, Kind.IGLU_APPROX})

# kind -> (forward core, d/dx core, d/dparam core or None)
_CORE_TABLE = {
    Kind.IDENTITY: (K.f_identity, K.dx_identity, None),
    Kind.RELU: (K.f_relu, K.dx_relu, None),
    Kind.GELU_EXACT: (K.f_gelu_exact, K.dx_gelu_exact, None),
    Kind.GELU_TANH: (K.f_gelu_tanh, K.dx_gelu_tanh, None),
    Kind.GELU_A: (K.f_gelu_a, K.dx_gelu_a, K.dp_gelu_a),
    Kind.IGLU: (K.f_iglu, K.dx_iglu, K.dp_iglu),
    Kind.IGLU_APPROX: (K.f_iglu_approx, K.dx_iglu_approx, K.dp_iglu_approx),
    Kind.SILU: (K.f_silu, K.dx_silu, None),
    Kind.MISH: (K.f_mish, K.dx_mish, None),
    Kind.HARDSWISH: (K.f_hardswish, K.dx_hardswish, None),
}
_CORES = {kind: tuple(None if c is None else K.make_loop(c) for c in cores)
          for kind, cores in _CORE_TABLE.items()}


class ActivationError(ValueError):
    pass


class NonFiniteInputError(ActivationError):
    def __init__(self, index: int, value: float):
        super().__init__(f"non-finite input {value!r} at index {index}")
        self.index = index
        self.value = value


@dataclass(frozen=True)
class ActivationSpec:
    """One member of the activation zoo plus its parameters."""

    kind: Kind
    sigma: SharpnessParam | None = None
    a: float | None = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in SIGMA_KINDS:
            if self.sigma is None:
                raise ActivationError(f"{kind.value} requires sigma")
            object.__setattr__(self, "sigma", as_sharpness(self.sigma))
        elif self.sigma is not None:
            raise ActivationError(f"{kind.value} takes no sigma")
        if kind is Kind.GELU_A:
            if self.a is None or not (math.isfinite(self.a) and self.a >= 0):
                raise ActivationError("gelu_a requires a finite a >= 0")
            object.__setattr__(self, "a", float(self.a))
        elif self.a is not None:
            raise ActivationError(f"{kind.value} takes no a")

    @classmethod
    def from_name(cls, name: str, sigma: float = 1.0, a: float = 1.0,
                  learnable: bool = False) -> "ActivationSpec":
        """Build a spec from a kind name, using only the parameters it needs."""
        kind = Kind(name.lower().replace("-", "_"))
        if kind in SIGMA_KINDS:
            sp = SharpnessParam.learnable(sigma) if learnable else SharpnessParam.fixed(sigma)
            return cls(kind, sigma=sp)
        if kind is Kind.GELU_A:
            return cls(kind, a=a)
        return cls(kind)

    @property
    def param(self) -> float:
        if self.kind in SIGMA_KINDS:
            return self.sigma.value
        if self.kind is Kind.GELU_A:
            return self.a
        return 0.0

    @property
    def has_param(self) -> bool:
        return self.kind in SIGMA_KINDS or self.kind is Kind.GELU_A

    @property
    def label(self) -> str:
        if self.kind in SIGMA_KINDS:
            tag = "learnable " if self.sigma.learnable_mode else ""
            return f"{self.kind.value}({tag}sigma={self.sigma.value:g})"
        if self.kind is Kind.GELU_A:
            return f"gelu_a(a={self.a:g})"
        return self.kind.value

    def with_param(self, value: float) -> "ActivationSpec":
        """Copy with sigma / a replaced.  For a learnable sigma ``value`` is raw."""
        if self.kind is Kind.GELU_A:
            return ActivationSpec(self.kind, a=value)
        if self.kind in SIGMA_KINDS:
            if self.sigma.learnable_mode:
                return ActivationSpec(self.kind, sigma=self.sigma.with_raw(value))
            return ActivationSpec(self.kind, sigma=SharpnessParam.fixed(value))
        raise ActivationError(f"{self.kind.value} has no parameter")


SELF_GATED_ZOO = (
    ActivationSpec(Kind.RELU),
    ActivationSpec(Kind.GELU_EXACT),
    ActivationSpec(Kind.GELU_TANH),
    ActivationSpec(Kind.GELU_A, a=1.702),
    ActivationSpec(Kind.IGLU, sigma=1.0),
    ActivationSpec(Kind.IGLU_APPROX, sigma=1.0),
    ActivationSpec(Kind.SILU),
    ActivationSpec(Kind.MISH),
    ActivationSpec(Kind.HARDSWISH),
)


def _prepare(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.size == 0:
        raise ActivationError("empty input batch")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    flat = np.ascontiguousarray(arr).reshape(-1)
    finite = np.isfinite(flat)
    if not finite.all():
        idx = int(np.argmin(finite))
        raise NonFiniteInputError(idx, float(flat[idx]))
    return flat


def _run(loop, spec: ActivationSpec, x, dtype) -> np.ndarray:
    shape = np.shape(x)
    flat = _prepare(x)
    out = np.empty(flat.shape[0], dtype=dtype)
    loop(flat, spec.param, out)
    return out.reshape(shape)


def forward(spec: ActivationSpec, x, dtype=np.float32) -> np.ndarray:
    return _run(_CORES[spec.kind][0], spec, x, dtype)


def backward_x(spec: ActivationSpec, x, dtype=np.float32) -> np.ndarray:
    """Elementwise df/dx."""
    return _run(_CORES[spec.kind][1], spec, x, dtype)


def backward_param(spec: ActivationSpec, x, dtype=np.float32) -> np.ndarray:
    """Elementwise derivative with respect to the kind's parameter.

    For a learnable sigma this is df/draw (the softplus chain factor is
    applied here); for a fixed sigma it is df/dsigma, and for gelu_a df/da.
    """
    loop = _CORES[spec.kind][2]
    if loop is None:
        raise ActivationError(f"{spec.kind.value} has no parameter to differentiate")
    out = _run(loop, spec, x, np.float64)
    if spec.kind in SIGMA_KINDS and spec.sigma.learnable_mode:
        out *= spec.sigma.dvalue_draw()
    return out.astype(dtype, copy=False)


def gate(spec: ActivationSpec, x):
    """Reference gate g(x) from :mod:`iglu.gates`, so that f(x) = x * g(x)."""
    k = spec.kind
    if k is Kind.IDENTITY:
        return np.ones_like(np.asarray(x, dtype=np.float64))
    if k is Kind.RELU:
        return gates.step(x)
    if k is Kind.GELU_EXACT:
        return gates.gaussian_cdf(x)
    if k is Kind.GELU_TANH:
        return gates.tanh_gelu_gate(x)
    if k is Kind.GELU_A:
        return gates.gelu_a_gate(x, spec.a)
    if k is Kind.IGLU:
        return gates.iglu_gate(x, spec.sigma)
    if k is Kind.IGLU_APPROX:
        return gates.iglu_gate_approx(x, spec.sigma)
    if k is Kind.SILU:
        return gates.logistic(x)
    if k is Kind.MISH:
        return gates.mish_gate(x)
    return gates.hardswish_gate(x)


def compiled_kernel(spec: ActivationSpec, which: str = "forward", dtype=np.float32):
    """Unchecked ``x -> out`` callable for timing: no validation, no reshaping.

    ``x`` must be a contiguous 1-D float array.  Identity is a true no-op
    (forward hands back ``x``, backward a precomputed ones vector), matching
    an identity module in a deep-learning framework.
    """
    if spec.kind is Kind.IDENTITY:
        if which == "forward":
            return lambda x: x
        ones = {}

        def grad(x):
            n = x.shape[0]
            if n not in ones:
                ones[n] = np.ones(n, dtype=dtype)
            return ones[n]

        return grad
    loop = _CORES[spec.kind][0 if which == "forward" else 1]
    p = spec.param

    def run(x):
        out = np.empty(x.shape[0], dtype=dtype)
        loop(x, p, out)
        return out

    return run
