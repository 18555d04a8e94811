"""Numba scalar cores and the elementwise loop that applies them.

Each core has signature ``core(v, p) -> float`` where ``v`` is one
pre-activation (promoted to float64) and ``p`` is the kind's parameter
(sigma or a; ignored otherwise).  :func:`make_loop` specializes the
elementwise loop per core; passing the core as a runtime argument instead
costs several microseconds of dispatch per call.
"""
import math

import numba

_INV_PI = 1.0 / math.pi
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715

jit = numba.njit(cache=True, nogil=True)


def make_loop(core):
    @jit
    def loop(x, p, out):
        for i in range(x.shape[0]):
            out[i] = core(float(x[i]), p)

    return loop


# ---- identity / relu -------------------------------------------------------

@jit
def f_identity(v, p):
    return v


@jit
def dx_identity(v, p):
    return 1.0


@jit
def f_relu(v, p):
    return v if v >= 0.0 else 0.0


@jit
def dx_relu(v, p):
    return 1.0 if v >= 0.0 else 0.0


# ---- gaussian gates ----------------------------------------------------------

@jit
def _phi(v):
    return math.exp(-0.5 * v * v) * _INV_SQRT_2PI


@jit
def _Phi(v):
    return 0.5 * math.erfc(-v * _INV_SQRT2)


@jit
def f_gelu_exact(v, p):
    return v * _Phi(v)


@jit
def dx_gelu_exact(v, p):
    return _Phi(v) + v * _phi(v)


@jit
def f_gelu_a(v, a):
    return v * _Phi(a * v)


@jit
def dx_gelu_a(v, a):
    return _Phi(a * v) + a * v * _phi(a * v)


@jit
def dp_gelu_a(v, a):
    return v * v * _phi(a * v)


@jit
def _sigmoid(v):
    if v >= 0.0:
        return 1.0 / (1.0 + math.exp(-v))
    e = math.exp(v)
    return e / (1.0 + e)


# (1 + tanh(u)) / 2 == sigmoid(2u); the sigmoid form avoids cancellation in
# the negative tail, which would otherwise swamp finite-difference checks.
@jit
def f_gelu_tanh(v, p):
    u = _SQRT_2_OVER_PI * (v + _GELU_C * v * v * v)
    return v * _sigmoid(2.0 * u)


@jit
def dx_gelu_tanh(v, p):
    u = _SQRT_2_OVER_PI * (v + _GELU_C * v * v * v)
    s = _sigmoid(2.0 * u)
    du = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * v * v)
    return s + 2.0 * v * s * (1.0 - s) * du


# ---- IGLU --------------------------------------------------------------------

@jit
def _cauchy_kernel(u):
    if abs(u) > 1.0:
        w = 1.0 / u
        return w * w / (1.0 + w * w)
    return 1.0 / (1.0 + u * u)


@jit
def _iglu_gate(u):
    if u < -1.0:
        # pi/2 + atan(u) == atan(-1/u) for u < 0, without cancellation
        return math.atan(-1.0 / u) * _INV_PI
    return 0.5 + math.atan(u) * _INV_PI


@jit
def f_iglu(v, s):
    return v * _iglu_gate(s * v)


@jit
def dx_iglu(v, s):
    u = s * v
    if u < -10.0:
        # Z(u) + u Z'(u) = (atan(w) - w/(1+w^2))/pi with w = -1/u; the two
        # terms cancel to O(w^3), so sum the series difference directly.
        w = -1.0 / u
        w2 = w * w
        term = w * w2
        acc = 0.0
        sign = 1.0
        for n in range(1, 12):
            acc += sign * term * (2.0 * n) / (2.0 * n + 1.0)
            term *= w2
            sign = -sign
        return acc * _INV_PI
    return _iglu_gate(u) + u * _cauchy_kernel(u) * _INV_PI


@jit
def dp_iglu(v, s):
    return v * v * _cauchy_kernel(s * v) * _INV_PI


@jit
def f_iglu_approx(v, s):
    u = s * v
    pos = u if u > 0.0 else 0.0
    neg = -u if -u > 0.0 else 0.0
    return v * (0.5 * (1.0 + 2.0 * pos) / (1.0 + pos + neg))


@jit
def dx_iglu_approx(v, s):
    u = s * v
    if u > 0.0:
        d = 1.0 + u
        return (1.0 + 4.0 * u + 2.0 * u * u) / (2.0 * d * d)
    d = 1.0 - u
    return 1.0 / (2.0 * d * d)


@jit
def dp_iglu_approx(v, s):
    d = 1.0 + abs(s * v)
    return v * v / (2.0 * d * d)


# ---- other self-gated baselines ---------------------------------------------

@jit
def f_silu(v, p):
    return v * _sigmoid(v)


@jit
def dx_silu(v, p):
    s = _sigmoid(v)
    return s + v * s * (1.0 - s)


@jit
def _softplus(v):
    return max(v, 0.0) + math.log1p(math.exp(-abs(v)))


@jit
def f_mish(v, p):
    return v * math.tanh(_softplus(v))


@jit
def dx_mish(v, p):
    t = math.tanh(_softplus(v))
    return t + v * (1.0 - t * t) * _sigmoid(v)


@jit
def f_hardswish(v, p):
    if v <= -3.0:
        return 0.0
    if v >= 3.0:
        return v
    return v * (v + 3.0) / 6.0


@jit
def dx_hardswish(v, p):
    # same branch convention as torch.nn.functional.hardswish
    if v < -3.0:
        return 0.0
    if v <= 3.0:
        return (2.0 * v + 3.0) / 6.0
    return 1.0
