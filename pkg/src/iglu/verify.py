"""Verification suites behind ``iglu verify``.

Each suite returns a list of :class:`Check` records; a target passes when
every check does.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from iglu import activations as act
from iglu import gates, mixture
from iglu.activations import ActivationSpec, Kind
from iglu.gates import SharpnessParam
from iglu.gradcheck import check_derivative, check_param_derivative

SCHEMA = "iglu-verify/1"
TARGETS = ("mixture", "grads", "approx", "limits")
APPROX_SIGMAS = (0.1, 0.5, 1.0, 5.0, 10.0)
APPROX_BOUND = 0.025
APPROX_TEXT_BOUND = 0.05
GRAD_GRID = np.linspace(-20.0, 20.0, 401)
KINK_RADIUS = 1e-4
F64 = np.float64


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class VerifyReport:
    target: str
    checks: list[Check]
    schema: str = SCHEMA

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"schema": self.schema, "target": self.target, "passed": self.passed,
                "failed": self.failed, "checks": [asdict(c) for c in self.checks]}


# ---- mixture ------------------------------------------------------------------

def mixture_checks(tol: float = 1e-8) -> list[Check]:
    grid_x, grid_s = mixture.default_grid()
    rep = mixture.verify_closed_form(grid_x, grid_s, tol=tol)
    checks = [Check("mixture.closed_form", rep.passed, rep.to_dict())]
    masses = {s: mixture.half_normal_mass(s).value for s in grid_s}
    worst = max(abs(m - 1.0) for m in masses.values())
    checks.append(Check("mixture.half_normal_mass", worst <= 1e-10,
                        {"max_abs_dev": worst, "tol": 1e-10}))
    worst = 0.0
    for s in (0.0, 0.5, -0.5, 2.0, -2.0):
        for sig in (0.5, 1.0, 2.0):
            q = mixture.inner_integral(s, sig).value
            worst = max(worst, abs(q - sig**2 / (1.0 + sig**2 * s**2)))
    checks.append(Check("mixture.inner_integral", worst <= 1e-10,
                        {"max_abs_dev": worst, "tol": 1e-10}))
    return checks


# ---- gradients ----------------------------------------------------------------

def _kink_exclusions(spec: ActivationSpec):
    if spec.kind is Kind.RELU:
        return [(0.0, KINK_RADIUS)]
    if spec.kind is Kind.HARDSWISH:
        return [(-3.0, KINK_RADIUS), (3.0, KINK_RADIUS)]
    return []


def gradient_specs() -> list[ActivationSpec]:
    specs = [ActivationSpec(k) for k in (Kind.RELU, Kind.GELU_EXACT, Kind.GELU_TANH,
                                         Kind.SILU, Kind.MISH, Kind.HARDSWISH)]
    specs += [ActivationSpec(Kind.GELU_A, a=a) for a in (0.5, 1.0, 1.702)]
    for kind in (Kind.IGLU, Kind.IGLU_APPROX):
        # larger sigma pushes |f'| below what double-precision differences of
        # f can resolve at |x| ~ 20; those are covered by extended-precision tests
        for s in (0.5, 1.0):
            specs.append(ActivationSpec(kind, sigma=s))
        specs.append(ActivationSpec(kind, sigma=SharpnessParam.learnable(1.0)))
    return specs


def _param_oracle(spec: ActivationSpec):
    """f(p, x) to difference in the parameter.

    For gelu_a, x * Phi(a x) saturates to x * step(x) and its a-variation
    drops below one ulp; x * (Phi(a x) - step(x)) has the same a-derivative
    and is evaluated without cancellation.
    """
    if spec.kind is Kind.GELU_A:
        def f(p, x):
            x = np.asarray(x, dtype=F64)
            tail = np.where(x < 0, gates.gaussian_cdf(p * x), -gates.gaussian_cdf(-p * x))
            return x * tail
        return f
    return lambda p, x: act.forward(spec.with_param(p), x, F64)


def grad_checks(tol: float = 1e-6, points=GRAD_GRID) -> list[Check]:
    checks = []
    for spec in gradient_specs():
        rep = check_derivative(lambda x, s=spec: act.forward(s, x, F64),
                               lambda x, s=spec: act.backward_x(s, x, F64),
                               points, tol, _kink_exclusions(spec), label=spec.label)
        checks.append(Check(f"grads.dx.{spec.label}", rep.passed, rep.to_dict()))
        if spec.has_param:
            if spec.kind is Kind.GELU_A:
                p0 = spec.a
            elif spec.sigma.learnable_mode:
                p0 = spec.sigma.raw
            else:
                p0 = spec.sigma.value
            rep = check_param_derivative(_param_oracle(spec),
                                         lambda x, s=spec: act.backward_param(s, x, F64),
                                         p0, points, tol, label=spec.label)
            checks.append(Check(f"grads.dparam.{spec.label}", rep.passed, rep.to_dict()))
    for s in (0.5, 1.0, 5.0):
        rep = check_derivative(lambda x, s=s: gates.iglu_gate(x, s),
                               lambda x, s=s: gates.iglu_gate_dx(x, s), points, tol)
        checks.append(Check(f"grads.gate_dx.sigma={s:g}", rep.passed, rep.to_dict()))
        rep = check_param_derivative(lambda p, x: gates.iglu_gate(x, p),
                                     lambda x, s=s: gates.iglu_gate_dsigma(x, s), s, points, tol)
        checks.append(Check(f"grads.gate_dsigma.sigma={s:g}", rep.passed, rep.to_dict()))
    return checks


# ---- approximation --------------------------------------------------------------

def approx_sup(sigmas=APPROX_SIGMAS, lo=-100.0, hi=100.0, step=1e-3) -> dict:
    n = int(round((hi - lo) / step)) + 1
    x = np.linspace(lo, hi, n)
    worst = {"sup": -1.0, "x": math.nan, "sigma": math.nan}
    for s in sigmas:
        d = np.abs(gates.iglu_gate(x, s) - gates.iglu_gate_approx(x, s))
        i = int(np.argmax(d))
        if d[i] > worst["sup"]:
            worst = {"sup": float(d[i]), "x": float(x[i]), "sigma": float(s)}
    worst["points"] = n * len(sigmas)
    return worst


def approx_checks() -> list[Check]:
    sup = approx_sup()
    checks = [
        Check("approx.sup_le_0.025", sup["sup"] <= APPROX_BOUND, {**sup, "bound": APPROX_BOUND}),
        Check("approx.sup_le_0.05", sup["sup"] <= APPROX_TEXT_BOUND, {**sup, "bound": APPROX_TEXT_BOUND}),
    ]
    exact = 0.0
    for s in APPROX_SIGMAS:
        for x in (0.0, 1.0 / s, -1.0 / s):
            exact = max(exact, abs(gates.iglu_gate(x, s) - gates.iglu_gate_approx(x, s)))
    checks.append(Check("approx.exact_points", exact < 1e-12, {"max_abs_dev": exact, "tol": 1e-12}))
    far = 0.0
    for s in APPROX_SIGMAS:
        for x in (1e6 / s, -1e6 / s):
            far = max(far, abs(gates.iglu_gate(x, s) - gates.iglu_gate_approx(x, s)))
    checks.append(Check("approx.asymptotic", far < 1e-5, {"max_abs_dev": far, "tol": 1e-5}))
    return checks


# ---- limits and tail laws -------------------------------------------------------

def relu_limit_errors(sigmas=(1.0, 10.0, 100.0, 1000.0)) -> list[float]:
    x = np.linspace(-10.0, 10.0, 20001)
    x = x[np.abs(x) >= 0.05]
    relu = np.maximum(0.0, x)
    return [float(np.max(np.abs(act.forward(ActivationSpec(Kind.IGLU, sigma=s), x, F64) - relu)))
            for s in sigmas]


def limit_checks(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []

    x = rng.uniform(-100.0, 100.0, 1000)
    for dtype in (np.float32, np.float64):
        xd = x.astype(dtype)
        out = act.forward(ActivationSpec(Kind.IGLU, sigma=0.0), xd, dtype)
        checks.append(Check(f"limits.sigma0_half_identity.{np.dtype(dtype).name}",
                            bool(np.array_equal(out, xd / dtype(2))), {}))

    errs = relu_limit_errors()
    mono = all(a > b for a, b in zip(errs, errs[1:]))
    checks.append(Check("limits.relu_limit", mono and errs[-1] < 0.01,
                        {"sigmas": [1, 10, 100, 1000], "max_abs_dev": errs, "tol_at_1000": 0.01}))

    lo = gates.iglu_gate(-1e8, 1.0)
    hi = gates.iglu_gate(1e8, 1.0)
    checks.append(Check("limits.gate_limits", abs(lo) < 1e-7 and abs(hi - 1.0) < 1e-7,
                        {"gate(-1e8)": lo, "gate(1e8)": hi}))

    xs = np.sort(rng.uniform(-50.0, 50.0, 2000))
    strict = all(bool(np.all(np.diff(gates.iglu_gate(xs, s)) > 0)) for s in (0.1, 1.0, 10.0))
    checks.append(Check("limits.gate_monotone", strict, {}))

    ratio = gates.iglu_gate_dx(1e4, 1.0) * math.pi * 1e8
    checks.append(Check("limits.tail_law", 0.99 <= ratio <= 1.01, {"ratio": ratio}))

    g_gauss = gates.gaussian_cdf(-10.0)
    g_iglu = gates.iglu_gate(-10.0, 1.0)
    checks.append(Check("limits.tail_contrast", g_gauss < 1e-20 and g_iglu > 0.03,
                        {"gaussian_cdf(-10)": g_gauss, "iglu_gate(-10)": g_iglu}))

    far = -np.logspace(0, 300, 301)
    positive = all(bool(np.all(gates.iglu_gate(far, s) > 0)) for s in (0.0, 1e-3, 1.0))
    checks.append(Check("limits.gate_positive", positive, {}))

    x = rng.uniform(-1e3, 1e3, 1000)
    worst = 0.0
    for s in (0.1, 1.0, 10.0):
        worst = max(worst, float(np.max(np.abs(gates.iglu_gate(x, s) - gates.cauchy_cdf(x, 1.0 / s)))))
    checks.append(Check("limits.cauchy_identity", worst <= 1e-14, {"max_abs_dev": worst}))

    grid = np.linspace(-10.0, 10.0, 200001)
    tanh_dev = float(np.max(np.abs(act.forward(ActivationSpec(Kind.GELU_TANH), grid, F64)
                                   - act.forward(ActivationSpec(Kind.GELU_EXACT), grid, F64))))
    checks.append(Check("limits.gelu_tanh_fidelity", tanh_dev < 3e-3, {"max_abs_dev": tanh_dev}))
    return checks


def run(target: str, tol: float | None = None) -> VerifyReport:
    if target not in TARGETS + ("all",):
        raise ValueError(f"unknown verify target {target!r}")
    checks = []
    if target in ("mixture", "all"):
        checks += mixture_checks(1e-8 if tol is None else tol)
    if target in ("grads", "all"):
        checks += grad_checks(1e-6 if tol is None or target == "all" else tol)
    if target in ("approx", "all"):
        checks += approx_checks()
    if target in ("limits", "all"):
        checks += limit_checks()
    return VerifyReport(target, checks)
