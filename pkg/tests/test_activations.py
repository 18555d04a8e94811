import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iglu import gates
from iglu.activations import (SELF_GATED_ZOO, ActivationError, ActivationSpec, Kind,
                              NonFiniteInputError, backward_param, backward_x,
                              compiled_kernel, forward, gate)

mpmath.mp.dps = 40

# mpmath references (40 digits, truncated)
IGLU_DX_AT_3 = 0.9930765835055704756367313342482
IGLU_DX_AT_NEG1E4 = 2.122065882427147188385572259582945e-13
GELU_DA_AT_1 = 0.2419707245191433497978301929356  # standard normal pdf at 1

F64 = np.float64
IGLU1 = ActivationSpec.from_name("iglu", sigma=1.0)


def mp_iglu(x, s):
    x, s = mpmath.mpf(x), mpmath.mpf(s)
    return x * (mpmath.mpf(1) / 2 + mpmath.atan(s * x) / mpmath.pi)


def mp_iglu_dx(x, s):
    return mpmath.diff(lambda t: mp_iglu(t, s), mpmath.mpf(x))


class TestForwardExamples:
    def test_iglu(self):
        np.testing.assert_allclose(forward(IGLU1, [0.0, 1.0, -1.0], F64), [0.0, 0.75, -0.25],
                                   rtol=0, atol=1e-15)

    def test_sigma_zero_is_half_x(self):
        x = np.random.default_rng(0).uniform(-100, 100, 1000)
        spec = ActivationSpec.from_name("iglu", sigma=0.0)
        np.testing.assert_array_equal(forward(spec, x, F64), x / 2)
        np.testing.assert_array_equal(forward(spec, x.astype(np.float32)),
                                      (x.astype(np.float32) / 2))

    def test_relu(self):
        np.testing.assert_array_equal(forward(ActivationSpec(Kind.RELU), [-2.0, 0.0, 3.0], F64),
                                      [0.0, 0.0, 3.0])

    def test_approx(self):
        spec = ActivationSpec.from_name("iglu_approx", sigma=1.0)
        out = forward(spec, [2.0, -1.0, 0.0], F64)
        assert out[0] == pytest.approx(5 / 3, rel=1e-15)
        assert out[1] == pytest.approx(-0.25, rel=1e-15)
        assert out[2] == 0.0

    def test_gelu_exact(self):
        out = forward(ActivationSpec(Kind.GELU_EXACT), [1.0], F64)
        assert out[0] == pytest.approx(0.8413447460685429, rel=1e-15)


class TestBackwardExamples:
    def test_iglu_origin(self):
        assert backward_x(IGLU1, [0.0], F64)[0] == pytest.approx(0.5, abs=1e-16)

    def test_relu(self):
        np.testing.assert_array_equal(backward_x(ActivationSpec(Kind.RELU), [-5.0, 0.0, 5.0], F64),
                                      [0.0, 1.0, 1.0])

    def test_iglu_at_three(self):
        got = backward_x(IGLU1, [3.0], F64)[0]
        assert got == pytest.approx(IGLU_DX_AT_3, rel=1e-14)
        h = 3e-6
        fd = (forward(IGLU1, [3 + h], F64)[0] - forward(IGLU1, [3 - h], F64)[0]) / (2 * h)
        assert abs(fd - got) / abs(got) < 1e-6

    def test_iglu_far_negative_tail(self):
        got = backward_x(IGLU1, [-1e4], F64)[0]
        assert got > 0
        assert got == pytest.approx(IGLU_DX_AT_NEG1E4, rel=1e-12)
        # single precision keeps it positive too
        assert backward_x(IGLU1, np.array([-1e4], np.float32))[0] > 0

    def test_approx_continuous_at_zero(self):
        spec = ActivationSpec.from_name("iglu_approx", sigma=2.0)
        left, mid, right = backward_x(spec, [-1e-12, 0.0, 1e-12], F64)
        assert mid == 0.5
        assert left == pytest.approx(0.5, abs=1e-10)
        assert right == pytest.approx(0.5, abs=1e-10)

    def test_approx_matches_relu_composition(self):
        # differentiate the literal two-ReLU gate numerically in mpmath precision
        spec = ActivationSpec.from_name("iglu_approx", sigma=1.5)
        xs = [-7.0, -1.0, -0.3, 0.2, 1.0, 9.0]

        def f(t):
            u = 1.5 * t
            return t * (1 + 2 * max(0, u)) / (2 * (1 + abs(u)))

        for x, got in zip(xs, backward_x(spec, xs, F64)):
            assert got == pytest.approx(float(mpmath.diff(f, mpmath.mpf(x))), rel=1e-13)


class TestBackwardParam:
    def test_learnable_origin_zero(self):
        spec = ActivationSpec.from_name("iglu", sigma=1.0, learnable=True)
        assert backward_param(spec, [0.0], F64)[0] == 0.0

    def test_learnable_chain_rule(self):
        spec = ActivationSpec.from_name("iglu", sigma=1.0, learnable=True)
        expected = (1 / (2 * math.pi)) * (1 - math.exp(-1))
        got = backward_param(spec, [1.0], F64)[0]
        assert got == pytest.approx(expected, rel=1e-13)
        raw, h = spec.sigma.raw, 1e-6
        fd = (forward(spec.with_param(raw + h), [1.0], F64)[0]
              - forward(spec.with_param(raw - h), [1.0], F64)[0]) / (2 * h)
        assert abs(fd - got) / got < 1e-6

    def test_gelu_a(self):
        spec = ActivationSpec(Kind.GELU_A, a=1.0)
        got = backward_param(spec, [1.0], F64)[0]
        assert got == pytest.approx(GELU_DA_AT_1, rel=1e-14)
        h = 1e-6
        fd = (forward(spec.with_param(1 + h), [1.0], F64)[0]
              - forward(spec.with_param(1 - h), [1.0], F64)[0]) / (2 * h)
        assert abs(fd - got) / got < 1e-6

    def test_fixed_sigma_gives_dsigma(self):
        spec = ActivationSpec.from_name("iglu", sigma=2.0)
        x = np.array([-3.0, 0.5, 4.0])
        np.testing.assert_allclose(backward_param(spec, x, F64),
                                   x * x / (math.pi * (1 + 4 * x * x)), rtol=1e-14)

    @pytest.mark.parametrize("name", ["relu", "gelu_exact", "gelu_tanh", "silu", "mish",
                                      "hardswish", "identity"])
    def test_parameter_free_kinds_raise(self, name):
        with pytest.raises(ActivationError):
            backward_param(ActivationSpec.from_name(name), [1.0])


@pytest.mark.parametrize("sigma", [0.1, 5.0, 100.0])
def test_iglu_derivative_against_mpmath(sigma):
    spec = ActivationSpec.from_name("iglu", sigma=sigma)
    xs = np.concatenate([-np.logspace(-3, 5, 17), [0.0], np.logspace(-3, 5, 17)])
    got = backward_x(spec, xs, F64)
    ref = np.array([float(mp_iglu_dx(x, sigma)) for x in xs])
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=0)


@pytest.mark.parametrize("spec", SELF_GATED_ZOO, ids=lambda s: s.label)
def test_self_gating_decomposition(spec):
    x = np.random.default_rng(5).uniform(-20, 20, 2001)
    np.testing.assert_allclose(forward(spec, x, F64), x * gate(spec, x), rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("spec", SELF_GATED_ZOO, ids=lambda s: s.label)
def test_determinism_and_partition_independence(spec):
    x = np.random.default_rng(6).normal(0, 5, 4096)
    a = forward(spec, x)
    np.testing.assert_array_equal(a, forward(spec, x))
    parts = np.concatenate([forward(spec, c) for c in np.array_split(x, 7)])
    np.testing.assert_array_equal(a, parts)
    np.testing.assert_array_equal(backward_x(spec, x), backward_x(spec, x))


def test_relu_limit_is_monotone_and_tight():
    x = np.linspace(-10, 10, 20001)
    x = x[np.abs(x) >= 0.05]
    relu = np.maximum(0, x)
    errs = [np.max(np.abs(forward(ActivationSpec.from_name("iglu", sigma=s), x, F64) - relu))
            for s in (1, 10, 100, 1000)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.01


def test_gelu_tanh_fidelity():
    x = np.linspace(-10, 10, 200001)
    diff = forward(ActivationSpec(Kind.GELU_TANH), x, F64) - forward(ActivationSpec(Kind.GELU_EXACT), x, F64)
    assert np.max(np.abs(diff)) < 3e-3


@pytest.mark.parametrize("name", ["iglu", "iglu_approx"])
@pytest.mark.parametrize("sigma", [0.1, 1.0, 10.0])
def test_gradient_completeness(name, sigma):
    spec = ActivationSpec.from_name(name, sigma=sigma)
    mags = np.logspace(-6, 6, 241)
    x = np.concatenate([-mags, mags])
    assert np.all(backward_x(spec, x, F64) != 0.0)


@given(arrays(np.float64, st.integers(1, 50),
              elements=st.floats(-1e6, 1e6, allow_nan=False)),
       st.floats(1e-2, 1e2))
def test_iglu_gradient_never_zero_property(x, sigma):
    spec = ActivationSpec.from_name("iglu", sigma=sigma)
    assert np.all(backward_x(spec, x, F64) > 0) or np.any(x >= 0)
    neg = x[x < 0]
    if neg.size:
        assert np.all(backward_x(spec, neg, F64) > 0)


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-1e3, 1e3)))
def test_approx_stays_close_to_iglu(x):
    for sigma in (0.5, 2.0):
        a = forward(ActivationSpec.from_name("iglu", sigma=sigma), x, F64)
        b = forward(ActivationSpec.from_name("iglu_approx", sigma=sigma), x, F64)
        assert np.all(np.abs(a - b) <= 0.025 * np.abs(x) + 1e-12)


class TestShapesAndDtypes:
    def test_default_is_float32(self):
        assert forward(IGLU1, [1.0, 2.0]).dtype == np.float32
        assert backward_x(IGLU1, [1.0, 2.0]).dtype == np.float32

    def test_double_variant(self):
        assert forward(IGLU1, [1.0], F64).dtype == np.float64

    def test_preserves_shape(self):
        x = np.arange(24, dtype=np.float64).reshape(2, 3, 4) - 12
        assert forward(IGLU1, x).shape == (2, 3, 4)
        assert backward_param(ActivationSpec.from_name("iglu", learnable=True), x).shape == (2, 3, 4)

    def test_integer_input_accepted(self):
        np.testing.assert_allclose(forward(IGLU1, [1, 0], F64), [0.75, 0.0], atol=1e-15)

    def test_single_precision_close_to_double(self):
        x = np.random.default_rng(7).uniform(-30, 30, 1000)
        for spec in SELF_GATED_ZOO:
            np.testing.assert_allclose(forward(spec, x.astype(np.float32)),
                                       forward(spec, x, F64), rtol=2e-6, atol=1e-6)


class TestErrors:
    def test_empty(self):
        with pytest.raises(ActivationError):
            forward(IGLU1, [])

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite_reports_index(self, bad):
        with pytest.raises(NonFiniteInputError) as info:
            forward(IGLU1, [0.0, 1.0, bad, 2.0])
        assert info.value.index == 2

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            ActivationSpec.from_name("iglu", sigma=-1.0)

    def test_nan_sigma(self):
        with pytest.raises(ValueError):
            ActivationSpec.from_name("iglu", sigma=math.nan)

    def test_learnable_sigma_must_be_positive(self):
        with pytest.raises(ValueError):
            ActivationSpec.from_name("iglu", sigma=0.0, learnable=True)

    def test_sigma_on_wrong_kind(self):
        with pytest.raises(ActivationError):
            ActivationSpec(Kind.RELU, sigma=1.0)

    def test_gelu_a_needs_a(self):
        with pytest.raises(ActivationError):
            ActivationSpec(Kind.GELU_A)

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            ActivationSpec.from_name("swishy")


def test_labels():
    assert IGLU1.label == "iglu(sigma=1)"
    assert ActivationSpec.from_name("iglu", sigma=0.5, learnable=True).label == "iglu(learnable sigma=0.5)"
    assert ActivationSpec(Kind.GELU_A, a=1.702).label == "gelu_a(a=1.702)"


class TestCompiledKernel:
    def test_matches_checked_api(self):
        x = np.random.default_rng(8).normal(0, 3, 1000)
        for spec in SELF_GATED_ZOO:
            np.testing.assert_array_equal(compiled_kernel(spec, "forward")(x), forward(spec, x))
            np.testing.assert_array_equal(compiled_kernel(spec, "backward")(x), backward_x(spec, x))

    def test_identity_is_noop(self):
        x = np.arange(5, dtype=np.float32)
        spec = ActivationSpec(Kind.IDENTITY)
        assert compiled_kernel(spec, "forward")(x) is x
        np.testing.assert_array_equal(compiled_kernel(spec, "backward")(x), 1.0)
