import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iglu import gates
from iglu.gates import DomainError, SharpnessParam

mpmath.mp.dps = 40

# 40-digit values from mpmath; see the oracle helpers below for how they arise
PHI_1 = 0.8413447460685429485852325456320379224779
IGLU_GATE_2 = 0.8524163823495667258245989237752594740489
IGLU_GATE_NEG10 = 0.03172551743055356951497711860130200061933

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
sigmas = st.floats(min_value=1e-3, max_value=1e3)


def mp_gate(x, s):
    return mpmath.mpf(1) / 2 + mpmath.atan(mpmath.mpf(s) * x) / mpmath.pi


def test_frozen_values_match_oracle():
    assert float(0.5 * mpmath.erfc(-1 / mpmath.sqrt(2))) == pytest.approx(PHI_1, abs=1e-16)
    assert float(mp_gate(2, 1)) == pytest.approx(IGLU_GATE_2, abs=1e-16)
    assert float(mp_gate(-10, 1)) == pytest.approx(IGLU_GATE_NEG10, abs=1e-16)


class TestStep:
    @pytest.mark.parametrize("x, expected", [(-3.0, 0.0), (0.0, 1.0), (5.0, 1.0), (-0.0, 1.0)])
    def test_values(self, x, expected):
        assert gates.step(x) == expected

    @pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(DomainError):
            gates.step(bad)

    def test_relu_identity(self):
        x = np.linspace(-3, 3, 61)
        np.testing.assert_array_equal(x * gates.step(x), np.maximum(0, x))


class TestGaussianCdf:
    def test_center(self):
        assert gates.gaussian_cdf(0.0) == 0.5

    def test_value_at_one(self):
        assert gates.gaussian_cdf(1.0) == pytest.approx(PHI_1, abs=1e-15)

    def test_against_mpmath(self):
        xs = np.linspace(-12, 12, 241)
        ref = np.array([float((1 + mpmath.erf(mpmath.mpf(x) / mpmath.sqrt(2))) / 2) for x in xs])
        assert np.max(np.abs(gates.gaussian_cdf(xs) - ref)) <= 1e-12

    @given(finite)
    def test_symmetry(self, x):
        assert gates.gaussian_cdf(x) + gates.gaussian_cdf(-x) == pytest.approx(1.0, abs=1e-15)

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            gates.gaussian_cdf(np.array([0.0, np.nan]))


class TestIgluGate:
    def test_examples(self):
        assert gates.iglu_gate(0.0, 1.0) == 0.5
        assert gates.iglu_gate(1.0, 1.0) == pytest.approx(0.75, abs=1e-15)
        assert gates.iglu_gate(2.0, 1.0) == pytest.approx(IGLU_GATE_2, abs=1e-15)

    def test_sigma_zero_is_half(self):
        x = np.random.default_rng(0).uniform(-1e3, 1e3, 100)
        np.testing.assert_array_equal(gates.iglu_gate(x, 0.0), 0.5)

    def test_scalar_in_scalar_out(self):
        assert isinstance(gates.iglu_gate(1.0, 1.0), float)
        assert gates.iglu_gate(np.ones(3), 1.0).shape == (3,)

    def test_accepts_sharpness_param(self):
        s = SharpnessParam.learnable(2.0)
        assert gates.iglu_gate(0.3, s) == pytest.approx(gates.iglu_gate(0.3, 2.0), abs=1e-15)

    def test_against_mpmath_in_negative_tail(self):
        for x in (-1e2, -1e5, -1e10, -1e100):
            ref = float(mp_gate(mpmath.mpf(x), 1))
            assert gates.iglu_gate(x, 1.0) == pytest.approx(ref, rel=1e-14)

    @given(finite, finite, sigmas)
    def test_monotone(self, x1, x2, s):
        lo, hi = sorted((x1, x2))
        assert gates.iglu_gate(lo, s) <= gates.iglu_gate(hi, s)

    def test_strictly_monotone_on_grid(self):
        x = np.linspace(-100, 100, 100001)
        for s in (0.1, 1.0, 10.0):
            assert np.all(np.diff(gates.iglu_gate(x, s)) > 0)

    def test_limits(self):
        assert abs(gates.iglu_gate(-1e8, 1.0)) < 1e-7
        assert abs(gates.iglu_gate(1e8, 1.0) - 1.0) < 1e-7

    @given(st.floats(min_value=-1e300, max_value=1e300), st.floats(min_value=0.0, max_value=1.0))
    def test_positive_for_finite_x(self, x, s):
        assert gates.iglu_gate(x, s) > 0.0

    @given(finite, sigmas)
    def test_in_unit_interval(self, x, s):
        assert 0.0 <= gates.iglu_gate(x, s) <= 1.0


class TestIgluGateDerivatives:
    def test_dx_examples(self):
        assert gates.iglu_gate_dx(0.0, 1.0) == pytest.approx(1 / math.pi, rel=1e-15)
        assert gates.iglu_gate_dx(10.0, 1.0) == pytest.approx(1 / (101 * math.pi), rel=1e-14)
        np.testing.assert_array_equal(gates.iglu_gate_dx(np.linspace(-5, 5, 11), 0.0), 0.0)

    def test_dx_by_finite_difference(self):
        h = 1e-6 * 10
        fd = (gates.iglu_gate(10 + h, 1.0) - gates.iglu_gate(10 - h, 1.0)) / (2 * h)
        assert fd == pytest.approx(gates.iglu_gate_dx(10.0, 1.0), rel=1e-6)

    def test_dsigma_examples(self):
        assert gates.iglu_gate_dsigma(0.0, 1.0) == 0.0
        assert gates.iglu_gate_dsigma(1.0, 0.0) == pytest.approx(1 / math.pi, rel=1e-15)
        h = 1e-6
        fd = (gates.iglu_gate(2.0, 1 + h) - gates.iglu_gate(2.0, 1 - h)) / (2 * h)
        assert gates.iglu_gate_dsigma(2.0, 1.0) == pytest.approx(2 / (5 * math.pi), rel=1e-15)
        assert fd == pytest.approx(2 / (5 * math.pi), rel=1e-6)

    @given(st.floats(min_value=-1e150, max_value=1e150), st.floats(min_value=1e-3, max_value=1e3))
    def test_dx_strictly_positive(self, x, s):
        # beyond |x| ~ 1e161 the true value sigma/(pi (1+sigma^2 x^2)) underflows double
        assert gates.iglu_gate_dx(x, s) > 0.0

    def test_tail_law(self):
        for x in (1e4, -1e4):
            assert gates.iglu_gate_dx(x, 1.0) * math.pi * x * x == pytest.approx(1.0, rel=1e-2)


class TestApproxGate:
    def test_examples(self):
        assert gates.iglu_gate_approx(0.0, 1.0) == 0.5
        assert gates.iglu_gate_approx(1.0, 1.0) == 0.75
        assert gates.iglu_gate_approx(-1.0, 1.0) == 0.25

    def test_two_relu_form_equals_abs_form(self):
        x = np.random.default_rng(1).uniform(-50, 50, 10000)
        for s in (0.1, 1.0, 7.0):
            u = s * x
            abs_form = 0.5 * (1 + 2 * np.maximum(0, u)) / (1 + np.abs(u))
            np.testing.assert_array_equal(gates.iglu_gate_approx(x, s), abs_form)

    def test_arctan_substitution(self):
        x = np.random.default_rng(2).uniform(-20, 20, 1000)
        via_arctan = 0.5 + gates.arctan_rational(2.0 * x) / math.pi
        np.testing.assert_allclose(gates.iglu_gate_approx(x, 2.0), via_arctan, rtol=0, atol=1e-15)

    @given(finite, sigmas)
    def test_in_unit_interval(self, x, s):
        assert 0.0 <= gates.iglu_gate_approx(x, s) <= 1.0

    def test_sup_error_below_bound(self):
        x = np.linspace(-100, 100, 200001)
        worst = max(np.max(np.abs(gates.iglu_gate(x, s) - gates.iglu_gate_approx(x, s)))
                    for s in (0.1, 0.5, 1, 5, 10))
        # sup over u of |1/2 + atan(u)/pi - Z_approx(u)|, found at |u| ~ 3.19
        assert 0.0226 < worst <= 0.025

    def test_exact_points(self):
        for s in (0.5, 1.0, 4.0):
            for x in (0.0, 1 / s, -1 / s):
                assert abs(gates.iglu_gate(x, s) - gates.iglu_gate_approx(x, s)) < 1e-12
            assert abs(gates.iglu_gate(1e6 / s, s) - gates.iglu_gate_approx(1e6 / s, s)) < 1e-5


class TestArctanRational:
    def test_values(self):
        assert gates.arctan_rational(0.0) == 0.0
        assert gates.arctan_rational(1.0) == pytest.approx(math.pi / 4, abs=1e-16)

    def test_odd(self):
        u = np.random.default_rng(3).uniform(-1e3, 1e3, 1000)
        np.testing.assert_array_equal(gates.arctan_rational(-u), -gates.arctan_rational(u))

    def test_saturates(self):
        assert gates.arctan_rational(1e12) == pytest.approx(math.pi / 2, rel=1e-11)


class TestCauchyCdf:
    def test_values(self):
        for g in (0.1, 1.0, 30.0):
            assert gates.cauchy_cdf(0.0, g) == 0.5
        assert gates.cauchy_cdf(1.0, 1.0) == pytest.approx(0.75, abs=1e-15)

    @pytest.mark.parametrize("scale", [0.0, -1.0, math.inf])
    def test_bad_scale(self, scale):
        with pytest.raises(DomainError):
            gates.cauchy_cdf(1.0, scale)

    def test_identity_with_iglu_gate(self):
        x = np.random.default_rng(4).uniform(-1e3, 1e3, 1000)
        for s in (0.1, 1.0, 10.0):
            assert np.max(np.abs(gates.iglu_gate(x, s) - gates.cauchy_cdf(x, 1 / s))) <= 1e-14


def test_gaussian_vs_cauchy_tail():
    assert gates.gaussian_cdf(-10.0) < 1e-20
    assert gates.iglu_gate(-10.0, 1.0) == pytest.approx(IGLU_GATE_NEG10, rel=1e-14)
    assert gates.iglu_gate(-10.0, 1.0) > 0.03


class TestSharpnessParam:
    def test_fixed_allows_zero(self):
        assert SharpnessParam.fixed(0.0).value == 0.0

    @pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
    def test_fixed_rejects(self, bad):
        with pytest.raises(DomainError):
            SharpnessParam.fixed(bad)

    @given(st.floats(min_value=1e-6, max_value=50.0))
    def test_learnable_round_trip(self, v):
        s = SharpnessParam.learnable(v)
        assert s.value == pytest.approx(v, rel=1e-9)
        assert s.value > 0

    @given(st.floats(min_value=-30, max_value=30))
    def test_value_is_softplus_of_raw(self, raw):
        s = SharpnessParam.from_raw(raw)
        assert s.value == pytest.approx(math.log1p(math.exp(raw)), rel=1e-12)
        assert s.dvalue_draw() == pytest.approx(1 / (1 + math.exp(-raw)), rel=1e-12)

    def test_snapshots_are_immutable(self):
        s = SharpnessParam.learnable(1.0)
        t = s.with_raw(s.raw + 1.0)
        assert s.value == pytest.approx(1.0) and t.value > s.value
        with pytest.raises(Exception):
            s.value = 3.0

    def test_with_raw_requires_learnable(self):
        with pytest.raises(DomainError):
            SharpnessParam.fixed(1.0).with_raw(0.0)

    def test_underflow_rejected(self):
        with pytest.raises(DomainError):
            SharpnessParam.from_raw(-1000.0)
