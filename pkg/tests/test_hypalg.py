import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy import integrate

from anharmonic import hypalg
from anharmonic.errors import DivergesAtZero, NonElementaryIntegral
from anharmonic.hypalg import HypExpr
from anharmonic.params import ModelParams

S = HypExpr.sinh
C = HypExpr.cosh
X = HypExpr.x


def exp_term(a, b, coeff=1, m=0):
    return HypExpr(1, m, {(a, b, 0, 0, 0, 0): Fraction(coeff)})


# random algebra elements: numerator sum of c x^a e^{bx}, over sinh^m
@st.composite
def elements(draw, max_m=6, max_a=3, max_b=6, max_terms=4):
    m = draw(st.integers(0, max_m))
    n = draw(st.integers(1, max_terms))
    num = {}
    for _ in range(n):
        a = draw(st.integers(0, max_a))
        b = draw(st.integers(-max_b, max_b))
        c = Fraction(draw(st.integers(-9, 9)), draw(st.integers(1, 6)))
        num[(a, b, 0, 0, 0, 0)] = num.get((a, b, 0, 0, 0, 0), 0) + c
    return HypExpr(1, m, num)


def direct(expr, x):
    """Straightforward mpmath evaluation of the stored representation."""
    with mpmath.workdps(60):
        x = mpmath.mpf(x)
        tot = mpmath.mpf(0)
        for (a, b, *_rest), c in expr.terms:
            tot += mpmath.mpf(c.numerator) / c.denominator * x ** a * mpmath.exp(b * x)
        return float(tot / mpmath.sinh(x) ** expr.m)


class TestConstruction:
    def test_sinh_squared_product_to_sum(self):
        e = hypalg.mul(S(), S())
        assert e.m == 0
        assert e.num == {(0, -2, 0, 0, 0, 0): Fraction(1, 4), (0, 0, 0, 0, 0, 0): Fraction(-1, 2),
                         (0, 2, 0, 0, 0, 0): Fraction(1, 4)}
        assert e == (C(2) - HypExpr.const(1)).scale(Fraction(1, 2))

    def test_denominators_add(self):
        e = hypalg.mul(HypExpr.inv_sinh(1), HypExpr.inv_sinh(1))
        assert e.m == 2
        assert e.num == {(0, 0, 0, 0, 0, 0): Fraction(1)}

    def test_exponent_cancellation(self):
        assert hypalg.mul(exp_term(1, 1), exp_term(1, -1)) == X(2)

    def test_mismatched_base_rejected(self):
        with pytest.raises(ValueError):
            hypalg.mul(S(1, nu_div=1), S(1, nu_div=2))

    def test_reduced_form(self):
        # sinh^2 / sinh^2 must collapse to 1
        assert hypalg.mul(hypalg.mul(S(), S()), HypExpr.inv_sinh(2)) == HypExpr.const(1)
        assert S().times_sinh(-1) == HypExpr.const(1)

    def test_zero_is_dropped(self):
        assert (S() - S()).is_zero()
        assert (S() - S()).terms == ()

    def test_rational_coefficients_in_lowest_terms(self):
        e = HypExpr.const(Fraction(6, 4))
        c = e.terms[0][1]
        assert isinstance(c, Fraction) and (c.numerator, c.denominator) == (3, 2)

    def test_bad_keys(self):
        with pytest.raises(ValueError):
            HypExpr(1, 0, {(0, 0, 0, 0, 0, 2): 1})
        with pytest.raises(ValueError):
            HypExpr(3, 0, {})


class TestCalculus:
    def test_derivative_of_tau(self):
        assert hypalg.differentiate(X()) == HypExpr.const(1, mono=(0, 0, 1))

    def test_k2l4_antiderivative(self):
        s4 = hypalg.mul(hypalg.mul(S(), S()), hypalg.mul(S(), S()))
        got = hypalg.antiderivative(s4)
        want = HypExpr.multiangle([(Fraction(1, 32), 0, "sinh", 4), (Fraction(-1, 4), 0, "sinh", 2),
                                   (Fraction(3, 8), 1, "1", 0)], mono=(0, 0, -1))
        assert got == want
        assert hypalg.differentiate(want) == s4

    def test_antiderivative_of_one(self):
        assert hypalg.antiderivative(HypExpr.const(1)) == X().scale(1, omega=-1)

    def test_x_over_sinh_squared(self):
        e = X().times_sinh(-2)
        got = hypalg.antiderivative_x(e)
        want = hypalg.mul(X(), C()).times_sinh(-1).scale(-1) + HypExpr.log_sinh()
        assert got == want
        assert hypalg.d_dx(got) == e

    def test_log_derivative_finite_differences(self):
        f = hypalg.mul(X(), C()).times_sinh(-1).scale(-1) + HypExpr.log_sinh()
        df = hypalg.d_dx(f)
        rng = random.Random(3)
        for _ in range(10):
            x = rng.uniform(0.1, 3)
            h = 1e-5
            fd = (-(x + h) / math.tanh(x + h) + math.log(math.sinh(x + h))
                  + (x - h) / math.tanh(x - h) - math.log(math.sinh(x - h))) / (2 * h)
            assert hypalg.evaluate(df, x) == pytest.approx(fd, rel=1e-8)

    def test_non_elementary(self):
        with pytest.raises(NonElementaryIntegral):
            hypalg.antiderivative_x(X().times_sinh(-1))

    def test_coth_integrates_to_log(self):
        assert hypalg.antiderivative_x(C().times_sinh(-1)) == HypExpr.log_sinh()

    def test_chain_factor(self):
        # d/dtau sinh(omega tau) = omega cosh
        assert hypalg.differentiate(S()) == C().scale(1, omega=1)
        half = S(1, nu_div=2)
        assert hypalg.differentiate(half) == C(1, nu_div=2).scale(Fraction(1, 2), omega=1)

    def test_d_domega(self):
        # F(omega) = omega * sinh(omega tau): derivative sinh + omega tau cosh
        e = S().scale(1, omega=1)
        assert hypalg.d_domega(e) == S() + hypalg.mul(X(), C())

    @settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(elements())
    def test_round_trip(self, e):
        try:
            f = hypalg.antiderivative_x(e)
        except NonElementaryIntegral:
            return
        assert hypalg.d_dx(f) == e

    @settings(max_examples=100, deadline=None)
    @given(elements())
    def test_idempotent(self, e):
        once = hypalg.canonicalize(e)
        assert hypalg.canonicalize(once) == once
        assert once == e

    @settings(max_examples=50, deadline=None)
    @given(elements(max_m=3), elements(max_m=3), st.lists(st.floats(0.2, 3.0), min_size=10, max_size=10))
    def test_numeric_mul(self, e1, e2, xs):
        prod = hypalg.mul(e1, e2)
        for x in xs:
            a, b, c = (hypalg.evaluate(v, x) for v in (e1, e2, prod))
            scale = max(abs(a * b), abs(direct(e1, x) * direct(e2, x)), 1e-300)
            assert abs(c - a * b) <= 1e-12 * max(scale, abs(c)) + 1e-300


class TestLaurent:
    def test_inverse_sinh(self):
        coeffs = hypalg.laurent_expansion(HypExpr.inv_sinh(1), 3)
        assert coeffs[:3] == [1, 0, Fraction(-1, 6)]
        assert float(sum(c * 0.01 ** (i - 1) for i, c in enumerate(coeffs))) == \
            pytest.approx(1 / math.sinh(0.01), rel=1e-12)

    def test_sinh4(self):
        s4 = hypalg.mul(hypalg.mul(S(), S()), hypalg.mul(S(), S()))
        coeffs = hypalg.laurent_expansion(s4, 6)
        assert coeffs[:4] == [0, 0, 0, 0]
        assert coeffs[4] == 1

    def test_small_x_switch_is_seamless(self):
        e = hypalg.mul(X(), C()).times_sinh(-3) - HypExpr.inv_sinh(2)
        for x in (0.5e-3, 0.999e-3, 1.001e-3, 2e-3):
            assert hypalg.evaluate(e, x) == pytest.approx(direct(e, x), rel=1e-10)

    def test_diverges_at_zero(self):
        with pytest.raises(DivergesAtZero):
            hypalg.evaluate(HypExpr.inv_sinh(2), 0.0)
        assert hypalg.evaluate(S().times_sinh(-1), 0.0) == 1.0


class TestEvaluate:
    def test_sinh4_integral(self):
        e = HypExpr.multiangle([(Fraction(1, 32), 0, "sinh", 4), (Fraction(-1, 4), 0, "sinh", 2),
                                (Fraction(3, 8), 1, "1", 0)])
        quad = integrate.quad(lambda t: math.sinh(t) ** 4, 0, 1, epsabs=0, epsrel=1e-13)[0]
        assert hypalg.evaluate(e, 1.0) == pytest.approx(quad, rel=1e-13)
        assert quad == pytest.approx(0.3210948104, abs=1e-10)

    def test_constant(self):
        for t in (0.0, 0.3, 7.0):
            assert hypalg.evaluate(HypExpr.const(1), t) == 1.0

    def test_parameters(self):
        p = ModelParams(M=2.0, omega=1.5, hbar=0.5)
        e = S().scale(3, hbar=1, M=-2, omega=1)
        assert hypalg.evaluate(e, 0.7, p) == pytest.approx(3 * 0.5 / 4 * 1.5 * math.sinh(1.05), rel=1e-14)

    def test_cancellation_fallback(self):
        # x^5/5 - (sinh^4 integral) numerator cancels heavily near x=0.01
        e = hypalg.antiderivative_x(hypalg.mul(hypalg.mul(S(), S()), hypalg.mul(S(), S()))).times_sinh(-4)
        for x in (0.002, 0.01, 0.05):
            assert hypalg.evaluate(e, x) == pytest.approx(direct(e, x), rel=1e-12)

    def test_extended(self):
        e = hypalg.mul(X(), C()).times_sinh(-2)
        val = hypalg.evaluate(e, 0.8, ModelParams(precision="extended"))
        assert isinstance(val, mpmath.mpf)
        assert float(val) == pytest.approx(0.8 * math.cosh(0.8) / math.sinh(0.8) ** 2, rel=1e-15)

    def test_negative_tau(self):
        with pytest.raises(ValueError):
            hypalg.evaluate(S(), -1.0)


class TestRebaseAndSerialization:
    def test_rebase(self):
        # sinh(x)/sinh(x)... coth^2 in half angle: (1 + cosh x)/sinh x = coth(x/2)
        e = (HypExpr.const(1) + C()).times_sinh(-1)
        half = hypalg.rebase_half(e)
        assert half == C(1, nu_div=2).times_sinh(-1)

    def test_rebase_not_representable(self):
        with pytest.raises(ValueError):
            hypalg.rebase_half(HypExpr.inv_sinh(1))

    @settings(max_examples=60, deadline=None)
    @given(elements())
    def test_json_round_trip(self, e):
        assert hypalg.loads(hypalg.dumps(e)) == e
        assert hypalg.dumps(hypalg.loads(hypalg.dumps(e))) == hypalg.dumps(e)

    def test_json_shape(self):
        d = hypalg.expr_to_json(S().scale(Fraction(1, 3), hbar=1))
        assert d["nu"] == "omega" and d["m"] == 0
        assert {"num", "den", "a", "b", "eh", "em", "ew"} <= set(d["terms"][0])

    def test_latex_multiangle(self):
        e = HypExpr.multiangle([(Fraction(1, 32), 0, "sinh", 4), (Fraction(-1, 4), 0, "sinh", 2),
                                (Fraction(3, 8), 1, "1", 0)], mono=(-1, 0, -1))
        tex = hypalg.to_latex(e)
        assert tex == (r"\frac{1}{\hbar \omega} \left[\frac{1}{32} \sinh 4\omega\tau"
                       r" - \frac{1}{4} \sinh 2\omega\tau + \frac{3}{8} \omega\tau\right]")
