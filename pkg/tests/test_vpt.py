import math
from fractions import Fraction

import numpy as np
import pytest

from anharmonic import oracle, thermo, vpt
from anharmonic.errors import NoCriterionRoot
from anharmonic.hypalg import HypExpr
from anharmonic.params import ModelParams

NAT = ModelParams()


def bare_sum(thermal, beta, g, N, omega=1.0):
    return thermo.f_series_eval(thermal, beta, omega, g, N)["truncatedSum"]


class TestShiftCoefficients:
    def test_sqrt(self):
        # sqrt(1+y) - 1 = y/2 - y^2/8 + y^3/16 - 5 y^4/128
        assert vpt.sqrt_shift_coefficients(1, 4) == (0, Fraction(1, 2), Fraction(-1, 8), Fraction(1, 16),
                                                      Fraction(-5, 128))

    def test_powers(self):
        assert vpt.sqrt_shift_coefficients(0, 3) == (1, 0, 0, 0)
        assert vpt.sqrt_shift_coefficients(2, 3) == (0, 0, Fraction(1, 4), Fraction(-1, 8))

    def test_numeric(self):
        y = 0.01
        e = vpt.sqrt_shift_coefficients(3, 12)
        assert float(sum(c * y ** i for i, c in enumerate(e))) == pytest.approx((math.sqrt(1 + y) - 1) ** 3,
                                                                                 rel=1e-14)


class TestSeries:
    def test_cache_complete(self, vpt5):
        for n in range(6):
            for j in range(6 - n):
                if (n, j) != (0, 0):
                    assert isinstance(vpt5.derivative(n, j), HypExpr)

    def test_harmonic_derivative(self, vpt5):
        for b, w in [(1.0, 1.0), (0.7, 1.8)]:
            h = 1e-5
            fd = (thermo.harmonic_free_energy(b, NAT.replace(omega=w + h))
                  - thermo.harmonic_free_energy(b, NAT.replace(omega=w - h))) / (2 * h)
            assert vpt5.value(0, 1, b, w) == pytest.approx(fd, rel=1e-8)

    def test_omega_derivative(self, vpt5):
        b, w, h = 1.2, 0.9, 1e-5
        fd = (vpt5.value(2, 0, b, w + h) - vpt5.value(2, 0, b, w - h)) / (2 * h)
        assert vpt5.value(2, 1, b, w) == pytest.approx(fd, rel=1e-8)

    def test_first_order_form(self, vpt5):
        terms = vpt.symbolic_terms(vpt5, 1)
        # (hbar Omega/4)(omega^2/Omega^2 - 1) coth(hbar beta Omega/2)
        harm = HypExpr.cosh(1, nu_div=2).times_sinh(-1).scale(Fraction(1, 4), hbar=1, omega=1)
        assert set(terms) == {(1, 0), (0, 1)}
        assert terms[(1, 0)] == thermo.closed_form_f1()
        assert terms[(0, 1)] == harm

    def test_first_order_numeric(self, vpt5):
        b, W, g = 1.0, 1.7, 0.8
        u = b * W
        want = (math.log(2 * math.sinh(u / 2)) / b + g * 3 / (4 * W ** 2) / math.tanh(u / 2) ** 2
                + W / 4 * (1 / W ** 2 - 1) / math.tanh(u / 2))
        assert vpt.resum_eval(vpt5, b, W, g, 1) == pytest.approx(want, rel=1e-13)

    def test_too_high_order(self, thermal5):
        with pytest.raises(ValueError):
            vpt.VptSeries(thermal5, 6)


class TestResummation:
    @pytest.mark.parametrize("N", [1, 2, 3, 4, 5])
    def test_trial_equals_omega(self, vpt5, thermal5, N):
        for b, g in [(1.0, 1.0), (0.4, 0.3)]:
            assert vpt.resum_eval(vpt5, b, 1.0, g, N) == pytest.approx(bare_sum(thermal5, b, g, N), rel=1e-13)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_agrees_with_bare_series_to_order_n(self, vpt5, thermal5, N):
        # at fixed r, Omega = omega / sqrt(1 + g r): difference must scale like g^(N+1)
        b, r = 0.8, 0.7
        diff = lambda g: (vpt.resum_eval(vpt5, b, 1 / math.sqrt(1 + g * r), g, N)  # noqa: E731
                          - bare_sum(thermal5, b, g, N))
        hs = [0.02, 0.01, 0.005]
        ratios = [diff(2 * h) / diff(h) for h in hs]
        for q in ratios:
            assert q == pytest.approx(2 ** (N + 1), rel=0.1)
        assert abs(ratios[-1] - 2 ** (N + 1)) <= abs(ratios[0] - 2 ** (N + 1)) + 1e-6

    def test_derivative_matches_difference(self, vpt5):
        b, g, W, h = 1.0, 1.0, 2.3, 1e-3
        for N in (2, 5):
            f = lambda om: vpt.resum_eval(vpt5, b, om, g, N)  # noqa: E731
            fd = (f(W - 2 * h) - 8 * f(W - h) + 8 * f(W + h) - f(W + 2 * h)) / (12 * h)
            assert vpt.resum_derivative(vpt5, b, W, g, 1, N) == pytest.approx(fd, rel=1e-7)

    def test_bad_input(self, vpt5):
        with pytest.raises(ValueError):
            vpt.resum_eval(vpt5, 1.0, 0.0, 1.0)


class TestOptimize:
    def test_harmonic(self, vpt5):
        sol = vpt.optimize_omega(vpt5, 1.0, 0.0, N=1)
        assert sol.omegaStar == pytest.approx(1.0, abs=1e-8)
        assert sol.value == pytest.approx(0.0413248546, abs=1e-10)
        assert sol.criterionOrder == 1

    def test_criterion_orders(self, vpt5):
        assert vpt.optimize_omega(vpt5, 1.0, 1.0, N=1).criterionOrder == 1
        sol = vpt.optimize_omega(vpt5, 1.0, 1.0, N=2)
        assert sol.criterionOrder == 2
        assert vpt.criterion_roots(vpt5, 1.0, 1.0, 1, N=2) == []

    @pytest.mark.parametrize("N", [1, 2, 3, 4, 5])
    def test_criterion_satisfied(self, vpt5, N):
        tol = 1e-10
        sol = vpt.optimize_omega(vpt5, 1.0, 1.0, N=N, tol=tol)
        k = sol.criterionOrder
        lo, hi = sol.omegaStar - tol, sol.omegaStar + tol
        a = vpt.resum_derivative(vpt5, 1.0, lo, 1.0, k, N)
        c = vpt.resum_derivative(vpt5, 1.0, hi, 1.0, k, N)
        assert a * c <= 0
        assert sol.bracket[0] <= sol.omegaStar <= sol.bracket[1]

    def test_orders_in_window(self, vpt5):
        values = [vpt.optimize_omega(vpt5, 1.0, 1.0, N=N).value for N in range(1, 6)]
        assert all(0.64 <= v <= 0.68 for v in values)

    def test_converges_to_spectral(self, vpt5):
        ref = oracle.spectral_free_energy(oracle.shoot_eigenvalues(1.0, 10), 1.0)
        err = [abs(vpt.optimize_omega(vpt5, 1.0, 1.0, N=N).value - ref) for N in range(1, 6)]
        assert err[2] < err[0] and err[4] < err[2]
        assert err[3] < err[1]
        assert err[4] < 2e-4

    def test_no_root(self, vpt5):
        with pytest.raises(NoCriterionRoot):
            vpt.optimize_omega(vpt5, 1.0, 1.0, N=1, scan=(3.0, 5.0, 20))

    def test_bad_tol(self, vpt5):
        with pytest.raises(ValueError):
            vpt.optimize_omega(vpt5, 1.0, 1.0, N=1, tol=0)

    def test_continuation(self, vpt5):
        sol = vpt.optimize_omega(vpt5, 1.0, 1.0, N=1, previous=2.0)
        assert sol.omegaStar == pytest.approx(vpt.optimize_omega(vpt5, 1.0, 1.0, N=1).omegaStar, rel=1e-9)

    def test_json(self, vpt5):
        d = vpt.optimize_omega(vpt5, 1.0, 1.0, N=1).to_json()
        assert {"beta", "g", "N", "omegaStar", "criterionOrder", "value", "diagnostics"} == set(d)


class TestSweep:
    def test_smooth(self, vpt5):
        betas = np.linspace(0.2, 5.0, 100)
        sols = vpt.sweep(vpt5, betas, 1.0, N=1)
        om = np.array([s.omegaStar for s in sols])
        assert np.all(np.isfinite([s.value for s in sols]))
        steps = np.abs(np.diff(om))
        # compare each step with the median of its neighbourhood
        for i, s in enumerate(steps):
            window = steps[max(0, i - 5):i + 6]
            assert s <= 5 * np.median(window)

    def test_monotone_branch(self, vpt5):
        # the optimal trial frequency falls steadily as the temperature drops
        om = [s.omegaStar for s in vpt.sweep(vpt5, np.linspace(0.2, 5.0, 25), 1.0, N=1)]
        assert all(b < a for a, b in zip(om, om[1:]))


class TestReport:
    def test_rows_and_fits(self, vpt5):
        rep = vpt.convergence_report(vpt5, 1.0, 1.0, 5, 0.6571)
        rows = rep["perOrder"]
        assert [r["N"] for r in rows] == [1, 2, 3, 4, 5]
        odd = [r["error"] for r in rows if r["N"] % 2]
        even = [r["error"] for r in rows if not r["N"] % 2]
        assert all(b <= a for a, b in zip(odd, odd[1:]))
        assert all(b <= a for a, b in zip(even, even[1:]))
        assert rep["oddFit"]["rate"] > 0 and rep["evenFit"]["rate"] > 0
        assert not rep["degenerate"]

    def test_reference_equals_value(self, vpt5):
        v = vpt.optimize_omega(vpt5, 1.0, 1.0, N=3).value
        rep = vpt.convergence_report(vpt5, 1.0, 1.0, 3, v)
        assert rep["perOrder"][2]["error"] == 0
        assert rep["degenerate"] and rep["oddFit"]["degenerate"]

    def test_harmonic_degenerate(self, vpt5):
        ref = thermo.harmonic_free_energy(1.0)
        rep = vpt.convergence_report(vpt5, 1.0, 0.0, 3, ref)
        for r in rep["perOrder"]:
            assert r["F"] == pytest.approx(ref, abs=1e-12)
        assert all(r["error"] < 1e-12 for r in rep["perOrder"])

    def test_order_bound(self, vpt5):
        with pytest.raises(ValueError):
            vpt.convergence_report(vpt5, 1.0, 1.0, 6, 0.6571)
