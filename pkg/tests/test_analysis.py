import math
import warnings

import numpy as np
import pytest

from svesim.analysis import (bound_components, comparison_report, counterexample_report, empirical_holder,
                             resolvent_second_kind, strong_error, theta_formula)
from svesim.errors import DomainError, EstimationError, ParameterError, PreconditionError, RegularityWarning
from svesim.kernels import ExpSumKernel, FractionalKernel
from svesim.mittag_leffler import ml
from svesim.model import InputCurve, SveProblem, constant, linear
from svesim.schemes import BrownianDriver, PathEnsemble, SimConfig, simulate_coupled


def linear_curve():
    # g(t) = t as a power curve with gamma0 = 2
    return InputCurve.power(1.0, 2.0)


class TestComparisonReport:
    def test_identical(self):
        k = ExpSumKernel((1.0, 0.5), (0.5, 3.0))
        p = SveProblem(InputCurve.constant(1.0), k, linear(0.0, -1.0), constant(1.0))
        e1, e2 = simulate_coupled(p, p, SimConfig(1.0, 16, 2, 40, seed=1), BrownianDriver(1))
        rep = comparison_report(e1, e2, 0.0)
        assert rep.violation_fraction == 0.0 and rep.max_exceedance == 0.0
        assert np.all(rep.per_time_means == 0.0)

    def test_counts(self):
        grid = np.array([0.5, 1.0])
        e1 = PathEnsemble(grid, np.array([[0.0, 2.0], [0.0, 0.0], [1.0, 0.0]]), "Euler")
        e2 = PathEnsemble(grid, np.zeros((3, 2)), "Euler")
        rep = comparison_report(e1, e2, 0.5)
        assert rep.n_violations == 2 and rep.violation_fraction == pytest.approx(2 / 3)
        assert rep.max_exceedance == 2.0
        np.testing.assert_allclose(rep.per_time_means, [-1 / 3, -2 / 3])

    def test_misaligned(self):
        e1 = PathEnsemble([0.5, 1.0], np.zeros((3, 2)), "Euler")
        with pytest.raises(PreconditionError):
            comparison_report(e1, PathEnsemble([0.5, 1.0], np.zeros((4, 2)), "Euler"))
        with pytest.raises(PreconditionError):
            comparison_report(e1, PathEnsemble([0.4, 1.0], np.zeros((3, 2)), "Euler"))

    def test_negative_delta(self):
        e = PathEnsemble([1.0], np.zeros((2, 1)), "Euler")
        with pytest.raises(ParameterError):
            comparison_report(e, e, -1.0)


class TestBoundComponents:
    def test_constant_kernel(self):
        _, wk, _ = bound_components(InputCurve.constant(1.0), ExpSumKernel((2.0,), (0.0,)), None, 1.0, 10)
        assert wk == 0.0

    def test_linear_g(self):
        wg, _, _ = bound_components(linear_curve(), FractionalKernel(1.0), None, 1.0, 10)
        assert wg == pytest.approx(0.1, rel=1e-12)

    def test_power_kernel(self):
        h = 0.05
        _, wk, _ = bound_components(InputCurve.constant(0.0), FractionalKernel(1.5), None, 1.0, 20)
        assert wk == pytest.approx(h ** 0.5 / math.gamma(1.5), abs=1e-6)

    def test_sup_c2(self):
        _, _, s = bound_components(InputCurve.constant(0.0), FractionalKernel(1.0), lambda t: 2 * t, 1.0, 4)
        # int_{3/4}^{1} 4 t^2 dt
        assert s == pytest.approx(4 / 3 * (1 - 0.75 ** 3), rel=1e-12)

    def test_singular_g_finite(self):
        wg, wk, _ = bound_components(InputCurve.power(1.0, 0.8), FractionalKernel(0.7), None, 1.0, 8)
        assert math.isfinite(wg) and wk == math.inf


class TestStrongError:
    def test_deterministic_zero(self):
        p = SveProblem(InputCurve.power(1.0, 1.5), ExpSumKernel((1.0,), (1.0,)), constant(0.0), constant(0.0))
        rep = strong_error(p, SimConfig(1.0, 4, 1, 20, seed=1), [4, 8, 16])
        assert max(rep.errors) <= 1e-20
        assert math.isnan(rep.fitted_rate)

    def test_divisibility(self):
        p = SveProblem(InputCurve.constant(1.0), ExpSumKernel((1.0,), (1.0,)), constant(0.0), constant(1.0))
        with pytest.raises(PreconditionError):
            strong_error(p, SimConfig(1.0, 4, 1, 4), [3, 8], ref_factor=2)

    def test_decreasing_ou(self):
        p = SveProblem(InputCurve.constant(1.0), ExpSumKernel((0.5, 1.0), (1.0, 4.0)),
                       linear(0.5, -1.0), linear(0.3, 0.2))
        rep = strong_error(p, SimConfig(1.0, 8, 1, 500, seed=3), [16, 32, 64, 128])
        assert np.all(np.diff(rep.errors) < 0)
        assert rep.fitted_rate > 0
        assert len(rep.bound_components) == 4


class TestTheta:
    def test_substitution(self):
        assert theta_formula(0.5, 2.0, 1.0, 12.0) == 0.5

    def test_xi_zero(self):
        g, eta = 0.2, 1.3
        assert theta_formula(g, eta, 0.0, 5.0) == pytest.approx(g + eta / (2 * (2 + eta)), rel=1e-15)

    def test_positivity_iff(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            g, eta, xi, q = rng.uniform(0.01, 0.5), rng.uniform(0.1, 4), rng.uniform(0, 3), rng.uniform(1, 50)
            crit = 2 * xi * (1 + 1 / eta) / (g + eta / (2 * (2 + eta)))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RegularityWarning)
                th = theta_formula(g, eta, xi, q)
            assert (th > 0) == (q > crit)

    def test_warns(self):
        with pytest.warns(RegularityWarning):
            th = theta_formula(0.1, 0.5, 3.0, 2.0)
        assert th < 0


class TestEmpiricalHolder:
    def test_linear_paths(self):
        grid = np.linspace(0.01, 1, 100)
        e = PathEnsemble(grid, np.tile(grid, (3, 1)), "Euler")
        assert empirical_holder(e, np.zeros(100)) == pytest.approx(1.0, abs=1e-10)

    def test_degenerate(self):
        grid = np.linspace(0.01, 1, 100)
        e = PathEnsemble(grid, np.ones((3, 100)), "Euler")
        with pytest.raises(EstimationError):
            empirical_holder(e, np.ones(100))

    def test_bad_arguments(self):
        grid = np.linspace(0.1, 1, 10)
        e = PathEnsemble(grid, np.tile(grid, (2, 1)), "Euler")
        with pytest.raises(ParameterError):
            empirical_holder(e, np.zeros(10), p=1.0)
        with pytest.raises(ParameterError):
            empirical_holder(e, np.zeros(10), lag_set=(1, 16))


class TestResolvent:
    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    def test_constant(self, a):
        R = resolvent_second_kind(lambda t: np.full(np.shape(t), a), 1.0, 4096)
        t = np.linspace(0, 1, 4097)
        np.testing.assert_allclose(R, a * np.exp(a * t), rtol=1e-6)

    def test_zero(self):
        assert np.all(resolvent_second_kind(lambda t: np.zeros(np.shape(t)), 1.0, 64) == 0.0)

    def test_linear_self_refinement(self):
        F = lambda t: np.asarray(t, dtype=float)
        r1 = resolvent_second_kind(F, 1.0, 1024)
        r4 = resolvent_second_kind(F, 1.0, 4096)
        np.testing.assert_allclose(r1, r4[::4], atol=1e-6)
        # independent closed form: R'' = R with R(0)=0, R'(0)=1
        np.testing.assert_allclose(r1, np.sinh(np.linspace(0, 1, 1025)), atol=1e-6)

    def test_nonnegative(self):
        F = lambda t: np.abs(np.sin(5 * np.asarray(t, dtype=float))) + 0.1
        assert np.all(resolvent_second_kind(F, 2.0, 256) >= 0)

    def test_singular_against_mittag_leffler(self):
        a = 0.75
        F = lambda t: np.asarray(t, dtype=float) ** (a - 1) / math.gamma(a)
        R = resolvent_second_kind(F, 1.0, 1024)
        t = np.linspace(0, 1, 1025)[1:]
        exact = t ** (a - 1) * ml(a, a, t ** a)
        # the first cell is integrated with R ~ F, so accuracy is first order near 0
        np.testing.assert_allclose(R[513:], exact[512:], rtol=2e-4)
        assert np.all(R[1:] >= 0)

    def test_nonintegrable(self):
        with pytest.raises(DomainError):
            resolvent_second_kind(lambda t: np.asarray(t, dtype=float) ** -1.2, 1.0, 64)

    def test_small_grid(self):
        with pytest.raises(ParameterError):
            resolvent_second_kind(lambda t: t, 1.0, 8)


class TestCounterexample:
    def test_equal_starts(self):
        rep = counterexample_report(1.5, 1.0, 1.0, 1.0, SimConfig(2.0, 32, 1, 50, seed=4))
        assert np.all(rep.analytic_diff == 0.0) and np.all(rep.mc_diff_mean == 0.0)

    def test_analytic_negative(self):
        rep = counterexample_report(1.5, 1.0, 0.0, 1.0, SimConfig(10.0, 200, 1, 2, seed=1))
        assert rep.analytic_diff.min() < 0

    def test_analytic_matches_ml(self):
        rep = counterexample_report(1.5, 1.2, 0.0, 2.0, SimConfig(5.0, 20, 1, 2, seed=1))
        t = rep.grid
        np.testing.assert_allclose(rep.analytic_diff, 2.0 * t ** 0.2 * ml(1.5, 1.2, -t ** 1.5), rtol=1e-14)

    def test_mc_tracks_analytic(self):
        # additive noise cancels pathwise, so the difference is the deterministic Euler solution
        rep = counterexample_report(1.5, 1.0, 0.0, 1.0, SimConfig(10.0, 256, 1, 20, seed=2))
        np.testing.assert_allclose(rep.mc_diff_mean, rep.analytic_diff, atol=0.05)

    @pytest.mark.parametrize("kw", [dict(alpha=0.9), dict(beta0=0.0), dict(x1=2.0)])
    def test_invalid(self, kw):
        args = dict(alpha=1.5, beta0=1.0, x1=0.0, x2=1.0)
        args.update(kw)
        with pytest.raises(ParameterError):
            counterexample_report(c=SimConfig(1.0, 4), **args)
