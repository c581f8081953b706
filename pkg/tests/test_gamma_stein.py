import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stein_chisq.bounds import NormBundle
from stein_chisq.gamma_stein import (
    BudgetExhausted,
    GammaParams,
    bound_catalog,
    characterization_residual,
    derivative_table,
    gamma_expectation,
    recurrence_residual,
    solve_first_derivative,
    stein_residual,
)
from stein_chisq.test_functions import builtin_family, constant_function, make_halpha

COS = builtin_family("cos", 1.0)
NORMS = NormBundle({0: 1.3, 1: 0.7, 2: 1.9, 3: 0.45})


class TestParams:
    def test_chi_square(self):
        p = GammaParams.chi_square(3)
        assert (p.r, p.lam, p.dof) == (1.5, 0.5, 3.0)
        assert p.is_chi_square and not GammaParams(1.5, 1.0).is_chi_square

    @pytest.mark.parametrize("r, lam", [(0, 1), (-1, 1), (1, 0), (math.inf, 1), (1, math.nan)])
    def test_rejects_invalid(self, r, lam):
        with pytest.raises(ValueError):
            GammaParams(r, lam)

    def test_density_normalized(self):
        p = GammaParams(2.5, 0.7)
        x = np.linspace(1e-9, 80, 200001)
        assert abs(np.trapezoid(np.exp(p.logpdf(x)), x) - 1.0) <= 1e-6


class TestExpectation:
    def test_mean(self):
        assert gamma_expectation(lambda x: x, GammaParams(2.0, 1.0)) == pytest.approx(2.0, rel=1e-12)

    def test_constant(self):
        assert gamma_expectation(constant_function(1.0), GammaParams(0.4, 3.0)) == pytest.approx(1.0, rel=1e-12)

    def test_cosine_transform(self):
        # E cos X = Re (1 - i)^(-1) for X ~ Exp(1)
        assert gamma_expectation(COS, GammaParams(1.0, 1.0)) == pytest.approx(0.5, abs=1e-12)

    @given(r=st.floats(0.2, 30), lam=st.floats(0.2, 5), w=st.floats(0.1, 3))
    def test_characteristic_function(self, r, lam, w):
        want = (1 + (w / lam) ** 2) ** (-r / 2) * math.cos(r * math.atan(w / lam))
        got = gamma_expectation(builtin_family("cos", w), GammaParams(r, lam))
        assert abs(got - want) <= 1e-10


class TestSolution:
    def test_first_derivative_at_zero(self):
        p = GammaParams(1.5, 0.5)
        gh = gamma_expectation(COS, p)
        assert solve_first_derivative(COS, p, 0.0) == pytest.approx((1.0 - gh) / 1.5, rel=1e-10)

    def test_constant_h_gives_zero(self):
        t = derivative_table(constant_function(2.0), GammaParams(1.0, 0.5), 3)
        for k in (1, 2, 3):
            assert np.max(np.abs(t.deriv(k, np.linspace(0, 30, 50)))) <= 1e-12

    def test_residual_with_finite_differences(self):
        t = derivative_table(COS, GammaParams(1.0, 1.0), 1)
        x, step = 1.0, 1e-5
        f1 = t.deriv(1, x)
        f2 = (t.deriv(1, x + step) - t.deriv(1, x - step)) / (2 * step)
        assert abs(x * f2 + (1 - x) * f1 - (math.cos(x) - 0.5)) <= 1e-8

    def test_second_derivative_at_zero(self):
        p = GammaParams(2.0, 0.5)
        t = derivative_table(COS, p, 2)
        f1 = t.deriv(1, 0.0)
        # differentiating the equation once and setting x = 0
        want = (COS.deriv(1, 0.0) + p.lam * f1) / (p.r + 1)
        assert t.deriv(2, 0.0) == pytest.approx(want, rel=1e-9, abs=1e-12)
        assert t.at_zero()[2] == pytest.approx(want, rel=1e-12, abs=1e-15)

    def test_recurrence_against_finite_difference(self, cos_table):
        x, step = 2.0, 1e-4
        fd = (cos_table.deriv(2, x + step) - cos_table.deriv(2, x - step)) / (2 * step)
        assert cos_table.recurrence_value(3, x) == pytest.approx(fd, rel=1e-4)

    def test_recurrence_residual(self, cos_table):
        x = np.linspace(0.05, 25, 40)
        assert np.max(np.abs(recurrence_residual(cos_table, 1, x))) <= 1e-9
        assert np.max(np.abs(recurrence_residual(cos_table, 2, x))) <= 1e-9

    @given(x=st.floats(0, 60))
    def test_stein_residual_pointwise(self, cos_table, x):
        assert abs(float(stein_residual(cos_table, x))) <= 1e-9

    def test_branches_agree_at_split(self):
        p = GammaParams(2.5, 0.5)
        t = derivative_table(COS, p, 4)
        lo = t.values(p.split, branch="lower")
        hi = t.values(p.split, branch="upper")
        for k in t.orders:
            assert abs(float(lo[k]) - float(hi[k])) <= 1e-8

    def test_halpha_solution(self):
        p = GammaParams(1.0, 0.5)
        t = derivative_table(make_halpha(1.5, 0.5), p, 3)
        x = np.linspace(0.0, 10.0, 41)
        assert np.max(np.abs(stein_residual(t, x))) <= 1e-9

    def test_order_limit(self):
        h = builtin_family("cos", 1.0, order=2)
        with pytest.raises(ValueError):
            derivative_table(h, GammaParams(1.0, 1.0), 4)
        with pytest.raises(ValueError):
            derivative_table(h, GammaParams(1.0, 1.0), 0)

    def test_rejects_negative_x(self, cos_table):
        with pytest.raises(ValueError):
            cos_table.deriv(1, -1.0)

    @given(c=st.floats(-5, 5))
    def test_linear_in_h(self, cos_table, c):
        scaled = builtin_family("cos", 1.0)
        x = np.array([0.0, 0.7, 3.0, 12.0])
        t = derivative_table(scaled, cos_table.params, 2, gamma_mean_h=cos_table.gamma_mean_h)
        assert np.allclose(c * t.deriv(2, x), c * cos_table.deriv(2, x), rtol=1e-13, atol=1e-15)


class TestCatalog:
    def test_luk_with_half_rate(self):
        cat = bound_catalog(GammaParams(1.5, 0.5), 3, NORMS, ["luk"])
        assert cat["luk"] == pytest.approx(2 * NORMS[3] / 3, rel=1e-15)

    def test_chisq_two_dof(self):
        cat = bound_catalog(GammaParams.chi_square(2), 2, NORMS, ["chisq"])
        assert cat["chisq"] == pytest.approx(3 * NORMS[1] + NORMS[0], rel=1e-15)

    def test_new_bound(self):
        cat = bound_catalog(GammaParams(1.0, 1.0), 2, NORMS, ["new"])
        assert cat["new"] == pytest.approx(3 * NORMS[1] + 2 * NORMS[0], rel=1e-15)

    def test_applicability(self):
        assert "chisq" not in bound_catalog(GammaParams(1.0, 1.0), 2, NORMS)
        assert "new" not in bound_catalog(GammaParams(1.0, 1.0), 1, NORMS)
        with pytest.raises(ValueError):
            bound_catalog(GammaParams(1.0, 1.0), 1, NORMS, ["new"])
        with pytest.raises(KeyError):
            bound_catalog(GammaParams(1.0, 1.0), 2, NORMS, ["xf_centered"])

    def test_missing_norm(self):
        with pytest.raises(KeyError, match="h\\^\\(4\\)"):
            bound_catalog(GammaParams(1.0, 1.0), 4, NORMS, ["luk"])

    @given(scale=st.floats(0.01, 100), k=st.integers(1, 3))
    def test_homogeneous_in_norms(self, scale, k):
        p = GammaParams(2.0, 0.5)
        base = bound_catalog(p, k, NORMS)
        scaled = bound_catalog(p, k, NormBundle({j: scale * v for j, v in NORMS.norm.items()}))
        for name in base:
            assert scaled[name] == pytest.approx(scale * base[name], rel=1e-12)

    @pytest.mark.parametrize("r, lam", [(0.5, 0.5), (1.0, 1.0), (2.5, 0.5)])
    def test_bounds_dominate_solution(self, r, lam):
        t = derivative_table(COS, GammaParams(r, lam), 3)
        norms = t.norm_bundle()
        sups = t.sup_norms(grid=256)
        for k in (1, 2, 3):
            for name, b in bound_catalog(t.params, k, norms).items():
                measured = sups["xf" if name.startswith("xf") else "f"][k]
                assert measured <= b * (1 + 1e-9), (k, name)


class TestCharacterization:
    @pytest.mark.parametrize("coefs", [[0, 1], [0, 0, 1]])
    def test_polynomials(self, coefs):
        f = np.polynomial.Polynomial(coefs)
        assert abs(characterization_residual(f, GammaParams(1.7, 0.6))) <= 1e-10

    def test_solution_table(self):
        t = derivative_table(COS, GammaParams(2.5, 0.5), 2)
        assert abs(characterization_residual(t, t.params, tol=1e-7)) <= 1e-6

    @given(coefs=st.lists(st.floats(-2, 2), min_size=2, max_size=7), r=st.floats(0.3, 6),
           lam=st.floats(0.3, 3))
    def test_any_polynomial(self, coefs, r, lam):
        f = np.polynomial.Polynomial(coefs)
        scale = sum(abs(c) * math.gamma(r + j + 1) / math.gamma(r) / lam**j for j, c in enumerate(coefs))
        assert abs(characterization_residual(f, GammaParams(r, lam))) <= 1e-9 * (1 + scale)

    def test_budget(self):
        t = derivative_table(make_halpha(1.0, 0.5), GammaParams(1.0, 0.5), 2)
        with pytest.raises(BudgetExhausted):
            characterization_residual(t, t.params, budget=32, tol=1e-15)

    def test_monte_carlo(self):
        f = np.polynomial.Polynomial([0, 0, 1])
        est, se = characterization_residual(f, GammaParams(2.0, 1.0), mode="mc", budget=20000,
                                            seed=3, return_se=True)
        assert abs(est) <= 4 * se
