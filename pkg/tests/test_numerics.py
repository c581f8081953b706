import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stein_chisq.numerics import (
    HALF_LINE,
    Interval,
    QuadratureError,
    QuadratureResult,
    chi2_cdf,
    integrate_semiaxis,
    reg_lower_gamma,
    sup_norm_estimate,
)
from stein_chisq.test_functions import make_halpha


class TestIntegrate:
    def test_exponential_mass(self):
        res = integrate_semiaxis(lambda x: math.exp(-x))
        assert isinstance(res, QuadratureResult)
        assert abs(res.value - 1.0) <= 1e-12
        assert res.abs_error_estimate >= 0 and res.evaluations >= 1

    @pytest.mark.parametrize("k, want", [(1, 2 / 15), (2, 8 / 105), (3, 16 / 315)])
    def test_u_integrals(self, k, want):
        f = lambda u: math.exp(-3 * u) * (1 - math.exp(-2 * u)) ** k
        assert abs(integrate_semiaxis(f).value - want) <= 1e-12

    def test_bounded_domain(self):
        res = integrate_semiaxis(lambda x: x * x, Interval(0.0, 3.0))
        assert abs(res.value - 9.0) <= 1e-12

    def test_endpoint_singularity(self):
        # int_0^1 x^(-1/2) dx = 2
        res = integrate_semiaxis(lambda x: 1.0, Interval(0.0, 1.0), singular_power=-0.5)
        assert abs(res.value - 2.0) <= 1e-10

    def test_failure_carries_best_estimate(self):
        with pytest.raises(QuadratureError) as info:
            integrate_semiaxis(lambda x: math.sin(x) * x, HALF_LINE, limit=5)
        assert math.isfinite(info.value.best_estimate) or math.isnan(info.value.best_estimate)

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            integrate_semiaxis(lambda x: math.exp(-x), rel_tol=0.0)

    def test_empty_interval(self):
        with pytest.raises(ValueError):
            Interval(2.0, 1.0)

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(0.2, 4))
    def test_linearity(self, a, b, c):
        f = lambda x: math.exp(-c * x)
        g = lambda x: x * math.exp(-x)
        lhs = integrate_semiaxis(lambda x: a * f(x) + b * g(x)).value
        rhs = a * integrate_semiaxis(f).value + b * integrate_semiaxis(g).value
        assert abs(lhs - rhs) <= 1e-9 * (1 + abs(a) / c + abs(b))


class TestRegLowerGamma:
    def test_exponential(self):
        assert abs(reg_lower_gamma(1.0, 2.0) - (1 - math.exp(-2))) <= 1e-15

    def test_half_shape(self):
        assert abs(reg_lower_gamma(0.5, 0.5) - 0.6826894921370859) <= 1e-14

    def test_against_series(self):
        want = float(mpmath.gammainc(3.7, 0, 2.9, regularized=True))
        assert abs(reg_lower_gamma(3.7, 2.9) - want) <= 1e-12

    def test_limits(self):
        assert reg_lower_gamma(2.0, 0.0) == 0.0
        assert reg_lower_gamma(2.0, math.inf) == 1.0

    @given(r=st.floats(0.1, 60), x=st.floats(0, 200))
    def test_matches_mpmath(self, r, x):
        want = float(mpmath.gammainc(r, 0, x, regularized=True))
        assert abs(reg_lower_gamma(r, x) - want) <= 1e-11

    @given(r=st.floats(0.1, 40), x=st.floats(0, 100), dx=st.floats(0, 10))
    def test_monotone(self, r, x, dx):
        assert reg_lower_gamma(r, x) <= reg_lower_gamma(r, x + dx) + 1e-15

    def test_chi2_cdf(self):
        # chi^2_2 is Exp(1/2)
        assert abs(chi2_cdf(3.0, 2) - (1 - math.exp(-1.5))) <= 1e-15


class TestSupNorm:
    def test_cosine(self):
        assert abs(sup_norm_estimate(np.cos, Interval(0.0, 20.0)) - 1.0) <= 1e-12

    def test_peak_of_x_exp(self):
        est = sup_norm_estimate(lambda x: x * np.exp(-x))
        assert abs(est - 1 / math.e) <= 1e-9
        assert est <= 1 / math.e + 1e-15

    def test_halpha_second_derivative(self):
        h = make_halpha(1.0, 0.5)
        est = sup_norm_estimate(lambda x: h.deriv(2, x), Interval(0.0, 3.0))
        assert abs(est - 16.0) <= 1e-9

    def test_nonfinite_names_abscissa(self):
        with pytest.raises(ValueError, match="x="):
            sup_norm_estimate(lambda x: np.where(x > 2, np.inf, 1.0), Interval(0.0, 4.0))

    def test_refinement_only_increases(self):
        f = lambda x: np.sin(7.3 * x) * np.exp(-0.1 * x)
        assert sup_norm_estimate(f, refine=True) >= sup_norm_estimate(f, refine=False)

    def test_small_grid_rejected(self):
        with pytest.raises(ValueError):
            sup_norm_estimate(np.cos, grid=10)
