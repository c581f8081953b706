import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from stein_chisq import selftest
from stein_chisq.bounds import (
    CONSTANTS,
    PEARSON_VARIANTS,
    BoundReport,
    Constant,
    MomentBundle,
    NormBundle,
    bound_kolmogorov_pearson,
    bound_literature,
    bound_pearson_smooth,
    bound_squared_clt,
    chi2_window_cap,
    clt_alphas,
    halpha_norms,
    kolmogorov_optimized,
    pearson_halpha_bound,
    stated_alpha,
)
from stein_chisq.statistics import MultinomialModel, distribution_moments

UNIT = NormBundle.unit(5)
RADEMACHER = distribution_moments("rademacher")
norm_values = st.lists(st.floats(0, 10), min_size=6, max_size=6)
probabilities = st.lists(st.floats(0.05, 1.0), min_size=2, max_size=6).map(
    lambda v: tuple(np.asarray(v) / np.sum(v)))


class TestBundles:
    def test_missing_norm(self):
        with pytest.raises(KeyError, match="h\\^\\(3\\)"):
            bound_squared_clt(NormBundle({0: 1, 1: 1, 2: 1}), RADEMACHER, 10)

    def test_negative_norm(self):
        with pytest.raises(ValueError):
            NormBundle({0: -1.0})

    @pytest.mark.parametrize("kw", [dict(abs3=1, m4=0.5, m6=1, m8=1, skew_abs=0),
                                    dict(abs3=0.5, m4=1, m6=1, m8=1, skew_abs=0),
                                    dict(abs3=1, m4=2, m6=3, m8=1.5, skew_abs=0),
                                    dict(abs3=1, m4=1, m6=1, m8=1, skew_abs=2)])
    def test_invalid_moments(self, kw):
        with pytest.raises(ValueError):
            MomentBundle(**kw)

    def test_report_rejects_negative(self):
        with pytest.raises(ValueError):
            BoundReport("x", {}, -1.0)


class TestSquaredCLT:
    def test_single_column_rademacher(self):
        n = 25
        norms = NormBundle({0: 1.2, 1: 0.8, 2: 0.5, 3: 1.6})
        want = 4 / (3 * n) * sum(a * norms[k] for k, a in enumerate(clt_alphas(0.0)))
        assert bound_squared_clt(norms, RADEMACHER, n).value == pytest.approx(want, rel=1e-14)

    def test_skewness_coefficient(self):
        assert clt_alphas(1.0)[2] == 1984.0

    def test_large_dimension_prefactor(self):
        rep = bound_squared_clt(UNIT, RADEMACHER, 10, d=10**8)
        assert rep.extra["prefactor"] * 10 / 4 == pytest.approx(1.0, rel=1e-7)

    @given(n=st.integers(1, 10**6), d=st.integers(1, 50))
    def test_nonnegative_and_decreasing(self, n, d):
        a = bound_squared_clt(UNIT, RADEMACHER, n, d).value
        b = bound_squared_clt(UNIT, RADEMACHER, n + 1, d).value
        assert 0 <= b < a


class TestPearson:
    def test_two_cells_sqrt(self):
        rep = bound_pearson_smooth(UNIT, MultinomialModel(100, (0.5, 0.5)), "sqrt")
        assert rep.value == pytest.approx(153.87, abs=5e-3)
        assert rep.hypotheses_satisfied

    def test_two_cells_n1(self):
        rep = bound_pearson_smooth(UNIT, MultinomialModel(10**6, (0.5, 0.5)), "n1")
        assert rep.value == pytest.approx(4.4539, abs=5e-5)

    @pytest.mark.parametrize("variant", PEARSON_VARIANTS)
    def test_uniform_shorthand(self, variant):
        a = bound_pearson_smooth(UNIT, MultinomialModel(50, (0.25,) * 4), variant).value
        b = bound_pearson_smooth(UNIT, MultinomialModel(50, (1 / 4, 1 / 4, 1 / 4, 1 / 4)), variant).value
        assert a == b

    def test_pstar_variants_are_weaker(self):
        model = MultinomialModel(40, (0.2, 0.3, 0.5))
        for v in ("n1", "sqrt"):
            assert (bound_pearson_smooth(UNIT, model, v).value
                    <= bound_pearson_smooth(UNIT, model, v + "-pstar").value)

    def test_small_cells_reported_not_raised(self):
        rep = bound_pearson_smooth(UNIT, MultinomialModel(3, (0.1, 0.9)), "sqrt")
        assert not rep.hypotheses_satisfied and rep.unsatisfied == ["np_j>=1"]

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            bound_pearson_smooth(UNIT, MultinomialModel(3, (0.5, 0.5)), "n2")

    @given(v=norm_values, w=norm_values, a=st.floats(0, 5), p=probabilities,
           variant=st.sampled_from(PEARSON_VARIANTS))
    def test_linear_in_norms(self, v, w, a, p, variant):
        model = MultinomialModel(60, p)
        nv, nw = NormBundle(dict(enumerate(v))), NormBundle(dict(enumerate(w)))
        mix = NormBundle({k: a * v[k] + w[k] for k in range(6)})
        lhs = bound_pearson_smooth(mix, model, variant).value
        rhs = a * bound_pearson_smooth(nv, model, variant).value + bound_pearson_smooth(nw, model, variant).value
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-300)

    @given(p=probabilities, n=st.integers(1, 10**5), variant=st.sampled_from(PEARSON_VARIANTS))
    def test_decreasing_in_n(self, p, n, variant):
        a = bound_pearson_smooth(UNIT, MultinomialModel(n, p), variant).value
        b = bound_pearson_smooth(UNIT, MultinomialModel(n + 1, p), variant).value
        assert 0 <= b < a


class TestKolmogorov:
    def test_two_cells(self):
        assert bound_kolmogorov_pearson(2 * 10**5, (0.5, 0.5)).value == pytest.approx(3.4216, abs=5e-5)

    def test_three_cells(self):
        assert bound_kolmogorov_pearson(3 * 10**6, (1 / 3,) * 3).value == pytest.approx(2.412, rel=1e-9)

    @given(n=st.integers(1, 10**7), p=probabilities)
    def test_decreasing_in_n(self, n, p):
        a = bound_kolmogorov_pearson(n, p).value
        b = bound_kolmogorov_pearson(2 * n, p).value
        assert 0 <= b < a

    def test_reports_small_cells(self):
        assert not bound_kolmogorov_pearson(3, (0.1, 0.9)).hypotheses_satisfied

    @pytest.mark.parametrize("n, p", [(50, (0.3, 0.7)), (500, (0.2, 0.3, 0.5)), (10**4, (0.2,) * 5)])
    def test_optimizer_never_worse(self, n, p):
        alpha = stated_alpha(n, p)
        at_stated = pearson_halpha_bound(n, p)(alpha) + chi2_window_cap(len(p))(alpha)
        best_alpha, best = kolmogorov_optimized(n, p)
        assert best <= at_stated * (1 + 1e-12) and best_alpha > 0

    @pytest.mark.parametrize("n, p", [(50, (0.3, 0.7)), (500, (0.2, 0.3, 0.5)), (10**4, (0.2,) * 5)])
    def test_closed_form_covers_objective(self, n, p):
        alpha = stated_alpha(n, p)
        objective = pearson_halpha_bound(n, p)(alpha) + chi2_window_cap(len(p))(alpha)
        assert bound_kolmogorov_pearson(n, p).value >= objective * (1 - 1e-12)

    def test_window_caps(self):
        assert chi2_window_cap(2)(0.3) == pytest.approx(math.sqrt(2 * 0.3 / math.pi), rel=1e-15)
        assert chi2_window_cap(6)(0.3) == pytest.approx(0.3 / (2 * math.sqrt(3 * math.pi)), rel=1e-15)

    @given(alpha=st.floats(1e-3, 2.0), z=st.floats(0, 30), m=st.integers(2, 9))
    def test_window_caps_dominate_chi2_mass(self, alpha, z, m):
        mass = stats.chi2.cdf(z + alpha, m - 1) - stats.chi2.cdf(z, m - 1)
        assert mass <= chi2_window_cap(m)(alpha) + 1e-12

    def test_halpha_norms(self):
        nb = halpha_norms(0.25)
        assert (nb[0], nb[1], nb[2]) == (1.0, 8.0, 64.0)


class TestLiterature:
    def test_uniform_four_cells(self):
        first, _ = bound_literature(10**6, (0.25,) * 4)
        assert first == pytest.approx(8.0, rel=1e-14)

    @given(m=st.integers(2, 50), n=st.integers(1, 10**6))
    def test_refinement_smaller(self, m, n):
        first, second = bound_literature(n, (1 / m,) * m)
        assert second < first

    def test_scaling_in_n(self):
        a = bound_literature(1000, (0.2, 0.3, 0.5))
        b = bound_literature(2000, (0.2, 0.3, 0.5))
        assert np.allclose(np.array(a) / np.array(b), math.sqrt(2), rtol=1e-14)


class TestConstantAudits:
    def test_all_audits_pass(self):
        for cid, checks in selftest.run_audits().items():
            assert all(checks.values()), (cid, [k for k, ok in checks.items() if not ok])

    @pytest.mark.parametrize("name", sorted(CONSTANTS))
    def test_each_constant_is_audited(self, name, monkeypatch):
        c = CONSTANTS[name]
        monkeypatch.setitem(CONSTANTS, name, Constant(10 * c.value, c.ref))
        caught = [cid for cid, checks in selftest.run_audits().items() if not all(checks.values())]
        assert caught, f"scaling {name} went unnoticed"
