"""Explicit bound calculators and the smooth-to-Kolmogorov conversion.

All numerical constants live in :data:`CONSTANTS`.  Every formula reads the
table at call time, which keeps one auditable copy of each number (and lets
the self-test corrupt entries one at a time to prove the checks are live).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Constant:
    value: float
    ref: str


def _c(value: float, ref: str) -> Constant:
    return Constant(float(value), ref)


# name -> (value, where it enters)
CONSTANTS: Dict[str, Constant] = {
    # gamma Stein solution, ||f^(k)||
    "gamma.luk": _c(1.0, "||f^(k)|| <= c ||h^(k)|| / (k lam)"),
    "gamma.gp.a": _c(math.sqrt(2 * math.pi) + math.exp(-1), "(a / sqrt(r+k-1) + b / (r+k-1)) ||h^(k-1)||"),
    "gamma.gp.b": _c(2.0, "(a / sqrt(r+k-1) + b / (r+k-1)) ||h^(k-1)||"),
    "gamma.new.pre": _c(2.0, "pre / (r+k-1) (c1 ||h^(k-1)|| + c2 lam ||h^(k-2)||)"),
    "gamma.new.c1": _c(3.0, "pre / (r+k-1) (c1 ||h^(k-1)|| + c2 lam ||h^(k-2)||)"),
    "gamma.new.c2": _c(2.0, "pre / (r+k-1) (c1 ||h^(k-1)|| + c2 lam ||h^(k-2)||)"),
    "gamma.chisq.pre": _c(4.0, "pre / (p+2) (c1 ||h^(k-1)|| + c2 ||h^(k-2)||)"),
    "gamma.chisq.c1": _c(3.0, "pre / (p+2) (c1 ||h^(k-1)|| + c2 ||h^(k-2)||)"),
    "gamma.chisq.c2": _c(1.0, "pre / (p+2) (c1 ||h^(k-1)|| + c2 ||h^(k-2)||)"),
    # products x f^(k)
    "xf.centered": _c(2.0, "||x f''|| <= c ||h - Gamma h||"),
    "xf.plain": _c(4.0, "||x f''|| <= c ||h||"),
    "xf.shift": _c(4.0, "||x f^(k+2)|| <= c ||h^(k)||"),
    "xf.lam.pre": _c(4.0, "||x f^(k+1)|| <= pre / lam (a + sqrt(r+k)) ||h^(k)||"),
    "xf.lam.a": _c(2.0, "||x f^(k+1)|| <= pre / lam (a + sqrt(r+k)) ||h^(k)||"),
    # squared CLT statistic
    "clt.pre": _c(4.0, "pre d E X^8 / ((d+2) n)"),
    "clt.alpha0.base": _c(2.0, "alpha_0 = base + skew |E X^3|"),
    "clt.alpha0.skew": _c(69.0, "alpha_0 = base + skew |E X^3|"),
    "clt.alpha1.base": _c(38.0, "alpha_1"),
    "clt.alpha1.skew": _c(654.0, "alpha_1"),
    "clt.alpha2.base": _c(203.0, "alpha_2"),
    "clt.alpha2.skew": _c(1781.0, "alpha_2"),
    "clt.alpha3.base": _c(321.0, "alpha_3"),
    "clt.alpha3.skew": _c(1320.0, "alpha_3"),
    # Pearson, order 1/n
    "pearson.n1.pre": _c(4.0, "pre / ((m+1) n) (sum p^-1/2)^2"),
    "pearson.n1.h0": _c(19.0, "coefficient of ||h||"),
    "pearson.n1.h1": _c(366.0, "coefficient of ||h'||"),
    "pearson.n1.h2": _c(2016.0, "coefficient of ||h''||"),
    "pearson.n1.h3": _c(5264.0, "coefficient of ||h'''||"),
    "pearson.n1.h4": _c(106965.0, "coefficient of ||h^(4)||"),
    "pearson.n1.h5": _c(302922.0, "coefficient of ||h^(5)||"),
    # Pearson, order 1/sqrt(n)
    "pearson.sqrt.pre": _c(12.0, "pre / ((m+1) sqrt(n)) sum p^-1/2"),
    "pearson.sqrt.h0": _c(6.0, "coefficient of ||h||"),
    "pearson.sqrt.h1": _c(46.0, "coefficient of ||h'||"),
    "pearson.sqrt.h2": _c(84.0, "coefficient of ||h''||"),
    # Kolmogorov distance for Pearson, N = n p_*
    "kol.m2.a": _c(8.0, "N^-1/10 (a + b N^-1/5 + c N^-2/5)"),
    "kol.m2.b": _c(21.0, "N^-1/10 (a + b N^-1/5 + c N^-2/5)"),
    "kol.m2.c": _c(72.0, "N^-1/10 (a + b N^-1/5 + c N^-2/5)"),
    "kol.m3.a": _c(19.0, "N^-1/6 (a + b N^-1/6 + c N^-1/3)"),
    "kol.m3.b": _c(44.0, "N^-1/6 (a + b N^-1/6 + c N^-1/3)"),
    "kol.m3.c": _c(72.0, "N^-1/6 (a + b N^-1/6 + c N^-1/3)"),
    "kol.m4.a": _c(13.0, "(m-3)^-1/3 N^-1/6 (a + b (m-3)^1/6 N^-1/6 + c (m-3)^1/3 N^-1/3)"),
    "kol.m4.b": _c(37.0, "(m-3)^-1/3 N^-1/6 (a + b (m-3)^1/6 N^-1/6 + c (m-3)^1/3 N^-1/3)"),
    "kol.m4.c": _c(72.0, "(m-3)^-1/3 N^-1/6 (a + b (m-3)^1/6 N^-1/6 + c (m-3)^1/3 N^-1/3)"),
    "kol.alpha.m2": _c(52.75, "alpha = c N^-1/5"),
    "kol.alpha.m3": _c(25.27, "alpha = c N^-1/6"),
    "kol.alpha.m4": _c(30.58, "alpha = c (m-3)^1/6 N^-1/6"),
    "kol.density.m2": _c(2.0, "P(z <= Y_1 <= z+alpha) <= sqrt(c alpha / pi)"),
    "kol.density.m3": _c(0.5, "P(z <= Y_2 <= z+alpha) <= c alpha"),
    "kol.density.m4": _c(2.0, "P(z <= Y_d <= z+alpha) <= alpha / (c sqrt(pi (m-3)))"),
    "halpha.norm0": _c(1.0, "||h_alpha||"),
    "halpha.norm1": _c(2.0, "||h_alpha'|| = c / alpha"),
    "halpha.norm2": _c(4.0, "||h_alpha''|| = c / alpha^2"),
    # literature comparison bounds
    "lit.gotze": _c(250.0, "c m / (p_*^3/2 sqrt(n))"),
    "lit.bentkus": _c(400.0, "c m^1/4 / (p_*^3/2 sqrt(n))"),
    # normal Stein solution psi for the odd test function g'''
    "psi.0.f2": _c(3.0, "|psi| <= a ||f''|| + b (x^2 + c) ||f'''||"),
    "psi.0.f3": _c(2.0, "|psi| <= a ||f''|| + b (x^2 + c) ||f'''||"),
    "psi.0.shift": _c(2.0, "|psi| <= a ||f''|| + b (x^2 + c) ||f'''||"),
    "psi.1.f2": _c(6.0, "|x psi'| <= a x^2 ||f''|| + b x^2 (x^2 + 1) ||f'''||"),
    "psi.1.f3": _c(4.0, "|x psi'| <= a x^2 ||f''|| + b x^2 (x^2 + 1) ||f'''||"),
    "psi.2.f2": _c(6.0, "|psi''| <= a (2x^2+1) ||f''|| + b (2x^4+3x^2+8) ||f'''|| + c x^4 ||f''''||"),
    "psi.2.f3": _c(2.0, "|psi''| <= a (2x^2+1) ||f''|| + b (2x^4+3x^2+8) ||f'''|| + c x^4 ||f''''||"),
    "psi.2.f4": _c(4.0, "|psi''| <= a (2x^2+1) ||f''|| + b (2x^4+3x^2+8) ||f'''|| + c x^4 ||f''''||"),
    # third partials of the MVN Stein solutions psi_1, psi_2
    "mvn.h1.f3": _c(0.5, "||f'''|| coefficient"),
    "mvn.h1.f4": _c(0.8, "c ||f''''|| [8 + 3 sum s^2]"),
    "mvn.h1.f4.const": _c(8.0, "c ||f''''|| [8 + 3 sum s^2]"),
    "mvn.h1.f4.s2": _c(3.0, "c ||f''''|| [8 + 3 sum s^2]"),
    "mvn.h1.f5": _c(16 / 35, "c ||f^(5)|| [32 + 5 sum s^4]"),
    "mvn.h1.f5.const": _c(32.0, "c ||f^(5)|| [32 + 5 sum s^4]"),
    "mvn.h1.f5.s4": _c(5.0, "c ||f^(5)|| [32 + 5 sum s^4]"),
    "mvn.h2.f3": _c(0.5, "||f'''|| coefficient"),
    "mvn.h2.f4": _c(12 / 5, "c ||f''''|| [4 + s_a^2 + s_b^2 + s_c^2 + 3 s_j^2]"),
    "mvn.h2.f4.const": _c(4.0, "c ||f''''|| [4 + ...]"),
    "mvn.h2.f4.j": _c(3.0, "weight of s_j^2"),
    "mvn.h2.f5": _c(8 / 35, "c ||f^(5)|| [384 + 5 (7 s_a^4 + 7 s_b^4 + 7 s_c^4 + 27 s_j^4)]"),
    "mvn.h2.f5.const": _c(384.0, "c ||f^(5)|| [384 + ...]"),
    "mvn.h2.f5.s4": _c(5.0, "outer factor on the quartic sum"),
    "mvn.h2.f5.abc": _c(7.0, "weight of s_a^4, s_b^4, s_c^4"),
    "mvn.h2.f5.j": _c(27.0, "weight of s_j^4"),
    "mvn.h2.f6.const": _c(4096 / 21, "||f^(6)|| [4096/21 + 128/27 (...)]"),
    "mvn.h2.f6.s6": _c(128 / 27, "||f^(6)|| [4096/21 + 128/27 (...)]"),
    "mvn.h2.f6.j": _c(3.0, "weight of s_j^6"),
    # leave-one-out moments and indicator products (np_j >= 1)
    "loo.m2.cap": _c(1.0, "E (S^(i))^2 < c"),
    "loo.m4.cap": _c(4.0, "E (S^(i))^4 < c"),
    "loo.m6.cap": _c(42.0, "E (S^(i))^6 < c"),
    "xi.pow1": _c(2.0, "E|I_j xi_k| < c p_j"),
    "xi.pow2": _c(4.0, "E I_j xi_k^2 < c p_j"),
    "xi.pow3": _c(14.0, "E|I_j xi_k^3| < c p_j"),
    "xi.pow4": _c(27.0, "E I_j xi_k^4 < c p_j"),
    "xi.pow6": _c(305.0, "E I_j xi_k^6 < c p_j"),
}


def const(name: str) -> float:
    return CONSTANTS[name].value


# -- input bundles -------------------------------------------------------------------------

@dataclass(frozen=True)
class NormBundle:
    """Sup-norms ``||h^(k)||``; ``centered`` optionally holds ``||h - Gamma h||``."""

    norm: Mapping[int, float]
    centered: Optional[float] = None

    def __post_init__(self):
        for k, v in self.norm.items():
            if not v >= 0:
                raise ValueError(f"norm of order {k} must be nonnegative, got {v}")

    def __getitem__(self, k: int) -> float:
        try:
            return float(self.norm[k])
        except KeyError:
            raise KeyError(f"missing norm entry ||h^({k})||") from None

    def __contains__(self, k: int) -> bool:
        return k in self.norm

    def require(self, orders: Iterable[int]) -> None:
        missing = [k for k in orders if k not in self.norm]
        if missing:
            raise KeyError("missing norm entries " + ", ".join(f"||h^({k})||" for k in missing))

    @classmethod
    def of(cls, h, centered: Optional[float] = None) -> "NormBundle":
        """Certified norms of a :class:`TestFunction` (or any ``k -> value`` mapping)."""
        if isinstance(h, Mapping):
            return cls(dict(h), centered)
        return cls(h.norms(), centered)

    @classmethod
    def unit(cls, max_order: int) -> "NormBundle":
        return cls({k: 1.0 for k in range(max_order + 1)})


@dataclass(frozen=True)
class MomentBundle:
    """Moments of a standardized summand ``X`` (mean 0, variance 1)."""

    abs3: float
    m4: float
    m6: float
    m8: float
    skew_abs: float

    def __post_init__(self):
        tol = 1e-12
        if not (1 - tol <= self.m4 <= self.m8 * (1 + tol)):
            raise ValueError(f"moments violate 1 <= E X^4 <= E X^8: m4={self.m4}, m8={self.m8}")
        if self.abs3 < 1 - tol:
            raise ValueError(f"E|X|^3 = {self.abs3} < 1 is impossible for a standardized X")
        if self.skew_abs < 0 or self.skew_abs > self.abs3 * (1 + tol):
            raise ValueError("|E X^3| must lie in [0, E|X|^3]")


@dataclass
class BoundReport:
    theorem: str
    inputs: dict
    value: float
    hypotheses: Dict[str, bool] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"bound value must be nonnegative, got {self.value}")

    @property
    def hypotheses_satisfied(self) -> bool:
        return all(self.hypotheses.values())

    @property
    def unsatisfied(self) -> list:
        return [k for k, ok in self.hypotheses.items() if not ok]

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "inputs": self.inputs,
            "value": self.value,
            "hypotheses": self.hypotheses,
            "hypotheses_satisfied": self.hypotheses_satisfied,
            **({"extra": self.extra} if self.extra else {}),
        }


# -- squared CLT -----------------------------------------------------------------------------

def clt_alphas(skew_abs: float) -> Tuple[float, float, float, float]:
    return tuple(const(f"clt.alpha{k}.base") + const(f"clt.alpha{k}.skew") * skew_abs
                 for k in range(4))


def bound_squared_clt(norms: NormBundle, moments: MomentBundle, n: int, d: int = 1) -> BoundReport:
    """Smooth-function bound for ``W_d = (1/n) sum_j (sum_i X_ij)^2`` against chi^2_(d)."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    norms.require(range(4))
    alphas = clt_alphas(moments.skew_abs)
    prefactor = const("clt.pre") * d * moments.m8 / ((d + 2) * n)
    value = prefactor * sum(a * norms[k] for k, a in enumerate(alphas))
    return BoundReport(
        theorem="squared-clt",
        inputs={"n": n, "d": d, "norms": [norms[k] for k in range(4)],
                "moments": moments.__dict__.copy()},
        value=value,
        hypotheses={"finite_eighth_moment": math.isfinite(moments.m8), "h_in_Cb3": True},
        extra={"alphas": list(alphas), "prefactor": prefactor},
    )


# -- Pearson -----------------------------------------------------------------------------------

PEARSON_VARIANTS = ("n1", "sqrt", "n1-pstar", "sqrt-pstar")


def _model_np(model) -> Tuple[int, np.ndarray]:
    n = int(model.n)
    p = np.asarray(model.p, dtype=float)
    return n, p


def pearson_norm_sum(norms: NormBundle, variant: str) -> float:
    if variant.startswith("n1"):
        norms.require(range(6))
        return sum(const(f"pearson.n1.h{k}") * norms[k] for k in range(6))
    norms.require(range(3))
    return sum(const(f"pearson.sqrt.h{k}") * norms[k] for k in range(3))


def bound_pearson_smooth(norms: NormBundle, model, variant: str = "sqrt") -> BoundReport:
    """Smooth-function bounds for Pearson's statistic against chi^2_(m-1).

    ``n1`` and ``sqrt`` are the order 1/n and 1/sqrt(n) bounds in terms of
    ``sum_j p_j^{-1/2}``; the ``-pstar`` variants replace that sum by
    ``m / sqrt(p_*)``.  A violated ``np_j >= 1`` is reported, not raised.
    """
    if variant not in PEARSON_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {PEARSON_VARIANTS}")
    n, p = _model_np(model)
    m = len(p)
    pstar = float(p.min())
    inv_sqrt_sum = float(np.sum(1.0 / np.sqrt(p)))
    total = pearson_norm_sum(norms, variant)
    if variant == "n1":
        value = const("pearson.n1.pre") / ((m + 1) * n) * inv_sqrt_sum**2 * total
    elif variant == "sqrt":
        value = const("pearson.sqrt.pre") / ((m + 1) * math.sqrt(n)) * inv_sqrt_sum * total
    elif variant == "n1-pstar":
        value = const("pearson.n1.pre") * m / (n * pstar) * total
    else:
        value = const("pearson.sqrt.pre") / math.sqrt(n * pstar) * total
    hyps = {"np_j>=1": bool(n * pstar >= 1)}
    if variant.startswith("n1"):
        hyps["n>=2"] = n >= 2
    return BoundReport(
        theorem=f"pearson-{variant}",
        inputs={"n": n, "p": p.tolist(), "norms": {int(k): float(v) for k, v in norms.norm.items()}},
        value=float(value),
        hypotheses=hyps,
        extra={"sum_inv_sqrt_p": inv_sqrt_sum, "n_pstar": n * pstar},
    )


def bound_kolmogorov_pearson(n: int, p: Sequence[float]) -> BoundReport:
    """Kolmogorov distance between Pearson's statistic and chi^2_(m-1), three cases in m."""
    p = np.asarray(p, dtype=float)
    m = len(p)
    N = n * float(p.min())
    if m < 2:
        raise ValueError("need at least two cells")
    if m == 2:
        value = N ** -0.1 * (const("kol.m2.a") + const("kol.m2.b") * N ** -0.2
                             + const("kol.m2.c") * N ** -0.4)
    elif m == 3:
        value = N ** (-1 / 6) * (const("kol.m3.a") + const("kol.m3.b") * N ** (-1 / 6)
                                 + const("kol.m3.c") * N ** (-1 / 3))
    else:
        q = m - 3
        value = q ** (-1 / 3) * N ** (-1 / 6) * (
            const("kol.m4.a") + const("kol.m4.b") * q ** (1 / 6) * N ** (-1 / 6)
            + const("kol.m4.c") * q ** (1 / 3) * N ** (-1 / 3))
    return BoundReport(
        theorem="kolmogorov-pearson",
        inputs={"n": int(n), "p": p.tolist()},
        value=float(value),
        hypotheses={"np_*>=1": bool(N >= 1)},
        extra={"n_pstar": N, "m": m},
    )


def bound_literature(n: int, p: Sequence[float], m: Optional[int] = None) -> Tuple[float, float]:
    """Earlier Kolmogorov bounds ``(250 m, 400 m^{1/4}) / (p_*^{3/2} sqrt(n))``."""
    p = np.asarray(p, dtype=float)
    m = len(p) if m is None else m
    scale = float(p.min()) ** -1.5 / math.sqrt(n)
    return const("lit.gotze") * m * scale, const("lit.bentkus") * m**0.25 * scale


# -- smooth -> Kolmogorov ---------------------------------------------------------------------

def halpha_norms(alpha: float) -> NormBundle:
    return NormBundle({0: const("halpha.norm0"), 1: const("halpha.norm1") / alpha,
                       2: const("halpha.norm2") / alpha**2})


def pearson_halpha_bound(n: int, p: Sequence[float]) -> Callable[[float], float]:
    """``alpha -> `` the ``sqrt-pstar`` bound evaluated at the norms of ``h_alpha``."""
    p = np.asarray(p, dtype=float)
    N = n * float(p.min())

    def bound(alpha: float) -> float:
        return const("pearson.sqrt.pre") / math.sqrt(N) * pearson_norm_sum(halpha_norms(alpha), "sqrt")

    return bound


def chi2_window_cap(m: int) -> Callable[[float], float]:
    """Upper bound on ``P(z <= Y_{m-1} <= z + alpha)`` uniformly in ``z``."""
    if m < 2:
        raise ValueError("need at least two cells")
    if m == 2:
        return lambda a: math.sqrt(const("kol.density.m2") * a / math.pi)
    if m == 3:
        return lambda a: const("kol.density.m3") * a
    return lambda a: a / (const("kol.density.m4") * math.sqrt(math.pi * (m - 3)))


def stated_alpha(n: int, p: Sequence[float]) -> float:
    """The smoothing width behind the closed-form Kolmogorov cases (in ``N = n p_*``)."""
    p = np.asarray(p, dtype=float)
    m = len(p)
    N = n * float(p.min())
    if m == 2:
        return const("kol.alpha.m2") * N ** -0.2
    if m == 3:
        return const("kol.alpha.m3") * N ** (-1 / 6)
    return const("kol.alpha.m4") * (m - 3) ** (1 / 6) * N ** (-1 / 6)


def smooth_to_kolmogorov(
    smooth_bound: Callable[[float], float],
    density_cap: Callable[[float], float],
    alpha_grid: Sequence[float],
) -> Tuple[float, float]:
    """Minimize ``smooth_bound(alpha) + density_cap(alpha)`` over ``alpha_grid``."""
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("empty alpha grid")
    best = min(grid, key=lambda a: smooth_bound(a) + density_cap(a))
    return best, smooth_bound(best) + density_cap(best)


def kolmogorov_optimized(n: int, p: Sequence[float], points: int = 2001) -> Tuple[float, float]:
    """Grid-optimized Kolmogorov bound; the stated alpha is always on the grid."""
    a0 = stated_alpha(n, p)
    grid = np.concatenate([a0 * np.geomspace(1e-2, 1e2, points), [a0]])
    return smooth_to_kolmogorov(pearson_halpha_bound(n, p), chi2_window_cap(len(p)), grid)
