"""Gamma / chi-square Stein equation ``x f'' + (r - lam x) f' = h - Gamma h``.

Derivatives of the solution are computed by differentiating the integral
representations of ``f'`` under the integral sign.  With ``H = h - Gamma h``
and ``t = x u``,

    f'(x) =  int_0^1 H(xu) u^(r-1) e^(lam x (1-u)) du        (x <= r/lam)
    f'(x) = -int_1^inf H(xv) v^(r-1) e^(lam x (1-v)) dv      (x >  r/lam)

and the Leibniz rule gives ``f^(k+1)`` as the same integral with
``H(xu)`` replaced by ``sum_j C(k,j) u^j H^(j)(xu) (lam (1-u))^(k-j)``.  Both
forms are finite at their end of the half-line, so no division by ``x`` is
needed.  The recurrence obtained by differentiating the equation is kept as
an independent check (:meth:`DerivativeTable.recurrence_value`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
from scipy import optimize, special

from .bounds import NormBundle, const
from .numerics import Interval, QuadratureError, integrate_semiaxis, sup_norm_estimate
from .test_functions import TestFunction


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class GammaParams:
    """Shape ``r`` and rate ``lam`` of the density ``lam^r x^(r-1) e^(-lam x) / Gamma(r)``."""

    r: float
    lam: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"shape r must be positive, got {self.r}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"rate lambda must be positive, got {self.lam}")

    @classmethod
    def chi_square(cls, p: float) -> "GammaParams":
        return cls(p / 2.0, 0.5)

    @property
    def is_chi_square(self) -> bool:
        return self.lam == 0.5

    @property
    def dof(self) -> float:
        return 2.0 * self.r

    @property
    def split(self) -> float:
        """Point where ``r - lam x`` changes sign."""
        return self.r / self.lam

    @property
    def mean(self) -> float:
        return self.r / self.lam

    @property
    def sd(self) -> float:
        return math.sqrt(self.r) / self.lam

    @property
    def sup_domain(self) -> Interval:
        """Bounded window used for sup-norm estimates."""
        return Interval(0.0, self.split + 40.0 * self.sd)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (self.r * math.log(self.lam) - math.lgamma(self.r)
                    + (self.r - 1.0) * np.log(x) - self.lam * x)


# -- Gamma h ------------------------------------------------------------------------------------

def _expectation_pieces(params: GammaParams, knots: Sequence[float] = ()):
    a = min(1.0, 0.5 * params.mean)
    b = params.mean + 12.0 * params.sd
    edges = [a]
    lo = max(a, params.mean - 12.0 * params.sd)
    if lo > a:
        edges.append(lo)
    x = edges[-1]
    while x < b:
        x = min(x + 50.0 / params.lam, b)
        edges.append(x)
    return a, edges, [k for k in knots if 0 < k]


def gamma_expectation(h, params: GammaParams, rel_tol: float = 1e-12) -> float:
    """``E h(X)`` for ``X ~ Gamma(r, lam)``; pass ``GammaParams.chi_square(p)`` for chi^2_(p).

    ``h`` is a :class:`TestFunction` or a plain callable.  Quadrature failures
    raise :class:`QuadratureError`.
    """
    f = h.deriv if isinstance(h, TestFunction) else None
    h0 = (lambda x: float(f(0, x))) if f else (lambda x: float(h(x)))
    knots = h.knots if isinstance(h, TestFunction) else ()
    r, lam = params.r, params.lam
    a, edges, knots = _expectation_pieces(params, knots)
    logc = r * math.log(lam) - math.lgamma(r)
    parts = []
    # [0, a]: the factor x^(r-1) goes into an algebraic weight when r < 1
    if r < 1:
        res = integrate_semiaxis(lambda x: h0(x) * math.exp(logc - lam * x), Interval(0.0, a),
                                 rel_tol=rel_tol, abs_tol=1e-15, singular_power=r - 1.0)
    else:
        res = integrate_semiaxis(lambda x: h0(x) * math.exp(params.logpdf(x)), Interval(0.0, a),
                                 rel_tol=rel_tol, abs_tol=1e-15,
                                 points=[k for k in knots if k < a] or None)
    parts.append(res.value)
    dens = lambda x: h0(x) * math.exp(params.logpdf(x))
    for lo, hi in zip(edges[:-1], edges[1:]):
        inner = [k for k in knots if lo < k < hi] or None
        parts.append(integrate_semiaxis(dens, Interval(lo, hi), rel_tol=rel_tol,
                                        abs_tol=1e-15, points=inner).value)
    parts.append(integrate_semiaxis(dens, Interval(edges[-1]), rel_tol=rel_tol, abs_tol=1e-15).value)
    return math.fsum(parts)


# -- derivative integrals ---------------------------------------------------------------------

_CHUNK = 64
_DEG = 24
_MAX_PANELS = 4096
_ACCEPT = 1e-9


@lru_cache(maxsize=None)
def _legendre(deg: int):
    z, w = np.polynomial.legendre.leggauss(deg)
    return (z + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def _jacobi(deg: int, power: float):
    # weight (1 + z)^power on [-1, 1], remapped to u^power on [0, 1]
    z, w = special.roots_jacobi(deg, 0.0, power)
    return (z + 1.0) / 2.0, w / 2.0 ** (power + 1.0)


def _panel_rule(panels: int, power: float = 0.0):
    """Nodes and weights on [0, 1] for ``int g(u) u^power du``.

    The first panel absorbs ``u^power`` into a Gauss-Jacobi rule; the other
    panels are Gauss-Legendre with the power folded into the weights.
    """
    h = 1.0 / panels
    zl, wl = _legendre(_DEG)
    if power == 0.0:
        nodes = (np.arange(panels)[:, None] + zl[None, :]) * h
        return nodes.ravel(), np.tile(wl * h, panels)
    zj, wj = _jacobi(_DEG, float(power))
    first_u, first_w = zj * h, wj * h ** (power + 1.0)
    rest = ((np.arange(1, panels)[:, None] + zl[None, :]) * h).ravel()
    rest_w = np.tile(wl * h, panels - 1) * rest**power
    return np.concatenate([first_u, rest]), np.concatenate([first_w, rest_w])


def _segmented_rule(panels: int, power: float, breaks: np.ndarray):
    """Per-column nodes and weights on [0, 1] for ``int g(u) u^power du`` with panel edges at ``breaks``.

    ``breaks`` has shape ``(nb, ncols)``; entries outside (0, 1) are ignored.
    Each column is split at its breaks and every piece gets the composite rule,
    so kinks of ``g`` never fall inside a Gauss panel.
    """
    ncols = breaks.shape[1]
    inner = np.where((breaks > 0) & (breaks < 1), breaks, 1.0)
    edges = np.sort(np.vstack([np.zeros((1, ncols)), inner, np.ones((1, ncols))]), axis=0)
    length = np.diff(edges, axis=0)
    up, wp = _panel_rule(panels, power)
    u0, w0 = _panel_rule(panels)
    nodes = [up[:, None] * length[0][None, :]]
    weights = [wp[:, None] * length[0][None, :] ** (power + 1.0)]
    for i in range(1, length.shape[0]):
        u = edges[i][None, :] + u0[:, None] * length[i][None, :]
        nodes.append(u)
        weights.append(w0[:, None] * length[i][None, :] * u**power)
    return np.vstack(nodes), np.vstack(weights)


def _adaptive(evaluate, tol: float, start: int = 8):
    """Double the panel count until two successive composite rules agree."""
    panels, prev = start, evaluate(start)
    last_err = math.inf
    while panels < _MAX_PANELS:
        panels *= 2
        cur = evaluate(panels)
        err = float(np.max(np.abs(cur - prev)))
        scale = max(1.0, float(np.max(np.abs(cur))))
        if err <= tol * scale:
            return cur
        # differences that stop shrinking have hit the rounding floor
        if err <= _ACCEPT * scale and err > 0.5 * last_err:
            return cur
        prev, last_err = cur, err
    raise QuadratureError(f"no convergence with {panels} panels", float(np.max(np.abs(cur))), err)


def _hderivs(hd, Gh, y, kmax):
    return [hd(j, y) - Gh if j == 0 else hd(j, y) for j in range(kmax + 1)]


def _leibniz_lower(hd, Gh, params, x, orders, tol, knots=()):
    """``f^(k)(x)`` for ``x <= r/lam`` and each ``k`` in ``orders``."""
    r, lam = params.r, params.lam
    x = np.asarray(x, dtype=float)
    kmax = max(orders) - 1
    with np.errstate(divide="ignore"):
        breaks = np.asarray(knots, dtype=float)[:, None] / x[None, :]

    def evaluate(panels):
        if breaks.size:
            U, w = _segmented_rule(panels, r - 1.0, breaks)
        else:
            u, w = _panel_rule(panels, r - 1.0)
            U, w = u[:, None], w[:, None]
        Hj = _hderivs(hd, Gh, x[None, :] * U, kmax)
        weight = w * np.exp(lam * x[None, :] * (1.0 - U))
        a = lam * (1.0 - U)
        out = np.empty((len(orders), x.size))
        for i, k in enumerate(orders):
            kk = k - 1
            s = sum(special.comb(kk, j) * U**j * Hj[j] * a ** (kk - j) for j in range(kk + 1))
            out[i] = np.sum(s * weight, axis=0)
        return out

    return _adaptive(evaluate, tol)


def _upper_cutoff(params, x, c):
    """Per-``x`` cutoff ``T`` in ``t`` beyond which the weight is below ``e^-80``."""
    r, lam = params.r, params.lam
    T = np.full(x.shape, 8.0)
    for _ in range(60):
        expo = (r - 1.0) * np.log1p(c * T) - lam * x * c * T
        done = expo <= -80.0
        if done.all():
            break
        T = np.where(done, T, 2.0 * T)
    return T


def _leibniz_upper(hd, Gh, params, x, orders, tol, knots=()):
    """``f^(k)(x)`` for ``x > r/lam``, with ``v = 1 + c t`` and ``t in [0, T]``."""
    r, lam = params.r, params.lam
    x = np.asarray(x, dtype=float)
    kmax = max(orders) - 1
    c = 1.0 / np.maximum(lam * x - r + 1.0, math.sqrt(max(r - 1.0, 1.0)))
    T = _upper_cutoff(params, x, c)
    breaks = (np.asarray(knots, dtype=float)[:, None] / x[None, :] - 1.0) / (c * T)[None, :]

    def evaluate(panels):
        if breaks.size:
            s_nodes, w = _segmented_rule(panels, 0.0, breaks)
        else:
            s_nodes, w = _panel_rule(panels)
            s_nodes, w = s_nodes[:, None], w[:, None]
        t = s_nodes * T[None, :]
        v = 1.0 + c[None, :] * t
        logv = np.log(v)
        expo = (r - 1.0) * logv - lam * x[None, :] * c[None, :] * t
        Hj = _hderivs(hd, Gh, x[None, :] * v, kmax)
        a = -lam * c[None, :] * t
        weight = w * np.exp(expo) * (c * T)[None, :]
        out = np.empty((len(orders), x.size))
        for i, k in enumerate(orders):
            kk = k - 1
            s = sum(special.comb(kk, j) * v**j * Hj[j] * a ** (kk - j) for j in range(kk + 1))
            out[i] = -np.sum(s * weight, axis=0)
        return out

    return _adaptive(evaluate, tol)


# -- the table ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivativeTable:
    """Derivatives ``f^(1..K)`` of the Stein solution for ``h`` and ``params``."""

    params: GammaParams
    h: TestFunction
    gamma_mean_h: float
    K: int
    tol: float = 1e-12
    f_deriv: Dict[int, object] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        derivs = {k: (lambda x, k=k: self.deriv(k, x)) for k in range(1, self.K + 1)}
        object.__setattr__(self, "f_deriv", derivs)

    @property
    def orders(self) -> range:
        return range(1, self.K + 1)

    @property
    def epsilon(self) -> float:
        return 1e-4 * (self.params.split + 1.0)

    def H(self, j: int, y):
        """``j``-th derivative of ``h - Gamma h``."""
        v = self.h.deriv(j, y)
        return v - self.gamma_mean_h if j == 0 else v

    def _check_orders(self, orders):
        orders = list(orders)
        bad = [k for k in orders if k < 1 or k > self.K]
        if bad:
            raise ValueError(f"orders {bad} outside the table range 1..{self.K}")
        return orders

    def values(self, x, orders: Optional[Iterable[int]] = None, branch: str = "auto") -> Dict[int, np.ndarray]:
        """``{k: f^(k)(x)}``; ``branch`` forces the lower or upper integral form."""
        orders = self._check_orders(self.orders if orders is None else orders)
        if branch not in ("auto", "lower", "upper"):
            raise ValueError(f"unknown branch {branch!r}")
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if np.any(flat < 0) or not np.all(np.isfinite(flat)):
            raise ValueError("x must be finite and nonnegative")
        out = np.empty((len(orders), flat.size))
        if branch == "auto":
            lower = flat <= self.params.split
        else:
            lower = np.full(flat.shape, branch == "lower")
        if branch == "upper" and np.any(flat == 0):
            raise ValueError("the upper form is not defined at x = 0")
        hd = self.h.deriv
        for mask, fn in ((lower, _leibniz_lower), (~lower, _leibniz_upper)):
            idx = np.flatnonzero(mask)
            idx = idx[np.argsort(flat[idx])]
            for s in range(0, idx.size, _CHUNK):
                sel = idx[s:s + _CHUNK]
                out[:, sel] = fn(hd, self.gamma_mean_h, self.params, flat[sel], orders, self.tol,
                                 self.h.knots)
        return {k: out[i].reshape(x.shape) for i, k in enumerate(orders)}

    def deriv(self, k: int, x, branch: str = "auto"):
        val = self.values(x, [k], branch)[k]
        return float(val) if np.ndim(val) == 0 else val

    def at_zero(self) -> Dict[int, float]:
        """``f^(k)(0)`` from ``f^(k)(0) = [h^(k-1)(0) + (k-1) lam f^(k-1)(0)] / (r+k-1)``."""
        r, lam = self.params.r, self.params.lam
        vals: Dict[int, float] = {}
        prev = 0.0
        for k in range(1, self.h.max_order + 2):
            prev = (float(self.H(k - 1, 0.0)) + (k - 1) * lam * prev) / (r + k - 1)
            vals[k] = prev
        return vals

    def recurrence_value(self, k: int, x: float) -> float:
        """``f^(k)(x)`` from the two lower orders via the differentiated Stein equation.

        For ``x < epsilon`` the zero limit plus a first-order continuation is used.
        """
        if k < 2 or k > self.K:
            raise ValueError(f"recurrence needs 2 <= k <= {self.K}")
        r, lam = self.params.r, self.params.lam
        x = float(x)
        if x < self.epsilon:
            z = self.at_zero()
            return z[k] + (x * z[k + 1] if k + 1 in z else 0.0)
        j = k - 2
        lower = self.values(np.array([x]), [k - 1] + ([j] if j >= 1 else []))
        fk1 = float(lower[k - 1][0])
        fj = float(lower[j][0]) if j >= 1 else 0.0
        return (float(self.H(j, x)) + j * lam * fj - (r + j - lam * x) * fk1) / x

    def sup_norm(self, k: int, grid: int = 512, weighted: bool = False, n_refine: int = 4) -> float:
        """Grid estimate of ``sup |f^(k)|`` (or ``sup |x f^(k)(x)|``) on ``params.sup_domain``."""
        self._check_orders([k])
        if weighted:
            fn = lambda x: np.asarray(x) * self.deriv(k, np.asarray(x))
        else:
            fn = lambda x: self.deriv(k, np.asarray(x))
        return sup_norm_estimate(fn, self.params.sup_domain, grid=grid, n_refine=n_refine)

    def sup_norms(self, orders=None, grid: int = 512) -> Dict[str, Dict[int, float]]:
        """Sup norms of ``f^(k)`` and ``x f^(k)`` for several orders from one grid pass."""
        orders = self._check_orders(self.orders if orders is None else orders)
        dom = self.params.sup_domain
        xs = np.linspace(dom.lo, dom.hi, grid)
        vals = self.values(xs, orders)
        plain, weighted = {}, {}
        for k in orders:
            plain[k] = _polish(lambda x, k=k: self.deriv(k, x), xs, np.abs(vals[k]))
            weighted[k] = _polish(lambda x, k=k: x * self.deriv(k, x), xs, np.abs(xs * vals[k]))
        return {"f": plain, "xf": weighted}

    def norm_bundle(self) -> NormBundle:
        """Certified norms of ``h`` plus an estimate of ``||h - Gamma h||``."""
        cen = sup_norm_estimate(lambda y: self.H(0, np.asarray(y)), Interval(0.0),
                                grid=4096)
        cen = max(cen, abs(float(self.H(0, 0.0))))
        norms = {k: v for k, v in self.h.norms().items() if v is not None}
        return NormBundle(norms, centered=cen)


def _polish(fn, xs, ys, n_refine: int = 3) -> float:
    best = float(ys.max())
    order = np.argsort(ys)[::-1][:n_refine]
    for i in order:
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        res = optimize.minimize_scalar(lambda t: -abs(float(fn(np.array([t]))[0])),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-9 * max(1.0, hi)})
        best = max(best, -float(res.fun))
    return best


def derivative_table(h: TestFunction, params: GammaParams, K: int = 4,
                     gamma_mean_h: Optional[float] = None, tol: float = 1e-12) -> DerivativeTable:
    """Build the table of ``f^(1..K)``; needs ``K <= h.max_order + 1``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > h.max_order + 1:
        raise ValueError(f"K={K} needs h^({K - 1}) but {h.name} only has derivatives up to "
                         f"order {h.max_order}")
    if gamma_mean_h is None:
        gamma_mean_h = gamma_expectation(h, params)
    return DerivativeTable(params, h, float(gamma_mean_h), int(K), tol)


def solve_first_derivative(h: TestFunction, params: GammaParams, x, gamma_mean_h: Optional[float] = None):
    """``f'(x)``; at ``x = 0`` this is ``(h(0) - Gamma h) / r``."""
    return derivative_table(h, params, 1, gamma_mean_h).deriv(1, x)


def stein_residual(table: DerivativeTable, x) -> np.ndarray:
    """``x f'' + (r - lam x) f' - (h - Gamma h)`` with both derivatives from their own integrals."""
    if table.K < 2:
        raise ValueError("residual needs f'' in the table")
    x = np.asarray(x, dtype=float)
    v = table.values(x, [1, 2])
    p = table.params
    return x * v[2] + (p.r - p.lam * x) * v[1] - table.H(0, x)


def recurrence_residual(table: DerivativeTable, k: int, x) -> np.ndarray:
    """``x f^(k+2) + (r+k-lam x) f^(k+1) - k lam f^(k) - h^(k)``, for ``k >= 1``."""
    if not 1 <= k <= table.K - 2:
        raise ValueError(f"need 1 <= k <= K-2 = {table.K - 2}")
    x = np.asarray(x, dtype=float)
    v = table.values(x, [k, k + 1, k + 2])
    p = table.params
    return x * v[k + 2] + (p.r + k - p.lam * x) * v[k + 1] - k * p.lam * v[k] - table.H(k, x)


# -- bound catalog ------------------------------------------------------------------------------

def bound_catalog(params: GammaParams, k: int, norms: NormBundle,
                  names: Optional[Sequence[str]] = None) -> Dict[str, float]:
    """Upper bounds on ``||f^(k)||`` and, under ``xf_*`` keys, on ``||x f^(k)(x)||``.

    Without ``names`` every bound applicable to ``k`` and ``params`` is returned
    (``xf_centered`` only when ``norms.centered`` is set).  A norm needed by a
    requested bound but absent from ``norms`` raises ``KeyError``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    r, lam = params.r, params.lam
    s = r + k - 1
    formulas = {
        "luk": lambda: const("gamma.luk") * norms[k] / (k * lam),
        "gaunt_pickett": lambda: (const("gamma.gp.a") / math.sqrt(s) + const("gamma.gp.b") / s) * norms[k - 1],
    }
    if k >= 2:
        formulas["new"] = lambda: const("gamma.new.pre") / s * (
            const("gamma.new.c1") * norms[k - 1] + const("gamma.new.c2") * lam * norms[k - 2])
        if params.is_chi_square:
            formulas["chisq"] = lambda: const("gamma.chisq.pre") / (params.dof + 2) * (
                const("gamma.chisq.c1") * norms[k - 1] + const("gamma.chisq.c2") * norms[k - 2])
        formulas["xf_lambda"] = lambda: const("xf.lam.pre") / lam * (
            const("xf.lam.a") + math.sqrt(s)) * norms[k - 1]
    if k == 2:
        formulas["xf_plain"] = lambda: const("xf.plain") * norms[0]
        if norms.centered is not None or (names and "xf_centered" in names):
            def centered():
                if norms.centered is None:
                    raise KeyError("missing norm entry ||h - Gamma h||")
                return const("xf.centered") * norms.centered
            formulas["xf_centered"] = centered
    if k >= 3:
        formulas["xf_shift"] = lambda: const("xf.shift") * norms[k - 2]
    if names is None:
        names = list(formulas)
    unknown = [n for n in names if n not in formulas]
    if unknown:
        raise ValueError(f"bounds {unknown} do not apply to k={k} with {params}")
    return {n: float(formulas[n]()) for n in names}


# -- characterization -----------------------------------------------------------------------------

def characterization_residual(f, params: GammaParams, mode: str = "quadrature",
                              budget: int = 512, seed: Optional[int] = None,
                              tol: float = 1e-10, return_se: bool = False):
    """``E[X f''(X) + (r - lam X) f'(X)]`` for ``X ~ Gamma(r, lam)``.

    ``f`` is a :class:`DerivativeTable` (with ``K >= 2``) or a
    ``numpy.polynomial.Polynomial``.  ``quadrature`` doubles a generalized
    Gauss-Laguerre rule until two successive values agree to ``tol`` (relative to
    the absolute integrand mass, at least one) and raises
    :class:`BudgetExhausted` past ``budget`` nodes; ``mc`` averages ``budget``
    gamma draws.
    """
    r, lam = params.r, params.lam
    if isinstance(f, DerivativeTable):
        if f.K < 2:
            raise ValueError("table must contain f''")

        def g(x):
            v = f.values(x, [1, 2])
            return x * v[2] + (r - lam * x) * v[1]
    elif isinstance(f, np.polynomial.Polynomial):
        d1, d2 = f.deriv(1), f.deriv(2)

        def g(x):
            return x * d2(x) + (r - lam * x) * d1(x)
    else:
        raise TypeError("f must be a DerivativeTable or a numpy Polynomial")

    if mode == "mc":
        rng = np.random.default_rng(seed)
        xs = rng.gamma(r, 1.0 / lam, size=int(budget))
        y = g(xs)
        est, se = float(y.mean()), float(y.std(ddof=1) / math.sqrt(len(y)))
        return (est, se) if return_se else est
    if mode != "quadrature":
        raise ValueError(f"unknown mode {mode!r}")
    n, prev = 16, None
    while n <= budget:
        nodes, weights = special.roots_genlaguerre(n, r - 1.0)
        # weights carry x^(r-1) e^(-x); normalize by Gamma(r) in log space
        w = weights * math.exp(-math.lgamma(r))
        gv = g(nodes / lam)
        val = math.fsum(w * gv)
        # tolerance relative to the absolute integrand mass, so cancellation is not penalized
        if prev is not None and abs(val - prev) <= tol * max(1.0, math.fsum(np.abs(w * gv))):
            return (val, abs(val - prev)) if return_se else val
        prev, n = val, 2 * n
    raise BudgetExhausted(f"characterization quadrature not converged within {budget} nodes")
