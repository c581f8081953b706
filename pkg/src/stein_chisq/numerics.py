"""Quadrature, the regularized incomplete gamma function and sup-norm estimation.

Everything here is pure; the other modules build their expectations and
verification grids on top of these three primitives.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature does not reach the requested tolerance."""

    def __init__(self, message: str, best_estimate: float, abs_error: float):
        super().__init__(f"quadrature failed: {message} (best estimate {best_estimate!r}, "
                         f"error estimate {abs_error:.3g})")
        self.best_estimate = best_estimate
        self.abs_error = abs_error


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __post_init__(self):
        if not self.abs_error_estimate >= 0:
            raise ValueError("abs_error_estimate must be nonnegative")
        if self.evaluations < 1:
            raise ValueError("evaluations must be >= 1")

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float = math.inf

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.hi)


HALF_LINE = Interval(0.0, math.inf)


def integrate_semiaxis(
    f: Callable[[float], float],
    domain: Interval = HALF_LINE,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-14,
    singular_power: Optional[float] = None,
    points=None,
    limit: int = 400,
) -> QuadratureResult:
    """Integrate ``f`` over ``domain``.

    An infinite upper limit is mapped onto (0, 1] by QUADPACK's ``x = lo + (1-t)/t``
    substitution and subdivided adaptively.  ``singular_power=a`` integrates
    ``f(x) * (x - lo)**a`` with an algebraic end-point weight; it requires a
    bounded domain.  ``points`` are interior breakpoints (bounded domains only).
    """
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    if singular_power is not None and not domain.bounded:
        raise ValueError("singular_power requires a bounded domain")
    extra = {}
    if singular_power is not None:
        extra = dict(weight="alg", wvar=(singular_power, 0.0))
    elif points is not None and domain.bounded:
        extra = dict(points=points)

    def run(**kw):
        return integrate.quad(f, domain.lo, domain.hi, epsabs=abs_tol, epsrel=rel_tol,
                              limit=limit, **extra, **kw)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = run(full_output=1)
    value, err, info = out[0], out[1], out[2]
    # a fourth entry is QUADPACK's diagnostic, present only when ier > 0;
    # a roundoff stall with a near-target error estimate is accepted as converged
    target = max(abs_tol, rel_tol * abs(value))
    stalled = len(out) > 3 and "roundoff" in str(out[3]) and abs(err) <= 100 * target
    if len(out) > 3 and not stalled:
        raise QuadratureError(str(out[3]).strip().splitlines()[0], float(value), float(abs(err)))
    return QuadratureResult(float(value), float(abs(err)), int(info.get("neval", 1)) or 1)


# -- regularized lower incomplete gamma ------------------------------------------------

_EPS = 1e-16
_TINY = 1e-300


def _gamma_series(r: float, x: float) -> float:
    # P(r, x) = x^r e^{-x} / Gamma(r+1) * sum_k x^k / ((r+1)...(r+k))
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= x / (r + k)
        total += term
        if abs(term) < abs(total) * _EPS or k > 100000:
            break
    log_pref = r * math.log(x) - x - math.lgamma(r + 1.0)
    return math.exp(log_pref + math.log(total))


def _gamma_cont_frac(r: float, x: float) -> float:
    # Q(r, x) by the modified Lentz method
    b = x + 1.0 - r
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - r)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    log_pref = r * math.log(x) - x - math.lgamma(r)
    return math.exp(log_pref + math.log(h))


def reg_lower_gamma(r: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(r, x)``.

    Series for ``x < r + 1`` and a continued fraction for the complement
    otherwise; prefactors are formed in log space so large ``r`` and ``x`` do
    not overflow.
    """
    if not r > 0:
        raise ValueError(f"shape must be positive, got {r}")
    if x < 0 or math.isnan(x):
        raise ValueError(f"x must be nonnegative, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < r + 1.0:
        return min(1.0, _gamma_series(r, x))
    return max(0.0, 1.0 - _gamma_cont_frac(r, x))


def chi2_cdf(z: float, df: float) -> float:
    """Chi-square CDF with ``df`` degrees of freedom, 0 for ``z <= 0``."""
    if z <= 0:
        return 0.0
    return reg_lower_gamma(df / 2.0, z / 2.0)


# -- sup norms ---------------------------------------------------------------------------

def _as_vectorized(f):
    def g(x):
        x = np.asarray(x, dtype=float)
        try:
            y = np.asarray(f(x), dtype=float)
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError):
            pass
        return np.array([float(f(float(t))) for t in x.ravel()]).reshape(x.shape)
    return g


def sup_norm_estimate(
    f: Callable,
    domain: Interval = HALF_LINE,
    grid: int = 2048,
    refine: bool = True,
    n_refine: int = 8,
) -> float:
    """Grid lower estimate of ``sup |f|`` over ``domain``.

    On an infinite domain the grid is placed in ``t = (x - lo) / (1 + x - lo)``.
    With ``refine`` the ``n_refine`` largest local maxima are polished by a
    bounded scalar search inside their neighbouring grid cells, so the
    estimate only increases.
    """
    if grid < 64:
        raise ValueError("grid must be at least 64")
    fv = _as_vectorized(f)
    if domain.bounded:
        xs = np.linspace(domain.lo, domain.hi, grid)
    else:
        t = np.linspace(0.0, 1.0 - 1.0 / grid, grid)
        xs = domain.lo + t / (1.0 - t)
    ys = np.abs(fv(xs))
    bad = ~np.isfinite(ys)
    if bad.any():
        raise ValueError(f"non-finite value of f at x={xs[np.argmax(bad)]!r}")
    best = float(ys.max())
    if not refine:
        return best
    # local maxima of the sampled |f|, largest first
    interior = np.flatnonzero((ys[1:-1] >= ys[:-2]) & (ys[1:-1] >= ys[2:])) + 1
    cand = np.concatenate([interior, [int(np.argmax(ys))]])
    cand = np.unique(cand)
    cand = cand[np.argsort(ys[cand])[::-1]][:n_refine]
    for i in cand:
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, len(xs) - 1)]
        if hi <= lo:
            continue
        res = optimize.minimize_scalar(lambda x: -abs(float(fv(np.array([x]))[0])),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-10 * max(1.0, abs(hi))})
        val = -float(res.fun)
        if not math.isfinite(val):
            raise ValueError(f"non-finite value of f at x={res.x!r}")
        best = max(best, val)
    return best
