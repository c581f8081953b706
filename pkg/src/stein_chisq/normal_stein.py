"""Normal Stein machinery behind the symmetry arguments.

Covers the univariate solution ``psi`` of ``psi' - x psi = g'''``, the
Gaussian constrained to the hyperplane orthogonal to ``sqrt(p)``, the MVN
Stein operator applied to radial functions ``g(s) = f(|s|^2) / 4``, and third
partials of the odd test functions ``s_j f''(w)`` and ``s_j^3 f'''(w)`` with
their Stein solutions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from numpy.polynomial import chebyshev as C

from .bounds import NormBundle, const
from .gamma_stein import BudgetExhausted, DerivativeTable


# -- constrained Gaussian -------------------------------------------------------------------

def validate_p(p, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("p must be a vector with at least two cells")
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("probabilities must be strictly positive")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities must sum to 1 (sum is {float(p.sum())!r})")
    return p


@dataclass(frozen=True)
class ConstrainedGaussian:
    """``MVN(0, I - sqrt(p) sqrt(p)^T)``: the limit of the standardized cell counts."""

    p: np.ndarray
    sigma: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.p.size

    @property
    def sqrt_p(self) -> np.ndarray:
        return np.sqrt(self.p)

    def on_surface(self, s, tol: float = 1e-12) -> np.ndarray:
        s = np.atleast_2d(s)
        return np.abs(s @ self.sqrt_p) <= tol * np.maximum(1.0, np.abs(s).max(axis=-1))

    def project(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        q = self.sqrt_p
        return s - (s @ q)[..., None] * q


def sigma_from_p(p) -> ConstrainedGaussian:
    p = validate_p(p)
    q = np.sqrt(p)
    sigma = np.eye(p.size) - np.outer(q, q)
    return ConstrainedGaussian(p, sigma)


def sample_constrained_gaussian(model: ConstrainedGaussian, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` draws of ``G - (sqrt(p).G) sqrt(p)`` for standard normal ``G``; shape ``(count, m)``."""
    g = rng.standard_normal((int(count), model.m))
    return model.project(g)


def surface_points(model: ConstrainedGaussian, rng: np.random.Generator, count: int,
                   scale: float = 1.0) -> np.ndarray:
    """Random points of the constraint surface ``sum_j sqrt(p_j) s_j = 0``."""
    return scale * sample_constrained_gaussian(model, rng, count)


# -- radial sources f(w) ---------------------------------------------------------------------

class PolynomialSource:
    """``f`` given by polynomial coefficients in ``w`` (lowest degree first)."""

    def __init__(self, coefs: Sequence[float]):
        self.poly = np.polynomial.Polynomial(np.asarray(coefs, dtype=float))
        self.name = f"poly{list(self.poly.coef)}"

    @property
    def max_order(self) -> int:
        return 64

    def deriv(self, k: int, w):
        return self.poly.deriv(k)(np.asarray(w, dtype=float)) if k else self.poly(np.asarray(w, dtype=float))


class TableSource:
    """Derivatives ``f^(1..K)`` of a gamma Stein solution, interpolated in ``w``.

    Each order is represented by Chebyshev series on panels of ``[0, w_max]``;
    points beyond ``w_max`` are evaluated from the table directly.
    """

    def __init__(self, table: DerivativeTable, w_max: float = 300.0, panel: float = 4.0, degree: int = 40):
        self.table = table
        self.name = f"table[{table.h.descriptor}]"
        self.w_max = float(w_max)
        n_panels = max(1, int(math.ceil(w_max / panel)))
        self.edges = np.linspace(0.0, self.w_max, n_panels + 1)
        z = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
        lo, hi = self.edges[:-1, None], self.edges[1:, None]
        nodes = (lo + hi) / 2 + (hi - lo) / 2 * z[None, :]
        vals = table.values(nodes.ravel())
        self.coefs = {}
        for k, v in vals.items():
            v = v.reshape(nodes.shape)
            self.coefs[k] = np.array([C.chebfit(z, row, degree) for row in v])

    @property
    def max_order(self) -> int:
        return self.table.K

    def deriv(self, k: int, w):
        if k == 0:
            raise ValueError("the table does not carry f itself, only its derivatives")
        if k not in self.coefs:
            raise ValueError(f"order {k} not in the table (K={self.table.K})")
        w = np.asarray(w, dtype=float)
        flat = w.ravel()
        out = np.empty_like(flat)
        inside = flat <= self.w_max
        idx = np.clip(np.searchsorted(self.edges, flat[inside], side="right") - 1, 0, len(self.edges) - 2)
        lo, hi = self.edges[idx], self.edges[idx + 1]
        z = (2 * flat[inside] - lo - hi) / (hi - lo)
        coefs = self.coefs[k][idx]
        # Clenshaw, vectorized over points with their own panel coefficients
        b1 = np.zeros_like(z)
        b2 = np.zeros_like(z)
        for c in coefs.T[:0:-1]:
            b1, b2 = c + 2 * z * b1 - b2, b1
        out[inside] = coefs[:, 0] + z * b1 - b2
        if (~inside).any():
            out[~inside] = self.table.deriv(k, flat[~inside])
        return out.reshape(w.shape)


def as_source(f):
    if isinstance(f, DerivativeTable):
        return TableSource(f)
    if isinstance(f, (PolynomialSource, TableSource)) or hasattr(f, "deriv"):
        return f
    raise TypeError("expected a DerivativeTable or a radial source with deriv(k, w)")


# -- partial derivatives of radial functions ------------------------------------------------------

@lru_cache(maxsize=None)
def _pair_partitions(n: int) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
    """Set partitions of ``range(n)`` into blocks of size one or two."""
    if n == 0:
        return ((),)
    out = []
    for rest in _pair_partitions(n - 1):
        out.append(rest + ((n - 1,),))
        for i, blk in enumerate(rest):
            if len(blk) == 1:
                out.append(rest[:i] + ((blk[0], n - 1),) + rest[i + 1:])
    return tuple(out)


def radial_partial(fk: Callable[[int, np.ndarray], np.ndarray], idx: Sequence[int], s) -> np.ndarray:
    """``d^|idx| F(|s|^2) / ds_idx`` given ``fk(k, w) = F^(k)(w)``; ``s`` has shape ``(..., m)``.

    Faa di Bruno with ``dw/ds_a = 2 s_a`` and ``d2w/ds_a ds_b = 2 delta_ab``.
    """
    s = np.asarray(s, dtype=float)
    w = np.sum(s * s, axis=-1)
    idx = tuple(idx)
    total = np.zeros(w.shape)
    cache: Dict[int, np.ndarray] = {}
    for part in _pair_partitions(len(idx)):
        coef = np.ones(w.shape)
        for blk in part:
            if len(blk) == 1:
                coef = coef * 2 * s[..., idx[blk[0]]]
            elif idx[blk[0]] == idx[blk[1]]:
                coef = coef * 2.0
            else:
                coef = None
                break
        if coef is None:
            continue
        k = len(part)
        if k not in cache:
            cache[k] = fk(k, w)
        total = total + coef * cache[k]
    return total


def _monomial_partial(j: int, power: int, idx: Sequence[int], s) -> np.ndarray:
    """``d^|idx| s_j^power / ds_idx``."""
    if any(i != j for i in idx):
        return np.zeros(np.shape(s)[:-1])
    q = len(idx)
    if q > power:
        return np.zeros(np.shape(s)[:-1])
    return math.perm(power, q) * np.asarray(s)[..., j] ** (power - q)


class GDerivatives:
    """Partials of ``g(s) = f(w)/4``, ``h1(s) = s_j f''(w)`` and ``h2(s) = s_j^3 f'''(w)``."""

    def __init__(self, f):
        self.source = as_source(f)

    def _f(self, shift: int, scale: float = 1.0):
        return lambda k, w: scale * self.source.deriv(k + shift, w)

    def g_partial(self, idx: Sequence[int], s) -> np.ndarray:
        if len(idx) > 4:
            raise ValueError("partials of g are provided up to order 4")
        return radial_partial(self._f(0, 0.25), idx, s)

    def gradient(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return 0.5 * s * self.source.deriv(1, np.sum(s * s, axis=-1))[..., None]

    def hessian(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        w = np.sum(s * s, axis=-1)
        f1 = self.source.deriv(1, w)[..., None, None]
        f2 = self.source.deriv(2, w)[..., None, None]
        eye = np.eye(s.shape[-1])
        return 0.5 * f1 * eye + f2 * s[..., :, None] * s[..., None, :]

    def h_partial(self, which: str, j: int, idx: Sequence[int], s) -> np.ndarray:
        """Exact partial of ``h1`` or ``h2`` by the product rule."""
        power, shift = {"h1": (1, 2), "h2": (3, 3)}[which]
        idx = tuple(idx)
        total = 0.0
        for r in range(len(idx) + 1):
            for sub in itertools.combinations(range(len(idx)), r):
                a = [idx[i] for i in sub]
                b = [idx[i] for i in range(len(idx)) if i not in sub]
                mono = _monomial_partial(j, power, a, s)
                if np.all(mono == 0):
                    continue
                total = total + mono * radial_partial(self._f(shift), b, s)
        return np.asarray(total)


def h_third_partials(which: str, f, indices: Tuple[int, int, int], j: int, s,
                     variant: str = "exact") -> np.ndarray:
    """Third partial ``d^3 h / ds_a ds_b ds_c`` of ``h1`` or ``h2``.

    ``variant="display"`` evaluates the published closed forms verbatim; they
    carry single Kronecker deltas where the product rule gives pairs, so they
    agree with ``exact`` only in special cases (e.g. ``a = b = c != j``).
    """
    if which not in ("h1", "h2"):
        raise ValueError("which must be 'h1' or 'h2'")
    s = np.asarray(s, dtype=float)
    m = s.shape[-1]
    a, b, c = indices
    for i in (a, b, c, j):
        if not 0 <= i < m:
            raise IndexError(f"index {i} out of range for dimension {m}")
    gd = f if isinstance(f, GDerivatives) else GDerivatives(f)
    if variant == "exact":
        return gd.h_partial(which, j, (a, b, c), s)
    if variant != "display":
        raise ValueError(f"unknown variant {variant!r}")
    src = gd.source
    w = np.sum(s * s, axis=-1)
    sa, sb, sc, sj = s[..., a], s[..., b], s[..., c], s[..., j]
    da, db, dc = float(j == a), float(j == b), float(j == c)
    if which == "h1":
        return (2 * (da + db + dc) * src.deriv(3, w)
                + 4 * (sj * (sa + sb + sc) + sb * sc * da + sa * sc * db + sa * sb * dc) * src.deriv(4, w)
                + 8 * sj * sa * sb * sc * src.deriv(5, w))
    return (6 * da * db * dc * src.deriv(3, w)
            + 12 * sj * (sa * db * dc + sb * da * dc + sc * da * db) * src.deriv(4, w)
            + 4 * (sj**3 * (sa + sb + sc) + 3 * sj**2 * (sb * sc * da + sa * sc * db + sa * sb * dc))
            * src.deriv(5, w)
            + 8 * sj**3 * sa * sb * sc * src.deriv(6, w))


# -- operators ----------------------------------------------------------------------------------

def mvn_operator_apply(g: GDerivatives, model: ConstrainedGaussian, s) -> np.ndarray:
    """``sum_ab sigma_ab d_ab g(s) - sum_a s_a d_a g(s)``; ``s`` has shape ``(..., m)``."""
    s = np.asarray(s, dtype=float)
    hess = g.hessian(s)
    grad = g.gradient(s)
    return np.einsum("ab,...ab->...", model.sigma, hess) - np.sum(s * grad, axis=-1)


def chi_square_operator(source, m: int, w) -> np.ndarray:
    """``w f''(w) + (m - 1 - w) f'(w) / 2``."""
    w = np.asarray(w, dtype=float)
    return w * source.deriv(2, w) + 0.5 * (m - 1 - w) * source.deriv(1, w)


def operator_comparison(g: GDerivatives, model: ConstrainedGaussian, s, tol: float = 1e-12):
    """Both sides of the operator identity on the constraint surface."""
    s = np.asarray(s, dtype=float)
    if not np.all(model.on_surface(s, tol)):
        raise ValueError("points must satisfy sum_j sqrt(p_j) s_j = 0")
    w = np.sum(s * s, axis=-1)
    return mvn_operator_apply(g, model, s), chi_square_operator(g.source, model.m, w)


# -- univariate psi -----------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _psi_rule(t_max: float = 10.0, panels: int = 40, deg: int = 16):
    z, w = np.polynomial.legendre.leggauss(deg)
    h = t_max / panels
    t = ((np.arange(panels)[:, None] + (z[None, :] + 1) / 2) * h).ravel()
    return t, np.tile(w * h / 2, panels)


def psi_univariate(g3: Callable, x) -> np.ndarray:
    """Solution of ``psi' - x psi = g3`` that stays bounded, for ``g3`` with zero normal mean.

    For ``x > 0``: ``psi(x) = -int_0^inf g3(x+t) exp(-x t - t^2/2) dt``; for
    ``x <= 0`` the mirror form ``int_0^inf g3(x-t) exp(x t - t^2/2) dt``.
    """
    x = np.asarray(x, dtype=float)
    t, w = _psi_rule()
    xf = x.ravel()[:, None]
    sign = np.where(xf > 0, 1.0, -1.0)
    arg = xf + sign * t[None, :]
    kern = np.exp(-np.abs(xf) * t[None, :] - 0.5 * t[None, :] ** 2)
    vals = -sign[:, 0] * np.sum(g3(arg) * kern * w[None, :], axis=1)
    return vals.reshape(x.shape)


def psi_derivative(g3: Callable, g4: Callable, x) -> np.ndarray:
    """``psi'`` by differentiating the integral form (uses ``g4 = g3'``)."""
    x = np.asarray(x, dtype=float)
    t, w = _psi_rule()
    xf = x.ravel()[:, None]
    sign = np.where(xf > 0, 1.0, -1.0)
    arg = xf + sign * t[None, :]
    kern = np.exp(-np.abs(xf) * t[None, :] - 0.5 * t[None, :] ** 2)
    integrand = g4(arg) - sign * t[None, :] * g3(arg)
    vals = -sign[:, 0] * np.sum(integrand * kern * w[None, :], axis=1)
    return vals.reshape(x.shape)


def g_univariate(source, order: int) -> Callable:
    """``d^order/ds^order`` of ``f(s^2)/4`` for ``order`` in 3..5."""
    def g3(s):
        s = np.asarray(s, dtype=float); w = s * s
        return 3 * s * source.deriv(2, w) + 2 * s**3 * source.deriv(3, w)

    def g4(s):
        s = np.asarray(s, dtype=float); w = s * s
        return 3 * source.deriv(2, w) + 12 * w * source.deriv(3, w) + 4 * w * w * source.deriv(4, w)

    def g5(s):
        s = np.asarray(s, dtype=float); w = s * s
        return (30 * s * source.deriv(3, w) + 40 * s**3 * source.deriv(4, w)
                + 8 * s**5 * source.deriv(5, w))

    try:
        return {3: g3, 4: g4, 5: g5}[order]
    except KeyError:
        raise ValueError("order must be 3, 4 or 5") from None


def lemma32_bounds(f2: float, f3: float, f4: float, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Envelopes for ``|psi(x)|``, ``|x psi'(x)|`` and ``|psi''(x)|`` from ``||f''||, ||f'''||, ||f''''||``."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    b0 = const("psi.0.f2") * f2 + const("psi.0.f3") * (x2 + const("psi.0.shift")) * f3
    b1 = const("psi.1.f2") * x2 * f2 + const("psi.1.f3") * x2 * (x2 + 1) * f3
    b2 = (const("psi.2.f2") * (2 * x2 + 1) * f2 + const("psi.2.f3") * (2 * x2 * x2 + 3 * x2 + 8) * f3
          + const("psi.2.f4") * x2 * x2 * f4)
    return b0, b1, b2


# -- third partials of the MVN solutions --------------------------------------------------------

def lemma49_bound(which: str, norms: NormBundle, s, indices: Tuple[int, int, int], j: int) -> float:
    """Envelope for ``|d^3 psi_i / ds_a ds_b ds_c (s)|`` in terms of ``||f^(3..6)||``.

    ``norms[k]`` holds ``||f^(k)||`` (derivatives of the gamma solution, not of h).
    """
    s = np.asarray(s, dtype=float)
    a, b, c = indices
    sa, sb, sc, sj = s[a], s[b], s[c], s[j]
    if which == "h1":
        norms.require((3, 4, 5))
        return float(const("mvn.h1.f3") * norms[3]
                     + const("mvn.h1.f4") * norms[4] * (const("mvn.h1.f4.const")
                                                      + const("mvn.h1.f4.s2") * (sa**2 + sb**2 + sc**2 + sj**2))
                     + const("mvn.h1.f5") * norms[5] * (const("mvn.h1.f5.const")
                                                      + const("mvn.h1.f5.s4") * (sa**4 + sb**4 + sc**4 + sj**4)))
    if which == "h2":
        norms.require((3, 4, 5, 6))
        q4 = const("mvn.h2.f5.abc") * (sa**4 + sb**4 + sc**4) + const("mvn.h2.f5.j") * sj**4
        return float(const("mvn.h2.f3") * norms[3]
                     + const("mvn.h2.f4") * norms[4] * (const("mvn.h2.f4.const") + sa**2 + sb**2 + sc**2
                                                      + const("mvn.h2.f4.j") * sj**2)
                     + const("mvn.h2.f5") * norms[5] * (const("mvn.h2.f5.const") + const("mvn.h2.f5.s4") * q4)
                     + norms[6] * (const("mvn.h2.f6.const") + const("mvn.h2.f6.s6")
                                   * (sa**6 + sb**6 + sc**6 + const("mvn.h2.f6.j") * sj**6)))
    raise ValueError("which must be 'h1' or 'h2'")


@lru_cache(maxsize=None)
def _theta_rule(nodes: int):
    z, w = np.polynomial.legendre.leggauss(nodes)
    theta = (z + 1) * np.pi / 4
    return theta, w * np.pi / 4


def u_quadrature(k: int, nodes: int = 32) -> float:
    """``int_0^inf e^{-3u} (1 - e^{-2u})^k du`` via ``e^{-u} = cos(theta)``."""
    theta, w = _theta_rule(nodes)
    return float(np.sum(w * np.cos(theta) ** 2 * np.sin(theta) ** (2 * k + 1)))


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def __iter__(self):
        return iter((self.value, self.se))


MC_CHUNK = 10_000


def mvn_third_derivative_estimate(which: str, f, indices: Tuple[int, int, int], j: int, s,
                                  model: ConstrainedGaussian, u_nodes: int = 24,
                                  mc_budget: int = 20_000, seed: int = 0) -> Estimate:
    """Monte Carlo estimate of ``d^3 psi_i / ds_a ds_b ds_c (s)`` with its standard error.

    Uses ``-int_0^{pi/2} cos^2 sin E[d^3 h_i(s cos + Z sin)] dtheta`` with one
    constrained Gaussian draw shared across the theta nodes.  Draws come in
    fixed chunks with their own spawned streams, so the result does not depend
    on the order in which chunks are evaluated.
    """
    if mc_budget < 10_000:
        raise BudgetExhausted(f"mc_budget={mc_budget} is below the minimum of 10000 draws")
    gd = f if isinstance(f, GDerivatives) else GDerivatives(f)
    s = np.asarray(s, dtype=float)
    theta, w = _theta_rule(u_nodes)
    weight = w * np.cos(theta) ** 2 * np.sin(theta)
    n_chunks = int(math.ceil(mc_budget / MC_CHUNK))
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    ys = []
    for c, ss in enumerate(streams):
        size = min(MC_CHUNK, mc_budget - c * MC_CHUNK)
        z = sample_constrained_gaussian(model, np.random.default_rng(ss), size)
        pts = s[None, None, :] * np.cos(theta)[None, :, None] + z[:, None, :] * np.sin(theta)[None, :, None]
        d3 = h_third_partials(which, gd, indices, j, pts)
        ys.append(-(d3 * weight[None, :]).sum(axis=1))
    y = np.concatenate(ys)
    return Estimate(float(y.mean()), float(y.std(ddof=1) / math.sqrt(y.size)))
