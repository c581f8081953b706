"""Multinomial and i.i.d. models, the two statistics, and exact moment oracles."""
from __future__ import annotations

import math
import warnings
from fractions import Fraction
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats

from .bounds import MomentBundle, const

ENUMERATION_BUDGET = 10**7


class EnumerationBudgetExceeded(RuntimeError):
    pass


# -- models ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class MultinomialModel:
    """``n`` trials over ``m`` cells with probabilities ``p``."""

    n: int
    p: Tuple[float, ...]

    def __init__(self, n: int, p: Sequence[float]):
        p_arr = np.asarray(p, dtype=float)
        if int(n) != n or n < 1:
            raise ValueError(f"n must be a positive integer, got {n}")
        if p_arr.ndim != 1 or p_arr.size < 2:
            raise ValueError("need at least two cells")
        if np.any(~np.isfinite(p_arr)) or np.any(p_arr <= 0):
            raise ValueError("probabilities must be strictly positive")
        if abs(p_arr.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1 (sum is {float(p_arr.sum())!r})")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "p", tuple(float(v) for v in p_arr))

    @property
    def m(self) -> int:
        return len(self.p)

    @property
    def p_array(self) -> np.ndarray:
        return np.asarray(self.p)

    @property
    def pstar(self) -> float:
        return min(self.p)

    @property
    def n_pstar(self) -> float:
        return self.n * self.pstar

    @property
    def cells_ok(self) -> bool:
        """Whether ``n p_j >= 1`` for every cell."""
        return self.n_pstar >= 1

    @property
    def support_size(self) -> int:
        return math.comb(self.n + self.m - 1, self.m - 1)


def parse_p(text: str) -> Tuple[float, ...]:
    """``"uniform:m"`` or a comma-separated list of probabilities."""
    text = text.strip()
    if text.startswith("uniform:"):
        m = int(text.split(":", 1)[1])
        if m < 2:
            raise ValueError("uniform:m needs m >= 2")
        return tuple([1.0 / m] * m)
    return tuple(float(v) for v in text.split(","))


@dataclass(frozen=True)
class Counts:
    U: Tuple[int, ...]

    def __init__(self, U: Sequence[int]):
        arr = np.asarray(U)
        if arr.ndim != 1 or np.any(arr < 0) or np.any(arr != np.round(arr)):
            raise ValueError("counts must be a vector of nonnegative integers")
        object.__setattr__(self, "U", tuple(int(v) for v in arr))

    @property
    def n(self) -> int:
        return sum(self.U)

    def check(self, model: MultinomialModel) -> None:
        if len(self.U) != model.m:
            raise ValueError(f"counts have {len(self.U)} cells but the model has {model.m}")
        if self.n != model.n:
            raise ValueError(f"counts sum to {self.n}, expected n={model.n}")


# -- statistics --------------------------------------------------------------------------------

def standardized_counts(model: MultinomialModel, U) -> np.ndarray:
    """``S_j = (U_j - n p_j) / sqrt(n p_j)``; ``U`` may be a batch of shape ``(..., m)``."""
    U = np.asarray(U.U if isinstance(U, Counts) else U, dtype=float)
    if U.shape[-1] != model.m:
        raise ValueError(f"counts have {U.shape[-1]} cells but the model has {model.m}")
    mu = model.n * model.p_array
    return (U - mu) / np.sqrt(mu)


def pearson_statistic(model: MultinomialModel, U):
    """``sum_j (U_j - n p_j)^2 / (n p_j)`` for one :class:`Counts` or a batch of count rows."""
    if isinstance(U, Counts):
        U.check(model)
    U = np.asarray(U.U if isinstance(U, Counts) else U, dtype=float)
    if U.shape[-1] != model.m:
        raise ValueError(f"counts have {U.shape[-1]} cells but the model has {model.m}")
    mu = model.n * model.p_array
    w = np.sum((U - mu) ** 2 / mu, axis=-1)
    return float(w) if np.ndim(w) == 0 else w


def squared_clt_statistic(X) -> float:
    """``W_d = (1/n) sum_j (sum_i X_ij)^2`` for an ``n x d`` matrix (a vector counts as ``d = 1``)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.size == 0:
        raise ValueError("X must be a non-empty n x d matrix")
    return float(np.sum(X.sum(axis=0) ** 2) / X.shape[0])


def transfer_identity(S, source) -> Tuple[np.ndarray, np.ndarray]:
    """Both sides of ``W f''(W) + (1-W) f'(W)/2 = g''(S) - S g'(S)`` with ``W = S^2``, ``g = f(s^2)/4``."""
    S = np.asarray(S, dtype=float)
    W = S * S
    f1, f2 = source.deriv(1, W), source.deriv(2, W)
    left = W * f2 + 0.5 * (1 - W) * f1
    g1 = 0.5 * S * f1
    g2 = 0.5 * f1 + W * f2
    return left, g2 - S * g1


# -- exact enumeration ---------------------------------------------------------------------------

def _compositions(n: int, m: int) -> np.ndarray:
    if m == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n, -1, -1):
        rest = _compositions(n - first, m - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def multinomial_support(model: MultinomialModel, budget: int = ENUMERATION_BUDGET) -> Tuple[np.ndarray, np.ndarray]:
    """All count vectors and their log-probabilities, as arrays."""
    size = model.support_size
    if size > budget:
        raise EnumerationBudgetExceeded(
            f"{size} outcomes exceed the enumeration budget of {budget}; use Monte Carlo mode instead")
    U = _compositions(model.n, model.m)
    logp = (special.gammaln(model.n + 1) - special.gammaln(U + 1).sum(axis=1)
            + U @ np.log(model.p_array))
    return U, logp


def enumerate_multinomial(model: MultinomialModel, budget: int = ENUMERATION_BUDGET) -> Iterator[Tuple[Counts, float]]:
    """Every outcome once, with its exact log-probability."""
    U, logp = multinomial_support(model, budget)
    for row, lp in zip(U, logp):
        yield Counts(row), float(lp)


def total_probability(logp: np.ndarray) -> float:
    return math.fsum(np.exp(logp))


# -- sampling ------------------------------------------------------------------------------------

def sample_multinomial(model: MultinomialModel, rng: np.random.Generator, size: Optional[int] = None):
    """One :class:`Counts` (``size=None``) or an array of ``size`` count rows."""
    draws = rng.multinomial(model.n, model.p_array, size=size)
    return Counts(draws) if size is None else draws


DISTRIBUTIONS = ("rademacher", "uniform-discrete", "shifted")


def sample_iid_matrix(dist: str, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n x d`` matrix of standardized i.i.d. draws.

    ``rademacher``: +-1; ``uniform-discrete``: uniform on ``sqrt(3/2) {-1, 0, 1}``;
    ``shifted``: ``Exp(1) - 1``.
    """
    if dist == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=(n, d))
    if dist == "uniform-discrete":
        return math.sqrt(1.5) * rng.integers(-1, 2, size=(n, d)).astype(float)
    if dist == "shifted":
        return rng.exponential(1.0, size=(n, d)) - 1.0
    raise ValueError(f"unknown distribution {dist!r}; choose from {DISTRIBUTIONS}")


def distribution_moments(dist: str) -> MomentBundle:
    """Exact moments of the standardized summand."""
    if dist == "rademacher":
        return MomentBundle(abs3=1.0, m4=1.0, m6=1.0, m8=1.0, skew_abs=0.0)
    if dist == "uniform-discrete":
        return MomentBundle(abs3=(2 / 3) * 1.5**1.5, m4=1.5, m6=2.25, m8=3.375, skew_abs=0.0)
    if dist == "shifted":
        # central moments of Exp(1) are the subfactorials
        return MomentBundle(abs3=12 / math.e - 2, m4=9.0, m6=265.0, m8=14833.0, skew_abs=2.0)
    raise ValueError(f"unknown distribution {dist!r}; choose from {DISTRIBUTIONS}")


# -- binomial and leave-one-out moments ----------------------------------------------------------

def binomial_central_moments(n: int, p: float, order: int) -> float:
    """``E (X - np)^order`` for ``X ~ Bin(n, p)``, ``order`` in 1..6, via cumulants."""
    if not 1 <= order <= 6:
        raise ValueError("order must lie in 1..6")
    q = 1 - p
    pq = p * q
    k2 = n * pq
    k3 = n * pq * (q - p)
    k4 = n * pq * (1 - 6 * pq)
    k5 = n * pq * (q - p) * (1 - 12 * pq)
    k6 = n * pq * (1 - 30 * pq + 120 * pq * pq)
    return {
        1: 0.0,
        2: k2,
        3: k3,
        4: k4 + 3 * k2**2,
        5: k5 + 10 * k3 * k2,
        6: k6 + 15 * k4 * k2 + 10 * k3**2 + 15 * k2**3,
    }[order]


class LooMoments(NamedTuple):
    m2: float
    m4: float
    m6: float


def leave_one_out_moments(n: int, p: float, form: str = "corrected") -> LooMoments:
    """Closed-form 2nd, 4th and 6th moments of ``S^(i) = (Y - n p) / sqrt(n p)``, ``Y ~ Bin(n-1, p)``.

    ``form="published"`` evaluates the sixth moment exactly as printed, with
    the ``1/(np)`` and ``1/(np)^2`` polynomials in swapped positions and a
    linear coefficient of -87; ``"corrected"`` is the exact expression.
    """
    if n < 1 or not 0 < p < 1:
        raise ValueError("need n >= 1 and 0 < p < 1")
    # exact rational arithmetic: the terms cancel heavily when n p is small
    p = Fraction(p)
    q = 1 - p
    N = n * p
    m2 = Fraction(n - 1, n) * q + p / n
    m4 = 3 * q**2 * Fraction(n - 1, n) + (n - 1) / (n**2 * p) * q * (1 - 13 * p + 23 * p**2) + p**2 / n**2
    P2 = 5 * q**2 * (5 - 47 * p + 68 * p**2)
    P3 = -(1 - 2 * p) * (1 - 60 * p + 420 * p**2 - 720 * p**3 + 360 * p**4)
    if form == "corrected":
        P1 = q * (1 - 86 * p + 724 * p**2 - 1626 * p**3 + 1044 * p**4)
        m6 = 15 * q**3 + P2 / N + P1 / N**2 + P3 / (N**2 * n)
    elif form == "published":
        P1 = q * (1 - 87 * p + 724 * p**2 - 1626 * p**3 + 1044 * p**4)
        m6 = 15 * q**3 + P1 / N + P2 / N**2 + P3 / (N**2 * n)
    else:
        raise ValueError("form must be 'corrected' or 'published'")
    return LooMoments(float(m2), float(m4), float(m6))


def _loo_support(n: int, p: float):
    y = np.arange(n)
    w = stats.binom.pmf(y, n - 1, p)
    s = (y - n * p) / math.sqrt(n * p)
    return s, w


def oracle_leave_one_out_moments(n: int, p: float) -> LooMoments:
    """The same moments by exact summation over ``Bin(n-1, p)``."""
    s, w = _loo_support(n, p)
    return LooMoments(*(math.fsum(w * s**k) for k in (2, 4, 6)))


def oracle_abs_moments(n: int, p: float) -> Tuple[float, float, float]:
    """``E|S^(i)|``, ``E|S^(i)|^3`` and ``E|S^(i)|^5`` by exact summation."""
    s, w = _loo_support(n, p)
    a = np.abs(s)
    return tuple(math.fsum(w * a**k) for k in (1, 3, 5))


def loo_caps() -> dict:
    """Caps valid when ``n p >= 1``; odd absolute moments follow by Holder."""
    c2, c4, c6 = const("loo.m2.cap"), const("loo.m4.cap"), const("loo.m6.cap")
    return {"m2": c2, "m4": c4, "m6": c6, "abs1": c2**0.5, "abs3": c4**0.75, "abs5": c6 ** (5 / 6)}


def loo_caps_hold(n: int, p: float) -> dict:
    caps = loo_caps()
    mom = oracle_leave_one_out_moments(n, p)
    a1, a3, a5 = oracle_abs_moments(n, p)
    vals = {"m2": mom.m2, "m4": mom.m4, "m6": mom.m6, "abs1": a1, "abs3": a3, "abs5": a5}
    return {k: vals[k] < caps[k] for k in caps}


# -- indicator products ----------------------------------------------------------------------------

XI_POWERS = (1, 2, 3, 4, 6)


def xi_cap(power: int) -> float:
    if power not in XI_POWERS:
        raise ValueError(f"power must be one of {XI_POWERS}")
    return const(f"xi.pow{power}")


class XiEstimate(NamedTuple):
    value: float
    se: float
    cap: float


def _check_xi_args(model, j, k, power):
    if not (0 <= j < model.m and 0 <= k < model.m):
        raise IndexError("cell index out of range")
    if power not in XI_POWERS:
        raise ValueError(f"power must be one of {XI_POWERS}")
    if model.n * model.p[j] < 1 or model.n * model.p[k] < 1:
        warnings.warn("n p_j >= 1 does not hold; the cap is not guaranteed", stacklevel=3)


def indicator_xi_exact(model: MultinomialModel, j: int, k: int, power: int, theta=None) -> float:
    """``E|I_j(1) xi_k^power|`` by summation; ``theta=None`` averages ``theta ~ U(0,1)`` exactly."""
    _check_xi_args(model, j, k, power)
    pj, pk = model.p[j], model.p[k]
    s, w = _loo_support(model.n, pk)
    if j != k:
        return pj * math.fsum(w * np.abs(s) ** power)
    c = 1.0 / math.sqrt(model.n * pk)
    if theta is None:
        # int_0^1 |s + c t|^q dt = [F(s + c) - F(s)] / c with F(u) = sign(u) |u|^(q+1) / (q+1)
        F = lambda u: np.sign(u) * np.abs(u) ** (power + 1) / (power + 1)
        vals = (F(s + c) - F(s)) / c
    else:
        vals = np.abs(s + float(theta) * c) ** power
    return pj * math.fsum(w * vals)


def indicator_xi_check(model: MultinomialModel, j: int, k: int, power: int, theta: str = "uniform",
                       mc_budget: int = 100_000, seed: int = 0) -> XiEstimate:
    """Monte Carlo estimate of ``E|I_j(1) xi_k^power|`` next to its cap ``c p_j``.

    ``xi_k = S_k^(1) + theta I_k(1) / sqrt(n p_k)`` with ``S_k^(1)`` built from
    trials 2..n.  ``theta`` is ``"uniform"`` or a fixed value in [0, 1].
    """
    _check_xi_args(model, j, k, power)
    rng = np.random.default_rng(seed)
    n, p = model.n, model.p_array
    cell = rng.choice(model.m, size=mc_budget, p=p)
    y = rng.binomial(n - 1, p[k], size=mc_budget)
    s = (y - n * p[k]) / math.sqrt(n * p[k])
    th = rng.uniform(0, 1, size=mc_budget) if theta == "uniform" else np.full(mc_budget, float(theta))
    xi = s + th * (cell == k) / math.sqrt(n * p[k])
    vals = (cell == j) * np.abs(xi) ** power
    return XiEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc_budget)),
                      xi_cap(power) * p[j])
