"""Distances between the statistics and their chi-square limits, exact or by Monte Carlo."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal, special, stats

from .gamma_stein import GammaParams, gamma_expectation
from .numerics import chi2_cdf
from .statistics import (
    DISTRIBUTIONS,
    ENUMERATION_BUDGET,
    EnumerationBudgetExceeded,
    MultinomialModel,
    multinomial_support,
    pearson_statistic,
)
from .test_functions import TestFunction

MC_CHUNK = 100_000
# DKW: P(sup|F_N - F| > c / sqrt(N)) <= 2 exp(-2 c^2); c is set so this is one normal sigma
_DKW_C = math.sqrt(math.log(2 / 0.31731050786291415) / 2)


@dataclass(frozen=True)
class SquaredCLTConfig:
    """``W_d = (1/n) sum_j (sum_i X_ij)^2`` with standardized i.i.d. ``X_ij``."""

    n: int
    d: int = 1
    dist: str = "rademacher"

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if self.dist not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.dist!r}; choose from {DISTRIBUTIONS}")

    @property
    def dof(self) -> int:
        return self.d


Config = Union[MultinomialModel, SquaredCLTConfig]


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    mode: str
    se: float
    n: int
    model: dict
    seed: Optional[int] = None
    signed: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("distance must be nonnegative")
        if self.mode not in ("exact", "mc"):
            raise ValueError("mode must be 'exact' or 'mc'")
        if (self.se == 0) != (self.mode == "exact"):
            raise ValueError("se must be zero exactly in exact mode")

    def to_dict(self) -> dict:
        return {"value": self.value, "mode": self.mode, "se": self.se, "n": self.n,
                "model": self.model, "seed": self.seed, "signed": self.signed}


def _echo(cfg: Config) -> dict:
    if isinstance(cfg, MultinomialModel):
        return {"statistic": "pearson", "n": cfg.n, "p": list(cfg.p)}
    return {"statistic": "squared-clt", "n": cfg.n, "d": cfg.d, "dist": cfg.dist}


def dof(cfg: Config) -> int:
    return cfg.m - 1 if isinstance(cfg, MultinomialModel) else cfg.d


def chi_square_mean(h: TestFunction, df: float) -> float:
    return gamma_expectation(h, GammaParams.chi_square(df))


# -- exact laws ------------------------------------------------------------------------------

def _merge_atoms(values: np.ndarray, probs: np.ndarray, rtol: float = 1e-10):
    order = np.argsort(values)
    v, pr = values[order], probs[order]
    new = np.ones(v.size, dtype=bool)
    new[1:] = np.diff(v) > rtol * np.maximum(1.0, np.abs(v[1:]))
    groups = np.cumsum(new) - 1
    atoms = v[new]
    mass = np.zeros(atoms.size)
    np.add.at(mass, groups, pr)
    return atoms, mass


def rademacher_law(n: int, d: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Atoms and masses of ``W_d`` for Rademacher summands.

    Each column sum is ``T = 2B - n`` with ``B ~ Bin(n, 1/2)``; the law of
    ``sum_j T_j^2`` is the ``d``-fold convolution on the integers.
    """
    b = np.arange(n + 1)
    pmf = np.exp(special.gammaln(n + 1) - special.gammaln(b + 1) - special.gammaln(n - b + 1)
                 - n * math.log(2.0))
    sq = (2 * b - n) ** 2
    single = np.zeros(n * n + 1)
    np.add.at(single, sq, pmf)
    law = single
    for _ in range(d - 1):
        law = np.clip(signal.fftconvolve(law, single), 0.0, None)
    # FFT round-off leaves tiny noise on impossible atoms
    support = np.flatnonzero(law > 1e-15 * law.max()) if d > 1 else np.flatnonzero(law > 0)
    return support / n, law[support]


def exact_law(cfg: Config, budget: int = ENUMERATION_BUDGET) -> Tuple[np.ndarray, np.ndarray]:
    """Atoms of the statistic (merged when numerically equal) and their probabilities."""
    if isinstance(cfg, MultinomialModel):
        U, logp = multinomial_support(cfg, budget)
        return _merge_atoms(pearson_statistic(cfg, U), np.exp(logp))
    if cfg.dist != "rademacher":
        raise EnumerationBudgetExceeded(f"no exact law for {cfg.dist!r} summands; use Monte Carlo mode")
    size = cfg.d * cfg.n**2 + 1
    if size > budget:
        raise EnumerationBudgetExceeded(
            f"{size} atoms exceed the enumeration budget of {budget}; use Monte Carlo mode instead")
    return rademacher_law(cfg.n, cfg.d)


# -- sampling ------------------------------------------------------------------------------------

def sample_statistic(cfg: Config, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent draws of the statistic."""
    if isinstance(cfg, MultinomialModel):
        return pearson_statistic(cfg, rng.multinomial(cfg.n, cfg.p_array, size=size))
    n, d = cfg.n, cfg.d
    if cfg.dist == "rademacher":
        t = 2.0 * rng.binomial(n, 0.5, size=(size, d)) - n
    elif cfg.dist == "uniform-discrete":
        c = rng.multinomial(n, [1 / 3] * 3, size=(size, d))
        t = math.sqrt(1.5) * (c[..., 0] - c[..., 2])
    else:
        t = rng.gamma(n, 1.0, size=(size, d)) - n
    return np.sum(t * t, axis=-1) / n


def _mc_draws(cfg: Config, budget: int, seed: int):
    """Yield chunks of draws; each chunk has its own spawned stream."""
    n_chunks = int(math.ceil(budget / MC_CHUNK))
    for c, ss in enumerate(np.random.SeedSequence(seed).spawn(n_chunks)):
        size = min(MC_CHUNK, budget - c * MC_CHUNK)
        yield sample_statistic(cfg, np.random.default_rng(ss), size)


# -- distances ----------------------------------------------------------------------------------

def smooth_distance(cfg: Config, h: TestFunction, mode: str = "exact", budget: Optional[int] = None,
                    seed: int = 0, reference: Optional[float] = None) -> DistanceEstimate:
    """``|E h(W) - chi^2_(df) h|`` with ``df = m - 1`` (Pearson) or ``d`` (squared CLT)."""
    ref = chi_square_mean(h, dof(cfg)) if reference is None else reference
    if mode == "exact":
        atoms, mass = exact_law(cfg, budget or ENUMERATION_BUDGET)
        mean = math.fsum(mass * h(atoms))
        diff = mean - ref
        return DistanceEstimate(abs(diff), "exact", 0.0, cfg.n, _echo(cfg), None, diff)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    budget = int(budget or 10**6)
    if budget < 2:
        raise ValueError("Monte Carlo needs at least two draws")
    total, total_sq = 0.0, 0.0
    for w in _mc_draws(cfg, budget, seed):
        y = h(w) - ref
        total += math.fsum(y)
        total_sq += math.fsum(y * y)
    mean = total / budget
    var = max(total_sq / budget - mean * mean, 0.0) * budget / (budget - 1)
    se = math.sqrt(var / budget)
    return DistanceEstimate(abs(mean), "mc", max(se, 1e-300), cfg.n, _echo(cfg), seed, mean)


def kolmogorov_from_law(atoms: np.ndarray, mass: np.ndarray, df: float) -> float:
    """``sup_z |P(W <= z) - P(Y_df <= z)|`` for a discrete ``W``, using both one-sided limits."""
    right = np.minimum(np.cumsum(mass), 1.0)
    left = np.concatenate([[0.0], right[:-1]])
    ref = np.array([chi2_cdf(float(a), df) for a in atoms])
    return float(max(np.max(np.abs(right - ref)), np.max(np.abs(left - ref))))


def kolmogorov_distance(cfg: Config, mode: str = "exact", budget: Optional[int] = None,
                        seed: int = 0) -> DistanceEstimate:
    """Kolmogorov distance to chi^2_(df); Monte Carlo mode reports a DKW-based one-sigma width."""
    df = dof(cfg)
    if mode == "exact":
        atoms, mass = exact_law(cfg, budget or ENUMERATION_BUDGET)
        d = kolmogorov_from_law(atoms, mass, df)
        return DistanceEstimate(d, "exact", 0.0, cfg.n, _echo(cfg), None, d)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    budget = int(budget or 10**6)
    w = np.concatenate(list(_mc_draws(cfg, budget, seed)))
    atoms, counts = np.unique(w, return_counts=True)
    d = kolmogorov_from_law(atoms, counts / budget, df)
    return DistanceEstimate(d, "mc", _DKW_C / math.sqrt(budget), cfg.n, _echo(cfg), seed, d)


def wasserstein_mc(cfg: Config, budget: int = 10**5, seed: int = 0) -> float:
    """Monte Carlo Wasserstein-1 distance to chi^2_(df) (exploratory, no guarantee attached)."""
    w = np.concatenate(list(_mc_draws(cfg, budget, seed)))
    ref = stats.chi2.rvs(dof(cfg), size=budget, random_state=np.random.default_rng(seed + 1))
    return float(stats.wasserstein_distance(w, ref))


# -- Rademacher atom and rates ----------------------------------------------------------------------

def rademacher_atom_check(n: int) -> Tuple[float, float, float]:
    """``P(W = 0) = C(n, n/2) 2^-n`` next to ``sqrt(2 / (pi n))`` and their ratio."""
    if n < 2 or n % 2:
        raise ValueError("n must be an even integer >= 2")
    if n > 10**4:
        raise ValueError("n must be at most 10^4")
    exact = math.exp(special.gammaln(n + 1) - 2 * special.gammaln(n / 2 + 1) - n * math.log(2.0))
    approx = math.sqrt(2.0 / (math.pi * n))
    return exact, approx, exact / approx


def rate_slope(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Least-squares slope of ``log distance`` against ``log n`` and its standard error."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    n = np.array([p[0] for p in pts], dtype=float)
    d = np.array([p[1] for p in pts], dtype=float)
    if np.any(d <= 0) or np.any(n <= 0):
        raise ValueError("n and distances must be positive")
    res = stats.linregress(np.log(n), np.log(d))
    return float(res.slope), float(res.stderr)
