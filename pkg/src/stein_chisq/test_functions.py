"""Smooth test functions on the half-line with exact derivative sup-norms.

A :class:`TestFunction` carries evaluators for ``h, h', ..., h^(K)`` and the
certified values ``||h^(k)||`` that the bound formulas consume.  Grid
estimates are only ever used to *check* these numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .numerics import HALF_LINE, Interval


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # keep pytest from collecting this class

    name: str
    derivs: Tuple[Callable[[np.ndarray], np.ndarray], ...]
    certified_norms: Tuple[Optional[float], ...]
    params: dict = field(default_factory=dict)
    domain: Interval = HALF_LINE

    def __post_init__(self):
        if len(self.derivs) != len(self.certified_norms):
            raise ValueError("need one certified norm slot per derivative")

    @property
    def max_order(self) -> int:
        return len(self.derivs) - 1

    def __call__(self, x):
        return self.deriv(0, x)

    def deriv(self, k: int, x):
        if not 0 <= k <= self.max_order:
            raise ValueError(f"{self.name}: derivative order {k} outside 0..{self.max_order}")
        return self.derivs[k](np.asarray(x, dtype=float))

    def norm(self, k: int) -> float:
        if k > self.max_order or self.certified_norms[k] is None:
            raise KeyError(f"{self.name}: no certified norm for order {k}")
        return float(self.certified_norms[k])

    def norms(self) -> dict:
        """Map ``k -> ||h^(k)||`` over the certified orders."""
        return {k: float(v) for k, v in enumerate(self.certified_norms) if v is not None}

    @property
    def descriptor(self) -> str:
        return self.params.get("descriptor", self.name)

    @property
    def knots(self) -> Tuple[float, ...]:
        """Points where the top derivative jumps (quadrature breakpoints)."""
        return tuple(self.params.get("knots", ()))


def make_halpha(z: float, alpha: float) -> TestFunction:
    """Smoothed indicator of ``[0, z]``: 1 up to ``z``, 0 beyond ``z + alpha``.

    Two quadratic pieces join at ``z + alpha/2`` so that ``h'`` is Lipschitz.
    ``h''`` exists only almost everywhere; at the knots the left limit is
    returned.
    """
    if not z > 0:
        raise ValueError("z must be positive")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a2 = alpha * alpha
    mid = z + alpha / 2.0
    end = z + alpha

    def h0(x):
        return np.select([x <= z, x <= mid, x <= end],
                         [np.ones_like(x), 1.0 - 2.0 * (x - z) ** 2 / a2, 2.0 * (x - end) ** 2 / a2],
                         default=0.0)

    def h1(x):
        return np.select([x <= z, x <= mid, x <= end],
                         [np.zeros_like(x), -4.0 * (x - z) / a2, 4.0 * (x - end) / a2],
                         default=0.0)

    def h2(x):
        return np.select([x <= z, x <= mid, x <= end],
                         [np.zeros_like(x), np.full_like(x, -4.0 / a2), np.full_like(x, 4.0 / a2)],
                         default=0.0)

    return TestFunction(
        name="halpha",
        derivs=(h0, h1, h2),
        certified_norms=(1.0, 2.0 / alpha, 4.0 / a2),
        params={"z": z, "alpha": alpha, "knots": (z, mid, end),
                "descriptor": f"halpha:{z:g},{alpha:g}"},
    )


def _cosine(omega: float, order: int) -> TestFunction:
    def make(k):
        return lambda x: omega**k * np.cos(omega * x + k * math.pi / 2.0)

    return TestFunction(
        name="cos",
        derivs=tuple(make(k) for k in range(order + 1)),
        certified_norms=tuple(omega**k for k in range(order + 1)),
        params={"omega": omega, "descriptor": f"cos:{omega:g}"},
    )


def _damped_exp(rate: float, order: int) -> TestFunction:
    def make(k):
        return lambda x: (-rate) ** k * np.exp(-rate * x)

    return TestFunction(
        name="exp",
        derivs=tuple(make(k) for k in range(order + 1)),
        certified_norms=tuple(rate**k for k in range(order + 1)),
        params={"rate": rate, "descriptor": "exp" if rate == 1 else f"exp:{rate:g}"},
    )


def _logistic_polys(order: int):
    # d/dx Q(sigma) = Q'(sigma) * sigma * (1 - sigma)
    polys = [np.array([0.0, 1.0])]
    logistic_prime = np.array([0.0, 1.0, -1.0])
    for _ in range(order):
        polys.append(P.polymul(P.polyder(polys[-1]), logistic_prime))
    return polys


def _poly_sup(coefs: np.ndarray, lo: float, hi: float) -> float:
    pts = [lo, hi]
    d = P.polyder(coefs)
    if len(d) and np.any(d != 0):
        for root in P.polyroots(d):
            if abs(root.imag) < 1e-12 and lo <= root.real <= hi:
                pts.append(root.real)
    return float(max(abs(P.polyval(t, coefs)) for t in pts))


def _logistic(scale: float, order: int) -> TestFunction:
    polys = _logistic_polys(order)

    def make(k):
        c = polys[k]
        return lambda x: scale ** (-k) * P.polyval(1.0 / (1.0 + np.exp(-x / scale)), c)

    # on x >= 0 the logistic value sigma ranges over [1/2, 1)
    norms = tuple(scale ** (-k) * _poly_sup(polys[k], 0.5, 1.0) for k in range(order + 1))
    return TestFunction(
        name="logistic",
        derivs=tuple(make(k) for k in range(order + 1)),
        certified_norms=norms,
        params={"scale": scale, "descriptor": f"logistic:{scale:g}"},
    )


BUILTIN_ORDER = 7


def builtin_family(name: str, *params: float, order: int = BUILTIN_ORDER) -> TestFunction:
    """Closed-form bounded test functions with exact ``||h^(k)||``.

    ``cos`` (frequency), ``exp`` (decay rate, default 1) and ``logistic``
    (scale, default 1).
    """
    if name == "cos":
        omega = params[0] if params else 1.0
        if omega <= 0:
            raise ValueError("frequency must be positive")
        return _cosine(float(omega), order)
    if name == "exp":
        rate = params[0] if params else 1.0
        if rate <= 0:
            raise ValueError("rate must be positive")
        return _damped_exp(float(rate), order)
    if name == "logistic":
        scale = params[0] if params else 1.0
        if scale <= 0:
            raise ValueError("scale must be positive")
        return _logistic(float(scale), order)
    raise ValueError(f"unknown test function family {name!r}")


def parse_descriptor(desc: str) -> TestFunction:
    """Parse ``cos:w``, ``exp[:c]``, ``logistic[:s]`` or ``halpha:z,alpha``."""
    name, _, rest = desc.strip().partition(":")
    try:
        args = [float(a) for a in rest.split(",")] if rest else []
    except ValueError:
        raise ValueError(f"bad test-function descriptor {desc!r}") from None
    if name == "halpha":
        if len(args) != 2:
            raise ValueError("halpha descriptor needs z,alpha")
        return make_halpha(*args)
    if len(args) > 1:
        raise ValueError(f"bad test-function descriptor {desc!r}")
    return builtin_family(name, *args)


def constant_function(value: float = 1.0, order: int = BUILTIN_ORDER) -> TestFunction:
    """``h = value`` everywhere; every derivative vanishes."""
    derivs = [lambda x: np.full_like(x, value, dtype=float)]
    derivs += [lambda x: np.zeros_like(x, dtype=float)] * order
    return TestFunction("const", tuple(derivs), (abs(value),) + (0.0,) * order,
                        params={"value": value, "descriptor": f"const:{value:g}"})


def from_callables(name: str, derivs: Sequence[Callable]) -> TestFunction:
    """Wrap user callables without certified norms (distance measurement only)."""
    return TestFunction(name, tuple(derivs), (None,) * len(derivs))
