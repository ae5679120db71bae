"""Closed-form limit shape of the point-source divisible sandpile on the comb.

The odometer majorant is built tooth by tooth: tooth ``x`` carries a line
sandpile of mass ``n_x``, with ``n_x`` a quadratic in ``x`` whose parameter
``t`` solves ``n = 3/16 t^3 + 5/12 t``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .lattice import GraphKind, Region, pack

K_SHAPE = 1.5 ** (2.0 / 3.0)
L_SHAPE = 0.5 * 1.5 ** (1.0 / 3.0)


def cubic_mass(t: float) -> float:
    return 3.0 / 16.0 * t**3 + 5.0 / 12.0 * t


def solve_t(n: float) -> float:
    """Real root of ``n = 3/16 t^3 + 5/12 t`` by bracketed root finding."""
    if not n > 0:
        raise ValueError(f"mass must be positive, got {n!r}")
    # f is increasing, f(0) < 0 and f(upper) >= 0 for this upper bound
    upper = min((16.0 * n / 3.0) ** (1.0 / 3.0), 12.0 * n / 5.0) * (1.0 + 1e-12) + 1e-300
    return brentq(lambda t: cubic_mass(t) - n, 0.0, upper, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_t_radical(n: float) -> float:
    """Cardano form of the same root; loses digits for small ``n``."""
    if not n > 0:
        raise ValueError(f"mass must be positive, got {n!r}")
    big_t = (8.0 * math.sqrt(3.0) / 243.0 * math.sqrt(2187.0 * n * n + 125.0) + 8.0 / 3.0 * n) ** (1.0 / 3.0)
    return big_t - 20.0 / 27.0 / big_t


@dataclass(frozen=True)
class ShapeSpec:
    n: float
    t: float
    k: float = K_SHAPE
    l: float = L_SHAPE

    @classmethod
    def from_n(cls, n: float) -> ShapeSpec:
        return cls(n=float(n), t=solve_t(n))

    @classmethod
    def from_t(cls, t: float) -> ShapeSpec:
        if not t > 0:
            raise ValueError("t must be positive")
        return cls(n=cubic_mass(t), t=float(t))

    @property
    def radius(self) -> float:
        """``n ** (1/3)``, the scale of the limit shape."""
        return float(np.cbrt(self.n))


def _spec(n_or_spec) -> ShapeSpec:
    return n_or_spec if isinstance(n_or_spec, ShapeSpec) else ShapeSpec.from_n(n_or_spec)


def mass_profile(x, spec: ShapeSpec):
    """Mass ``n_x`` that ends up on tooth ``x`` (symmetric in ``x``).

    Accepts scalars or arrays.
    """
    # 2/3 x^2 - t|x| + (9t^2 + 4)/24 written around its vertex, which avoids
    # cancellation where n_x is small
    d = np.abs(x) - 0.75 * spec.t
    return 2.0 / 3.0 * d * d + 1.0 / 6.0


def gamma_line(n, y):
    """Odometer of the line sandpile started from mass ``n`` at 0."""
    return 0.5 * (np.abs(y) - 0.5 * n) ** 2


def gamma(n, v) -> float:
    """Comb majorant ``gamma_n(x, y)``; ``n`` may be a mass or a :class:`ShapeSpec`."""
    spec = _spec(n)
    x, y = v
    return float(gamma_line(mass_profile(x, spec), y))


def gamma_array(n, xs, ys) -> np.ndarray:
    spec = _spec(n)
    return gamma_line(mass_profile(np.asarray(xs, dtype=float), spec), np.asarray(ys, dtype=float))


def in_ball(n: float, v) -> bool:
    x, y = v
    return bool(abs(x) / K_SHAPE + math.sqrt(abs(y) / L_SHAPE) <= float(np.cbrt(n)))


def _in_ball_arrays(r: float, xs, ys) -> np.ndarray:
    return np.abs(xs) / K_SHAPE + np.sqrt(np.abs(ys) / L_SHAPE) <= r


def ball_region(n: float) -> Region:
    """All comb vertices of the limit shape for mass ``n``."""
    if not n > 0:
        raise ValueError("n must be positive")
    r = float(np.cbrt(n))
    xmax = int(math.floor(K_SHAPE * r)) + 1
    xs = np.arange(-xmax, xmax + 1, dtype=np.int64)
    xs = xs[_in_ball_arrays(r, xs, np.zeros_like(xs))]
    # tooth heights from the closed form, then nudged to agree with the predicate
    h = np.floor(L_SHAPE * (r - np.abs(xs) / K_SHAPE) ** 2).astype(np.int64)
    h = np.maximum(h, 0)
    while True:
        grow = _in_ball_arrays(r, xs, h + 1)
        if not grow.any():
            break
        h = h + grow
    while True:
        shrink = (h > 0) & ~_in_ball_arrays(r, xs, h)
        if not shrink.any():
            break
        h = h - shrink
    counts = 2 * h + 1
    col = np.repeat(xs, counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    ys = offs - np.repeat(h, counts)
    return Region.from_keys(pack(col, ys), GraphKind.COMB2, assume_sorted=True)


def extents(n: float) -> tuple[float, Callable[[int], float]]:
    """Backbone half-width ``3t/4`` and tooth height ``x -> n_x / 2``."""
    spec = _spec(n)
    return 0.75 * spec.t, lambda x: float(mass_profile(x, spec)) / 2.0
