"""Green functions of the simple random walk stopped on leaving a finite region."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..fields import LatticeField
from ..lattice import GraphKind, Region
from .dirichlet import DEFAULT_TOL, dirichlet_solve, laplacian_matrix


def _check_member(region: Region, y) -> tuple[int, int]:
    y = (int(y[0]), int(y[1]))
    if y not in region:
        raise ValueError(f"{y} is not in the region")
    return y


def weight_function(region: Region, y, tol: float = DEFAULT_TOL) -> LatticeField:
    """``h_y(z) = G(y, z) / d(z)``: solves ``Δh = -δ_y / d(y)`` with zero boundary values."""
    y = _check_member(region, y)
    idx = int(region.index_of([y[0]], [y[1]])[0])
    rhs = np.zeros(len(region))
    rhs[idx] = -1.0 / region.degrees()[idx]
    return dirichlet_solve(region, rhs, tol)


def stopped_green(region: Region, y, tol: float = DEFAULT_TOL) -> LatticeField:
    """``z -> G(y, z)``, expected visits to ``z`` before the walk from ``y`` leaves ``region``."""
    h = weight_function(region, y, tol)
    return LatticeField(region, h.values * region.degrees())


def green_matrix(region: Region) -> np.ndarray:
    """Dense ``G[i, j] = G(v_i, v_j)`` in region order; meant for small regions only."""
    lap = laplacian_matrix(region).toarray()
    # L h_y = e_y, so the inverse holds h_y(z) = G(y, z) / d(z) in column y
    k = sla.inv(lap)
    return k * region.degrees()[None, :]


def interval_green(b: int, y: int) -> float:
    """``G(y, y)`` for the walk on the integers killed on leaving ``[-b, b]``.

    This is the exact value ``((b+1)^2 - y^2) / (b+1)``; the textbook
    asymptotic form ``(b^2 - y^2) / b`` differs from it by O(1).
    """
    b, y = int(b), int(y)
    if b < 0 or abs(y) > b:
        raise ValueError(f"need |y| <= b, got b={b}, y={y}")
    return ((b + 1) ** 2 - y * y) / (b + 1)


def interval_region(b: int) -> Region:
    xs = np.arange(-b, b + 1, dtype=np.int64)
    return Region.from_arrays(xs, np.zeros_like(xs), GraphKind.LINE)
