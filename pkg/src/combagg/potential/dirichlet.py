"""Dirichlet problems for the normalised Laplacian on finite comb and line regions.

Solves ``Δφ = rhs`` on a region with ``φ = 0`` outside it. Multiplying by the
degree turns this into ``L φ = -d·rhs`` with ``L`` the combinatorial Laplacian
restricted to the region, a symmetric M-matrix.

Regions with a column layout (every connected region through the backbone)
are solved in O(|region|): each half tooth is a path with a zero far end,
so it is eliminated in closed form onto its base vertex, which leaves a
tridiagonal system on the backbone. Anything else falls back to a sparse LU
factorisation.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

from ..fields import LatticeField
from ..lattice import GraphKind, Region, degree_array, neighbor_arrays

DEFAULT_TOL = 1e-10


class SolverError(RuntimeError):
    pass


@njit(cache=True)
def _half_tooth(q, u, first, step, h):
    # Path sites i = 1..h at indices first + step*(i-1); 2ψ_i - ψ_{i-1} - ψ_{i+1} = q_i
    # with ψ_0 = ψ_{h+1} = 0. Thomas sweep with c'_i = -i/(i+1) in closed form.
    prev = 0.0
    for i in range(1, h + 1):
        idx = first + step * (i - 1)
        prev = (q[idx] + prev) * i / (i + 1.0)
        u[idx] = prev
    nxt = 0.0
    for i in range(h, 0, -1):
        idx = first + step * (i - 1)
        nxt = u[idx] + i / (i + 1.0) * nxt
        u[idx] = nxt
    return u[first]


@njit(cache=True)
def solve_columns(lo, hi, start, q, backbone_degree):
    """Solve ``L u = q`` on a column-layout region (flat arrays in region order)."""
    ncol = lo.size
    u = np.zeros(q.size)
    diag = np.empty(ncol)
    rhs = np.empty(ncol)
    for j in range(ncol):
        base = start[j] - lo[j]
        d = float(backbone_degree)
        r = q[base]
        h = hi[j]
        if h > 0:
            r += _half_tooth(q, u, base + 1, 1, h)
            d -= h / (h + 1.0)
        h = -lo[j]
        if h > 0:
            r += _half_tooth(q, u, base - 1, -1, h)
            d -= h / (h + 1.0)
        diag[j] = d
        rhs[j] = r
    # backbone: diag[j] a_j - a_{j-1} - a_{j+1} = rhs[j]
    cp = np.empty(ncol)
    dp = np.empty(ncol)
    cp[0] = -1.0 / diag[0]
    dp[0] = rhs[0] / diag[0]
    for j in range(1, ncol):
        den = diag[j] + cp[j - 1]
        cp[j] = -1.0 / den
        dp[j] = (rhs[j] + dp[j - 1]) / den
    a = np.empty(ncol)
    a[ncol - 1] = dp[ncol - 1]
    for j in range(ncol - 2, -1, -1):
        a[j] = dp[j] - cp[j] * a[j + 1]
    for j in range(ncol):
        base = start[j] - lo[j]
        aj = a[j]
        u[base] = aj
        h = hi[j]
        for i in range(1, h + 1):
            u[base + i] += aj * (h + 1.0 - i) / (h + 1.0)
        h = -lo[j]
        for i in range(1, h + 1):
            u[base - i] += aj * (h + 1.0 - i) / (h + 1.0)
    return u


def laplacian_matrix(region: Region) -> sp.csr_matrix:
    """Combinatorial Laplacian restricted to ``region`` (Dirichlet outside)."""
    n = len(region)
    xs, ys = region.xs, region.ys
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [degree_array(ys, region.kind)]
    for nx, ny, valid in neighbor_arrays(xs, ys, region.kind):
        j = region.index_of(nx, ny)
        ok = valid & (j >= 0)
        rows.append(np.nonzero(ok)[0])
        cols.append(j[ok])
        vals.append(-np.ones(int(ok.sum())))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def _backbone_degree(kind: GraphKind) -> int:
    return 2 if kind is GraphKind.LINE else 4


def solve_laplace_system(region: Region, q: np.ndarray) -> np.ndarray:
    """Solve ``L u = q`` on ``region``; picks the column solver when possible."""
    q = np.ascontiguousarray(q, dtype=float)
    if len(region) == 0:
        return np.zeros(0)
    layout = region.columns()
    if layout is not None:
        return solve_columns(layout.lo, layout.hi, layout.start, q, _backbone_degree(region.kind))
    return spla.spsolve(laplacian_matrix(region).tocsc(), q)


def _rhs_values(region: Region, rhs) -> np.ndarray:
    if callable(rhs):
        return np.array([float(rhs(v)) for v in region])
    if isinstance(rhs, Mapping):
        return np.array([float(rhs.get(v, 0.0)) for v in region])
    vals = np.asarray(rhs, dtype=float)
    if vals.ndim == 0:
        return np.full(len(region), float(vals))
    if vals.shape != (len(region),):
        raise ValueError("rhs array must align with the region's vertices")
    return vals


def dirichlet_solve(
    region: Region,
    rhs: Callable | Mapping | np.ndarray | float,
    tol: float = DEFAULT_TOL,
    *,
    refine: int = 2,
) -> LatticeField:
    """Field ``φ`` with ``Δφ = rhs`` on ``region`` and ``φ = 0`` off it.

    ``rhs`` may be a callable on vertices, a mapping, an array aligned with
    the region's sorted vertices, or a scalar. The max-norm residual is
    checked against ``tol * max(1, |φ|_∞)``; the scale factor keeps the check
    meaningful for fields of size ~1e7 whose residual cannot drop below
    rounding. Up to ``refine`` rounds of iterative refinement are applied.
    """
    vals = _rhs_values(region, rhs)
    deg = region.degrees()
    q = -deg * vals
    phi = solve_laplace_system(region, q)
    field = LatticeField(region, phi)
    for attempt in range(refine + 1):
        resid = field.laplacian() - vals
        scale = max(1.0, float(np.max(np.abs(phi))) if phi.size else 1.0)
        if not resid.size or float(np.max(np.abs(resid))) <= tol * scale:
            return field
        if attempt == refine:
            break
        # Δδ = -resid  <=>  L δ = d·resid
        phi = phi + solve_laplace_system(region, deg * resid)
        field = LatticeField(region, phi)
    raise SolverError(
        f"residual {float(np.max(np.abs(resid))):.3e} above tolerance {tol:.1e} (scale {scale:.3e})"
    )
