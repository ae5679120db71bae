"""Divisible sandpile on the comb and on the line.

A site holding mass above 1 keeps 1 and splits the excess evenly between its
neighbours. :func:`relax` runs this to (numerical) stability under one of
three schedules:

``SWEEP_BOX``
    Lexicographic sweeps over the current support, toppling every unstable
    site, until the total excess drops below ``stop_tol``.
``UNSTABLE_QUEUE``
    FIFO of sites whose excess is at least ``stop_tol / |support|``.
``BLOCK``
    Topple the set ``T`` of already-toppled sites to completion in one go,
    which amounts to a Dirichlet solve ``L u = mu0 - 1`` on ``T``, then add
    every overfull neighbour of ``T`` and repeat. The odometer increases
    monotonically and never overshoots the true one, and the loop stops when
    the excess outside ``T`` is below ``stop_tol``. This is the only
    schedule that reaches n ~ 1e5 in seconds, so it is the default.

The work happens on a dense grid spanning a safety box around the support.
For a point source the box is the limit shape for twice the mass. Mass
reaching the edge of the box is reported as an error.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from numba import njit

from .fields import LatticeField, OdometerField
from .lattice import (
    ORIGIN,
    GraphKind,
    Region,
    Vertex,
    degree,
    neighbor_arrays,
    neighbors,
    pack,
)
from .potential.dirichlet import solve_columns, solve_laplace_system
from .shape import K_SHAPE, L_SHAPE

DEFAULT_STOP_TOL = 1e-8
DEFAULT_CLUSTER_TOL = 1e-6
MAX_TOPPLINGS = 10**9


class Schedule(enum.Enum):
    SWEEP_BOX = "sweep-box"
    UNSTABLE_QUEUE = "unstable-queue"
    BLOCK = "block"


class SandpileError(RuntimeError):
    """Relaxation failed; ``state`` carries diagnostics."""

    def __init__(self, message: str, state: dict | None = None):
        super().__init__(message)
        self.state = state or {}


@dataclass(frozen=True)
class SandpileResult:
    mass: LatticeField
    odometer: OdometerField
    cluster: Region
    iterations: int
    residual_excess: float
    schedule: Schedule

    @property
    def u(self) -> LatticeField:
        return self.odometer.u


# -- single toppling (reference semantics) -----------------------------------

def topple(
    mass: Mapping[tuple[int, int], float],
    v: tuple[int, int],
    odo: Mapping[tuple[int, int], float] | None = None,
    kind: GraphKind = GraphKind.COMB2,
) -> tuple[dict[Vertex, float], dict[Vertex, float]]:
    """Topple ``v`` once; returns new mass and emitted-mass maps."""
    mass = {Vertex(*k): float(val) for k, val in mass.items()}
    odo = {} if odo is None else {Vertex(*k): float(val) for k, val in odo.items()}
    v = Vertex(*v)
    alpha = max(mass.get(v, 0.0) - 1.0, 0.0)
    if alpha > 0.0:
        mass[v] = 1.0
        share = alpha / degree(v, kind)
        for w in neighbors(v, kind):
            mass[w] = mass.get(w, 0.0) + share
        odo[v] = odo.get(v, 0.0) + alpha
    return mass, odo


# -- kernels -----------------------------------------------------------------
# Grid index (i, j) <-> vertex (i - W, j - H). Line runs use H == 0.

_OK, _OVERFLOW, _CAP = 0, 1, 2


@njit(cache=True)
def _spill(m, i, j, share, ylo, yhi, cols):
    if m[i, j] == 0.0:
        ylo[i] = min(ylo[i], j)
        yhi[i] = max(yhi[i], j)
        cols[0] = min(cols[0], i)
        cols[1] = max(cols[1], i)
        cols[2] += 1
    m[i, j] += share


@njit(cache=True)
def _topple_site(m, v, i, j, H, line, ylo, yhi, cols):
    alpha = m[i, j] - 1.0
    if alpha <= 0.0:
        return 0
    ni, nj = m.shape
    if i == 0 or i == ni - 1:
        return -1
    if not line and (j == 0 or j == nj - 1):
        return -1
    m[i, j] = 1.0
    v[i, j] += alpha
    if line:
        s = alpha / 2.0
        _spill(m, i + 1, j, s, ylo, yhi, cols)
        _spill(m, i - 1, j, s, ylo, yhi, cols)
    elif j == H:
        s = alpha / 4.0
        _spill(m, i + 1, j, s, ylo, yhi, cols)
        _spill(m, i, j + 1, s, ylo, yhi, cols)
        _spill(m, i - 1, j, s, ylo, yhi, cols)
        _spill(m, i, j - 1, s, ylo, yhi, cols)
    else:
        s = alpha / 2.0
        _spill(m, i, j + 1, s, ylo, yhi, cols)
        _spill(m, i, j - 1, s, ylo, yhi, cols)
    return 1


@njit(cache=True)
def _support_bounds(m):
    ni, nj = m.shape
    ylo = np.full(ni, nj, dtype=np.int64)
    yhi = np.full(ni, -1, dtype=np.int64)
    cols = np.array([ni, -1, 0], dtype=np.int64)  # first column, last column, support size
    for i in range(ni):
        for j in range(nj):
            if m[i, j] != 0.0:
                ylo[i] = min(ylo[i], j)
                yhi[i] = max(yhi[i], j)
                cols[0] = min(cols[0], i)
                cols[1] = max(cols[1], i)
                cols[2] += 1
    return ylo, yhi, cols


@njit(cache=True)
def _excess(m, ylo, yhi, cols):
    tot = 0.0
    for i in range(cols[0], cols[1] + 1):
        for j in range(ylo[i], yhi[i] + 1):
            e = m[i, j] - 1.0
            if e > 0.0:
                tot += e
    return tot


@njit(cache=True)
def _relax_sweep(m, v, H, line, stop_tol, max_topples):
    ylo, yhi, cols = _support_bounds(m)
    count = 0
    while True:
        excess = _excess(m, ylo, yhi, cols)
        if excess < stop_tol:
            return _OK, count, excess
        for i in range(cols[0], cols[1] + 1):
            for j in range(ylo[i], yhi[i] + 1):
                if m[i, j] > 1.0:
                    st = _topple_site(m, v, i, j, H, line, ylo, yhi, cols)
                    if st < 0:
                        return _OVERFLOW, count, excess
                    count += st
                    if count >= max_topples:
                        return _CAP, count, excess


@njit(cache=True)
def _relax_queue(m, v, H, line, stop_tol, max_topples):
    ni, nj = m.shape
    ylo, yhi, cols = _support_bounds(m)
    cap = ni * nj
    qi = np.empty(cap, dtype=np.int64)
    qj = np.empty(cap, dtype=np.int64)
    inq = np.zeros((ni, nj), dtype=np.bool_)
    head = 0
    size = 0
    count = 0
    excess = _excess(m, ylo, yhi, cols)
    while excess >= stop_tol:
        thr = stop_tol / max(cols[2], 1)
        for i in range(cols[0], cols[1] + 1):
            for j in range(ylo[i], yhi[i] + 1):
                if m[i, j] - 1.0 >= thr and not inq[i, j]:
                    inq[i, j] = True
                    qi[(head + size) % cap] = i
                    qj[(head + size) % cap] = j
                    size += 1
        while size > 0:
            i = qi[head]
            j = qj[head]
            head = (head + 1) % cap
            size -= 1
            inq[i, j] = False
            st = _topple_site(m, v, i, j, H, line, ylo, yhi, cols)
            if st < 0:
                return _OVERFLOW, count, excess
            if st == 0:
                continue
            count += 1
            if count >= max_topples:
                return _CAP, count, excess
            # re-examine the neighbours that just received mass
            for k in range(4):
                if line:
                    if k >= 2:
                        break
                    a = i + 1 - 2 * k
                    b = j
                elif j == H:
                    a = i + (1 if k == 0 else (-1 if k == 2 else 0))
                    b = j + (1 if k == 1 else (-1 if k == 3 else 0))
                else:
                    if k >= 2:
                        break
                    a = i
                    b = j + 1 - 2 * k
                if m[a, b] - 1.0 >= thr and not inq[a, b]:
                    inq[a, b] = True
                    qi[(head + size) % cap] = a
                    qj[(head + size) % cap] = b
                    size += 1
        excess = _excess(m, ylo, yhi, cols)
    return _OK, count, excess


@njit(cache=True)
def _relax_block(mu0, W, H, line, stop_tol, max_iter, lo, hi, c0, c1):
    """Grow-and-solve loop for a column-layout toppled set.

    ``lo``/``hi`` hold per-grid-column tooth extents (as y values), active on
    columns ``c0..c1``. Returns status, iterations, residual excess, the
    dense odometer ``u`` and the final extents.
    """
    ni, nj = mu0.shape
    U = np.zeros((ni, nj))
    bb_deg = 2 if line else 4
    it = 0
    excess = 0.0
    while True:
        ncol = c1 - c0 + 1
        start = np.empty(ncol, dtype=np.int64)
        tot = 0
        for c in range(ncol):
            start[c] = tot
            tot += hi[c0 + c] - lo[c0 + c] + 1
        q = np.empty(tot)
        for c in range(ncol):
            col = c0 + c
            for y in range(lo[col], hi[col] + 1):
                q[start[c] + y - lo[col]] = mu0[col, H + y] - 1.0
        u = solve_columns(lo[c0:c1 + 1].copy(), hi[c0:c1 + 1].copy(), start, q, bb_deg)
        for c in range(ncol):
            col = c0 + c
            for y in range(lo[col], hi[col] + 1):
                U[col, H + y] = u[start[c] + y - lo[col]]
        it += 1
        # mass that has reached the sites just outside T
        excess = 0.0
        grow_top = np.zeros(ncol, dtype=np.bool_)
        grow_bot = np.zeros(ncol, dtype=np.bool_)
        if not line:
            for c in range(ncol):
                col = c0 + c
                mt = mu0[col, H + hi[col] + 1] + U[col, H + hi[col]]
                mb = mu0[col, H + lo[col] - 1] + U[col, H + lo[col]]
                if mt > 1.0:
                    excess += mt - 1.0
                    grow_top[c] = True
                if mb > 1.0:
                    excess += mb - 1.0
                    grow_bot[c] = True
        ml = mu0[c0 - 1, H] + U[c0, H]
        mr = mu0[c1 + 1, H] + U[c1, H]
        grow_left = ml > 1.0
        grow_right = mr > 1.0
        if grow_left:
            excess += ml - 1.0
        if grow_right:
            excess += mr - 1.0
        if excess < stop_tol:
            return _OK, it, excess, U, lo, hi, c0, c1
        if it >= max_iter:
            return _CAP, it, excess, U, lo, hi, c0, c1
        for c in range(ncol):
            col = c0 + c
            if grow_top[c]:
                hi[col] += 1
            if grow_bot[c]:
                lo[col] -= 1
            if not line and (H + hi[col] + 1 >= nj or H + lo[col] - 1 < 0):
                return _OVERFLOW, it, excess, U, lo, hi, c0, c1
        if grow_left:
            c0 -= 1
            lo[c0] = 0
            hi[c0] = 0
        if grow_right:
            c1 += 1
            lo[c1] = 0
            hi[c1] = 0
        if c0 - 1 < 0 or c1 + 1 >= ni:
            return _OVERFLOW, it, excess, U, lo, hi, c0, c1


# -- driver ------------------------------------------------------------------

def point_mass(n: float, kind: GraphKind = GraphKind.COMB2, at: tuple[int, int] = ORIGIN) -> LatticeField:
    return LatticeField(Region([at], kind), [float(n)])


def _as_field(mu0, kind: GraphKind | None) -> LatticeField:
    if isinstance(mu0, LatticeField):
        return mu0
    if isinstance(mu0, Mapping):
        kind = kind or GraphKind.COMB2
        pts = list(mu0.items())
        region = Region([p for p, _ in pts], kind)
        vals = np.zeros(len(region))
        idx = region.index_of([p[0] for p, _ in pts], [p[1] for p, _ in pts])
        np.add.at(vals, idx, [float(m) for _, m in pts])
        return LatticeField(region, vals)
    raise TypeError("mu0 must be a LatticeField or a mapping vertex -> mass")


def _safety_box(field: LatticeField) -> tuple[int, int]:
    total = max(field.total(), 1.0)
    if len(field.region):
        xmin, xmax, ymin, ymax = field.region.extent()
    else:
        xmin = xmax = ymin = ymax = 0
    ax = max(abs(xmin), abs(xmax))
    ay = max(abs(ymin), abs(ymax))
    if field.kind is GraphKind.LINE:
        return ax + int(math.ceil(total)) + 3, 0
    r = (2.0 * total) ** (1.0 / 3.0)
    return ax + int(math.ceil(K_SHAPE * r)) + 3, ay + int(math.ceil(L_SHAPE * r * r)) + 3


def _grid_to_region(mask: np.ndarray, W: int, H: int, kind: GraphKind) -> tuple[Region, np.ndarray, np.ndarray]:
    ii, jj = np.nonzero(mask)  # row-major order == lexicographic (x, y)
    xs = ii.astype(np.int64) - W
    ys = jj.astype(np.int64) - H
    region = Region.from_keys(pack(xs, ys), kind, assume_sorted=True)
    return region, ii, jj


def relax(
    mu0,
    schedule: Schedule = Schedule.BLOCK,
    stop_tol: float = DEFAULT_STOP_TOL,
    *,
    kind: GraphKind | None = None,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
    max_topplings: int = MAX_TOPPLINGS,
) -> SandpileResult:
    """Stabilise the initial mass ``mu0`` and return the limit state.

    ``mu0`` is a :class:`LatticeField` or a mapping vertex -> mass.
    For the toppling schedules ``iterations`` counts topplings; for the
    block schedule it counts block solves.
    """
    if not stop_tol > 0:
        raise ValueError("stop_tol must be positive")
    field = _as_field(mu0, kind)
    if np.any(field.values < 0):
        raise ValueError("initial mass must be nonnegative")
    kind = field.kind
    line = kind is GraphKind.LINE
    schedule = Schedule(schedule)
    W, H = _safety_box(field)
    grid = np.zeros((2 * W + 1, 2 * H + 1))
    np.add.at(grid, (field.region.xs + W, field.region.ys + H), field.values)

    if schedule is Schedule.BLOCK:
        return _relax_block_driver(field, grid, W, H, stop_tol, cluster_tol, max_topplings)

    mass = grid.copy()
    emitted = np.zeros_like(mass)
    kernel = _relax_sweep if schedule is Schedule.SWEEP_BOX else _relax_queue
    status, count, excess = kernel(mass, emitted, H, line, stop_tol, max_topplings)
    _raise_on_status(status, count, excess, schedule)
    support, ii, jj = _grid_to_region((mass != 0.0) | (emitted != 0.0), W, H, kind)
    mass_field = LatticeField(support, mass[ii, jj])
    odo = OdometerField(support, emitted[ii, jj])
    excess = float(np.sum(np.maximum(mass_field.values - 1.0, 0.0)))
    cluster = Region.from_keys(support.keys[mass_field.values >= 1.0 - cluster_tol], kind, assume_sorted=True)
    return SandpileResult(mass_field, odo, cluster, int(count), excess, schedule)


def _raise_on_status(status: int, count: int, excess: float, schedule: Schedule) -> None:
    if status == _OVERFLOW:
        raise SandpileError(
            "mass reached the edge of the safety box",
            {"schedule": schedule.value, "count": int(count), "excess": float(excess)},
        )
    if status == _CAP:
        raise SandpileError(
            f"iteration cap reached after {count} steps with excess {excess:.3e}",
            {"schedule": schedule.value, "count": int(count), "excess": float(excess)},
        )


def _relax_block_driver(field, grid, W, H, stop_tol, cluster_tol, max_iter) -> SandpileResult:
    kind = field.kind
    line = kind is GraphKind.LINE
    unstable = Region.from_keys(field.region.keys[field.values > 1.0], kind, assume_sorted=True)
    if len(unstable) == 0:
        u_dense = np.zeros_like(grid)
        iterations, excess = 0, 0.0
    else:
        layout = unstable.columns()
        if layout is None:
            u_dense, iterations, excess = _relax_block_generic(unstable, grid, W, H, stop_tol, max_iter)
        else:
            ncols = grid.shape[0]
            lo = np.zeros(ncols, dtype=np.int64)
            hi = np.zeros(ncols, dtype=np.int64)
            c0 = layout.x0 + W
            c1 = c0 + layout.lo.size - 1
            lo[c0:c1 + 1] = layout.lo
            hi[c0:c1 + 1] = layout.hi
            status, iterations, excess, u_dense, *_ = _relax_block(
                grid, W, H, line, stop_tol, max_iter, lo, hi, c0, c1
            )
            _raise_on_status(status, iterations, excess, Schedule.BLOCK)
    toppled = u_dense != 0.0
    # sites that hold mass: initial support, toppled sites and their neighbours
    reach = toppled | (grid != 0.0)
    spread = toppled.copy()
    spread[1:, :] |= toppled[:-1, :] & _backbone_rows(toppled.shape, H, line)[:-1, :]
    spread[:-1, :] |= toppled[1:, :] & _backbone_rows(toppled.shape, H, line)[1:, :]
    if not line:
        spread[:, 1:] |= toppled[:, :-1]
        spread[:, :-1] |= toppled[:, 1:]
    support, ii, jj = _grid_to_region(reach | spread, W, H, kind)
    u_field = LatticeField(support, u_dense[ii, jj])
    # toppled-to-completion sites hold exactly 1; elsewhere collect the inflow
    mu = grid[ii, jj] + support.degrees() * u_field.laplacian()
    mu[toppled[ii, jj]] = 1.0
    mass_field = LatticeField(support, mu)
    odo = OdometerField.from_normalized(support, u_field.values)
    excess = float(np.sum(np.maximum(mu - 1.0, 0.0)))
    cluster = Region.from_keys(support.keys[mu >= 1.0 - cluster_tol], kind, assume_sorted=True)
    return SandpileResult(mass_field, odo, cluster, int(iterations), excess, Schedule.BLOCK)


def _backbone_rows(shape, H, line) -> np.ndarray:
    """Mask of grid cells that have horizontal neighbours."""
    mask = np.zeros(shape, dtype=bool)
    if line:
        mask[:, :] = True
    else:
        mask[:, H] = True
    return mask


def _relax_block_generic(unstable: Region, grid, W, H, stop_tol, max_iter):
    """Grow-and-solve on toppled sets without a column layout (sparse solves)."""
    kind = unstable.kind
    toppled = unstable
    for it in range(1, max_iter + 1):
        u = solve_laplace_system(toppled, grid[toppled.xs + W, toppled.ys + H] - 1.0)
        u_field = LatticeField(toppled, u)
        outer, _ = toppled.boundary()
        if np.any(np.abs(outer.xs) >= W) or np.any(np.abs(outer.ys) >= max(H, 1)):
            raise SandpileError("mass reached the edge of the safety box", {"iterations": it})
        inflow = np.zeros(len(outer))
        for nx, ny, valid in neighbor_arrays(outer.xs, outer.ys, kind):
            inflow += np.where(valid, u_field.at(nx, ny), 0.0)
        mu_out = grid[outer.xs + W, outer.ys + H] + inflow
        over = mu_out > 1.0
        excess = float(np.sum(mu_out[over] - 1.0))
        if excess < stop_tol:
            dense = np.zeros_like(grid)
            dense[toppled.xs + W, toppled.ys + H] = u
            return dense, it, excess
        toppled = toppled | Region.from_keys(outer.keys[over], kind, assume_sorted=True)
    raise SandpileError("iteration cap reached", {"iterations": max_iter})


def sandpile(
    n: float,
    kind: GraphKind = GraphKind.COMB2,
    schedule: Schedule = Schedule.BLOCK,
    stop_tol: float = DEFAULT_STOP_TOL,
    **kwargs,
) -> SandpileResult:
    """Relax ``n`` units of mass started at the origin."""
    return relax(point_mass(n, kind), schedule, stop_tol, **kwargs)


def abelian_check(
    mu0,
    schedule_a: Schedule = Schedule.SWEEP_BOX,
    schedule_b: Schedule = Schedule.UNSTABLE_QUEUE,
    stop_tol: float = DEFAULT_STOP_TOL,
    *,
    kind: GraphKind | None = None,
) -> float:
    """Sup-norm distance between the normalised odometers of two schedules."""
    a = relax(mu0, schedule_a, stop_tol, kind=kind)
    b = relax(mu0, schedule_b, stop_tol, kind=kind)
    both = a.odometer.region | b.odometer.region
    if len(both) == 0:
        return 0.0
    ua = a.u.at(both.xs, both.ys)
    ub = b.u.at(both.xs, both.ys)
    return float(np.max(np.abs(ua - ub)))
