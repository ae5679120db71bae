"""Rotor-router walks and rotor-router aggregation on the comb and the line.

A particle at ``x`` first advances the rotor of ``x`` to the next neighbour
in the fixed order of :func:`combagg.lattice.neighbors` and then moves there.
Aggregation releases particles from the origin one at a time; each stops at
the first vertex outside the current cluster, and rotors are never reset.

The second half of the module compares rotor and sandpile odometers: the
rotor weight audit, the sums ``W~(y)`` built from the stopped Green function
of the sandpile cluster, and the explicit inner region where the odometer
comparison forces a vertex into the rotor cluster.
"""

from __future__ import annotations

import io
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from numba import njit

from .fields import LatticeField
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
from .potential.dirichlet import DEFAULT_TOL, laplacian_matrix, solve_laplace_system
from .potential.green import weight_function
from .sandpile import DEFAULT_STOP_TOL, sandpile
from .shape import K_SHAPE, L_SHAPE, ball_region, gamma_array

STEP_CAP = 10**10
PRESETS = ("all-first", "toward-origin", "custom")


class RotorError(RuntimeError):
    def __init__(self, message: str, state: dict | None = None):
        super().__init__(message)
        self.state = state or {}


def toward_origin_index(v, kind: GraphKind = GraphKind.COMB2) -> int:
    """Index of the neighbour one step closer to the origin (0 at the origin)."""
    x, y = int(v[0]), int(v[1])
    if kind is GraphKind.LINE:
        return 1 if x > 0 else 0
    if y > 0:
        return 1
    if y < 0:
        return 0
    return 2 if x > 0 else 0


class RotorState:
    """Rotor indices; vertices never touched hold their initial index implicitly.

    ``preset`` is ``"all-first"`` (index 0 everywhere), ``"toward-origin"``
    or ``"custom"``; a custom state reads its initial indices from ``custom``
    and uses 0 elsewhere.
    """

    def __init__(
        self,
        preset: str = "all-first",
        custom: Mapping[tuple[int, int], int] | None = None,
        kind: GraphKind = GraphKind.COMB2,
    ):
        if preset not in PRESETS:
            raise ValueError(f"unknown rotor preset {preset!r}")
        self.preset = preset
        self.kind = kind
        self.custom: dict[Vertex, int] = {}
        for v, i in (custom or {}).items():
            v = Vertex(int(v[0]), int(v[1]))
            self.custom[v] = int(i) % degree(v, kind)
        self._current: dict[Vertex, int] = {}

    # -- construction -------------------------------------------------------
    @classmethod
    def random(cls, seed: int, region: Region, kind: GraphKind = GraphKind.COMB2) -> RotorState:
        """Custom state with independent uniform indices on ``region``."""
        rng = np.random.default_rng(seed)
        deg = region.degrees()
        idx = (rng.random(len(region)) * deg).astype(np.int64)
        return cls("custom", dict(zip(region.vertices(), idx.tolist())), kind)

    @classmethod
    def from_csv(cls, source, kind: GraphKind = GraphKind.COMB2) -> RotorState:
        """Custom state from ``x,y,index`` rows."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2, dtype=np.int64)
        return cls("custom", {(int(r[0]), int(r[1])): int(r[2]) for r in rows}, kind)

    @classmethod
    def parse(cls, spec: str, kind: GraphKind = GraphKind.COMB2) -> RotorState:
        """``all-first``, ``toward-origin`` or ``file:PATH``."""
        if spec.startswith("file:"):
            return cls.from_csv(spec[5:], kind)
        if spec in ("all-first", "toward-origin"):
            return cls(spec, kind=kind)
        raise ValueError(f"unknown rotor spec {spec!r}")

    def fresh(self) -> RotorState:
        """Same initial configuration, nothing touched."""
        return RotorState(self.preset, self.custom, self.kind)

    def copy(self) -> RotorState:
        out = self.fresh()
        out._current = dict(self._current)
        return out

    # -- access ---------------------------------------------------------------
    def initial(self, v) -> int:
        v = Vertex(int(v[0]), int(v[1]))
        if self.preset == "toward-origin":
            return toward_origin_index(v, self.kind)
        if self.preset == "custom":
            return self.custom.get(v, 0)
        return 0

    def initial_indices(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        out = np.zeros(xs.shape, dtype=np.int8)
        if self.preset == "toward-origin":
            if self.kind is GraphKind.LINE:
                out[xs > 0] = 1
            else:
                out[(ys == 0) & (xs > 0)] = 2
                out[ys > 0] = 1
        elif self.preset == "custom" and self.custom:
            keys = np.array([pack(v.x, v.y) for v in self.custom], dtype=np.int64).ravel()
            vals = np.array(list(self.custom.values()), dtype=np.int8)
            order = np.argsort(keys)
            keys, vals = keys[order], vals[order]
            q = pack(xs, ys)
            pos = np.minimum(np.searchsorted(keys, q), keys.size - 1)
            hit = keys[pos] == q
            out[hit] = vals[pos[hit]]
        return out

    def index(self, v) -> int:
        v = Vertex(int(v[0]), int(v[1]))
        return self._current.get(v, self.initial(v))

    def set(self, v, i: int) -> None:
        v = Vertex(int(v[0]), int(v[1]))
        self._current[v] = int(i) % degree(v, self.kind)

    def touched(self) -> dict[Vertex, int]:
        return dict(self._current)

    def indices_on(self, region: Region) -> np.ndarray:
        return np.array([self.index(v) for v in region], dtype=np.int64)

    def to_csv(self, path=None, region: Region | None = None) -> str:
        """``x,y,index`` for ``region`` (default: touched vertices), sorted by ``(x, y)``."""
        verts = sorted(self._current) if region is None else list(region)
        buf = io.StringIO()
        buf.write("x,y,index\n")
        for v in verts:
            buf.write(f"{v[0]},{v[1]},{self.index(v)}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="\n")
        return text


def rotor_step(v, state: RotorState) -> Vertex:
    """Advance the rotor at ``v`` and move along it."""
    nbrs = neighbors(v, state.kind)
    i = (state.index(v) + 1) % len(nbrs)
    state.set(v, i)
    return nbrs[i]


# -- aggregation ---------------------------------------------------------------

@njit(cache=True)
def _aggregate(occ, rot, odo, ox, oy, line, done, n, cap):
    # Release particles done..n-1. Returns (done, status, x, y); status 1 asks
    # the caller to enlarge the grid, status 2 reports the step cap.
    while done < n:
        x = 0
        y = 0
        steps = 0
        while occ[x + ox, y + oy] != 0:
            if steps >= cap:
                return done, 2, x, y
            i = rot[x + ox, y + oy] + 1
            if line:
                if i == 2:
                    i = 0
            elif y == 0:
                if i == 4:
                    i = 0
            elif i == 2:
                i = 0
            rot[x + ox, y + oy] = i
            odo[x + ox, y + oy] += 1
            if line:
                x += 1 if i == 0 else -1
            elif y == 0:
                if i == 0:
                    x += 1
                elif i == 1:
                    y += 1
                elif i == 2:
                    x -= 1
                else:
                    y -= 1
            else:
                y += 1 if i == 0 else -1
            steps += 1
        occ[x + ox, y + oy] = 1
        done += 1
        if abs(x) + 2 > ox or (not line and abs(y) + 2 > oy):
            return done, 1, x, y
    return done, 0, 0, 0


@njit(cache=True)
def _line_aggregate(occ, rot, odo, ox, done, n):
    # Whole-particle routing on an occupied interval [a, b] of the line.
    # On a tree the last emission from every visited site points toward the
    # exit, so with a right exit site x sends R(x) particles right and
    # R(x) - [first emission is E] left, and flow conservation gives
    # R(x) = left(x+1) + [x >= 0]. The sweep from b down to a is consistent
    # iff nothing leaves through a; otherwise the particle exits left (mirror).
    # rot: 0 = last sent E (next goes W), 1 = last sent W (next goes E).
    size = occ.shape[0]
    right = np.zeros(size, dtype=np.int64)
    left = np.zeros(size, dtype=np.int64)
    a = ox
    b = ox
    while a > 0 and occ[a - 1] != 0:
        a -= 1
    while b < size - 1 and occ[b + 1] != 0:
        b += 1
    if occ[ox] == 0:
        occ[ox] = 1
        done += 1
    while done < n:
        # hypothesis: exit at b + 1
        ok = True
        carry = 1
        lo = a
        for i in range(b, a - 1, -1):
            if i < b:
                carry = left[i + 1] + (1 if i >= ox else 0)
            if carry == 0:
                lo = i + 1
                break
            right[i] = carry
            left[i] = carry - (1 if rot[i] == 1 else 0)
            if i == a and left[i] != 0:
                ok = False
        if ok:
            for i in range(lo, b + 1):
                odo[i] += right[i] + left[i]
                rot[i] = 0
            b += 1
            occ[b] = 1
        else:
            carry = 1
            hi = b
            for i in range(a, b + 1):
                if i > a:
                    carry = right[i - 1] + (1 if i <= ox else 0)
                if carry == 0:
                    hi = i - 1
                    break
                left[i] = carry
                right[i] = carry - (1 if rot[i] == 0 else 0)
                if i == b and right[i] != 0:
                    return done, 3, i - ox, 0
            for i in range(a, hi + 1):
                odo[i] += right[i] + left[i]
                rot[i] = 1
            a -= 1
            occ[a] = 1
        done += 1
        if a < 2 or b > size - 3:
            return done, 1, (a if a < 2 else b) - ox, 0
    return done, 0, 0, 0


@dataclass
class RotorRun:
    n: int
    kind: GraphKind
    cluster: Region
    odometer: dict[Vertex, int]
    rotors: RotorState
    initial: RotorState = field(repr=False)

    def u_R(self, v) -> int:
        return self.odometer.get(Vertex(int(v[0]), int(v[1])), 0)

    def odometer_on(self, region: Region) -> np.ndarray:
        return np.array([self.u_R(v) for v in region], dtype=np.int64)

    def odometer_field(self) -> tuple[Region, np.ndarray]:
        region = Region(self.odometer, self.kind)
        return region, self.odometer_on(region)


class _RotorGrid:
    def __init__(self, state: RotorState, half_w: int, half_h: int, line: bool):
        self.state = state
        self.line = line
        self._alloc(half_w, 0 if line else half_h, None)

    def _alloc(self, w: int, h: int, old) -> None:
        xs = np.arange(-w, w + 1, dtype=np.int64)
        ys = np.arange(-h, h + 1, dtype=np.int64)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        rot = self.state.initial_indices(gx.ravel(), gy.ravel()).reshape(gx.shape)
        occ = np.zeros(gx.shape, dtype=np.uint8)
        odo = np.zeros(gx.shape, dtype=np.int64)
        if old is not None:
            oocc, orot, oodo, oox, ooy = old
            sl = (slice(w - oox, w + oox + 1), slice(h - ooy, h + ooy + 1))
            occ[sl], rot[sl], odo[sl] = oocc, orot, oodo
        self.occ, self.rot, self.odo, self.ox, self.oy = occ, rot, odo, w, h

    def grow(self, x: int, y: int) -> None:
        w = 2 * self.ox if abs(x) + 2 > self.ox else self.ox
        h = self.oy if self.line or abs(y) + 2 <= self.oy else 2 * self.oy
        self._alloc(w, h, (self.occ, self.rot, self.odo, self.ox, self.oy))


def rotor_aggregate(
    n: int,
    initial: RotorState | str = "all-first",
    kind: GraphKind | None = None,
    *,
    step_cap: int = STEP_CAP,
    stepwise: bool = False,
) -> RotorRun:
    """Deterministic rotor-router cluster of ``n`` particles.

    On the line each particle is routed in one sweep over the cluster
    (its total number of steps grows like n^2, so step-by-step routing costs
    ~n^3); ``stepwise=True`` forces the plain step loop.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(initial, str):
        initial = RotorState.parse(initial, kind or GraphKind.COMB2)
    kind = initial.kind if kind is None else kind
    if kind is not initial.kind:
        raise ValueError("rotor state and graph kind disagree")
    line = kind is GraphKind.LINE
    r = n ** (1.0 / 3.0)
    if line:
        grid = _RotorGrid(initial, n // 2 + 4, 0, True)
    else:
        grid = _RotorGrid(initial, int(K_SHAPE * r * 1.3) + 4, int(L_SHAPE * r * r * 1.3) + 4, False)
    done = 0
    while True:
        if line and not stepwise:
            done, status, x, y = _line_aggregate(grid.occ[:, 0], grid.rot[:, 0], grid.odo[:, 0], grid.ox, done, n)
        else:
            done, status, x, y = _aggregate(grid.occ, grid.rot, grid.odo, grid.ox, grid.oy, line, done, n, step_cap)
        if status == 0:
            break
        if status == 2:
            raise RotorError(f"particle {done} exceeded {step_cap} steps", {"x": x, "y": y, "particle": done})
        if status == 3:
            raise RotorError("inconsistent interval routing", {"x": x, "particle": done})
        grid.grow(x, y)
    ii, jj = np.nonzero(grid.occ)
    cluster = Region.from_keys(pack(ii - grid.ox, jj - grid.oy), kind, assume_sorted=True)
    ei, ej = np.nonzero(grid.odo)
    exs, eys = ei - grid.ox, ej - grid.oy
    odometer = {Vertex(a, b): c for a, b, c in zip(exs.tolist(), eys.tolist(), grid.odo[ei, ej].tolist())}
    final = initial.fresh()
    for (a, b), c in zip(zip(exs.tolist(), eys.tolist()), grid.rot[ei, ej].tolist()):
        final._current[Vertex(a, b)] = int(c)
    return RotorRun(n=n, kind=kind, cluster=cluster, odometer=odometer, rotors=final, initial=initial)


def rotor_aggregate_reference(n: int, initial: RotorState) -> RotorRun:
    """Sequential release written with :func:`rotor_step`; slow, for cross-checks."""
    state = initial.fresh()
    occupied = {ORIGIN}
    odo: dict[Vertex, int] = {}
    for _ in range(1, n):
        v = ORIGIN
        while v in occupied:
            odo[v] = odo.get(v, 0) + 1
            v = rotor_step(v, state)
        occupied.add(v)
    return RotorRun(n, initial.kind, Region(occupied, initial.kind), odo, state, initial)


def rotor_aggregate_round_robin(n: int, initial: RotorState) -> RotorRun:
    """All ``n`` particles start at the origin and move in turn, one step each.

    A particle alone on an empty vertex settles there; every other particle
    keeps walking. By the abelian property the outcome matches sequential
    release.
    """
    state = initial.fresh()
    occupied: set[Vertex] = set()
    odo: dict[Vertex, int] = {}
    active = [ORIGIN] * n
    while active:
        nxt = []
        for v in active:
            if v not in occupied:
                occupied.add(v)
                continue
            odo[v] = odo.get(v, 0) + 1
            nxt.append(rotor_step(v, state))
        active = nxt
    return RotorRun(n, initial.kind, Region(occupied, initial.kind), odo, state, initial)


# -- rotor weights -------------------------------------------------------------

def _as_function(h) -> Callable[[Vertex], float]:
    if isinstance(h, LatticeField):
        h = h.as_dict()
    if isinstance(h, Mapping):
        return lambda v: float(h.get(v, 0.0))
    return lambda v: float(h(v))


def rotor_weight(v, k: int, h, initial_index: int = 0, kind: GraphKind = GraphKind.COMB2) -> float:
    """``w(v, k)``: sum over the first ``k`` emissions of ``h(v) - h(target)``.

    Uses ``w(v, k) = w(v, k - d) - d Δh(v)`` to fold full rotor turns.
    """
    h = _as_function(h)
    nbrs = neighbors(v, kind)
    d = len(nbrs)
    hv = h(v)
    turn = sum(hv - h(w) for w in nbrs)  # = -d Δh(v)
    full, rest = divmod(int(k), d)
    part = sum(hv - h(nbrs[(initial_index + j) % d]) for j in range(1, rest + 1))
    return full * turn + part


def weight_audit(
    n: int,
    h,
    initial: RotorState | str = "all-first",
    kind: GraphKind = GraphKind.COMB2,
    every: int = 1,
) -> float:
    """Largest drift of ``W_P + W_R`` while aggregating ``n`` particles.

    The particle configuration starts as ``n`` particles at the origin; one
    particle moves at a time, and only from a vertex that holds another.
    Every ``every`` steps both weights are recomputed from scratch (``W_P``
    from the particle counts, ``W_R`` from the odometer via
    :func:`rotor_weight`) and compared with the starting total.
    """
    if isinstance(initial, str):
        initial = RotorState.parse(initial, kind)
    hf = _as_function(h)
    state = initial.fresh()
    sigma: dict[Vertex, int] = {ORIGIN: n}
    odo: dict[Vertex, int] = {}

    def total() -> float:
        wp = sum(c * hf(v) for v, c in sigma.items())
        wr = sum(rotor_weight(v, k, hf, initial.initial(v), kind) for v, k in odo.items())
        return wp + wr

    start = total()
    drift = 0.0
    t = 0
    for _ in range(1, n):
        v = ORIGIN
        while sigma.get(v, 0) >= 2:
            w = rotor_step(v, state)
            sigma[v] -= 1
            sigma[w] = sigma.get(w, 0) + 1
            odo[v] = odo.get(v, 0) + 1
            v = w
            t += 1
            if t % every == 0:
                drift = max(drift, abs(total() - start))
    return max(drift, abs(total() - start))


# -- Green-function sums ---------------------------------------------------------

def _neighbor_index(region: Region):
    """Per neighbour slot: (valid, index in region or -1)."""
    out = []
    for nx, ny, valid in neighbor_arrays(region.xs, region.ys, region.kind):
        out.append((valid, np.where(valid, region.index_of(nx, ny), -1)))
    return out


def _wtilde_from_h(h: np.ndarray, slots) -> tuple[np.ndarray, np.ndarray]:
    """Full and restricted sums for rows of ``h`` (one row per source vertex)."""
    full = np.zeros(h.shape[:-1])
    restricted = np.zeros(h.shape[:-1])
    for valid, j in slots:
        inside = j >= 0
        hz = np.where(inside, h[..., np.maximum(j, 0)], 0.0)
        diff = np.where(valid, np.abs(h - hz), 0.0)
        full += diff.sum(axis=-1)
        restricted += np.where(inside, diff, 0.0).sum(axis=-1)
    return full, restricted


def wtilde(y, region: Region, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """``(full, restricted)`` sums of ``|h_y(x) - h_y(z)|`` over ``x`` in region, ``z ~ x``.

    ``h_y = G(y, .)/d(.)`` vanishes off the region. The restricted sum keeps
    only pairs with both ends inside.
    """
    h = weight_function(region, y, tol).values
    full, restricted = _wtilde_from_h(h, _neighbor_index(region))
    return float(full), float(restricted)


def wtilde_all(region: Region) -> tuple[np.ndarray, np.ndarray]:
    """:func:`wtilde` for every vertex of ``region`` at once (dense; small regions)."""
    # L^{-1}[y, x] = G(y, x)/d(x) = h_y(x)
    k = sla.inv(laplacian_matrix(region).toarray())
    return _wtilde_from_h(k, _neighbor_index(region))


def expected_exit_distance(y, region: Region) -> float:
    """``E_y[d(y, X_T)]`` for the walk from ``y`` stopped on leaving ``region``.

    Solved as the harmonic extension of ``z -> d(y, z)`` from the outer
    boundary, independently of the Green function.
    """
    y = (int(y[0]), int(y[1]))
    if y not in region:
        raise ValueError(f"{y} is not in the region")
    q = np.zeros(len(region))
    for nx, ny, valid in neighbor_arrays(region.xs, region.ys, region.kind):
        out = valid & ~region.contains_many(nx, ny)
        if region.kind is GraphKind.LINE:
            dist = np.abs(nx - y[0])
        else:
            # comb distance, vectorised
            dist = np.where(nx == y[0], np.abs(ny - y[1]), np.abs(y[1]) + np.abs(nx - y[0]) + np.abs(ny))
        q += np.where(out, dist, 0)
    phi = solve_laplace_system(region, q)
    return float(phi[region.index_of([y[0]], [y[1]])[0]])


def exit_distribution(y, region: Region) -> dict[Vertex, float]:
    """``P_y[X_T = z]`` for outer-boundary vertices ``z``."""
    h = weight_function(region, y).values
    out: dict[Vertex, float] = {}
    for nx, ny, valid in neighbor_arrays(region.xs, region.ys, region.kind):
        outside = valid & ~region.contains_many(nx, ny)
        for a, b, p in zip(nx[outside].tolist(), ny[outside].tolist(), h[outside].tolist()):
            out[Vertex(a, b)] = out.get(Vertex(a, b), 0.0) + p
    return out


# -- odometer comparison ---------------------------------------------------------

def check_rotor_bound(
    n: int,
    initial: RotorState | str = "all-first",
    stop_tol: float = DEFAULT_STOP_TOL,
    *,
    sand=None,
    wt=None,
) -> dict:
    """Worst slack of ``u_n(y) <= u_R(y)/d(y) + W~(y)`` over the sandpile cluster.

    ``sand`` and ``wt`` let callers reuse a sandpile result and the full
    ``W~`` array across rotor presets.
    """
    if isinstance(initial, str):
        initial = RotorState.parse(initial)
    sand = sand if sand is not None else sandpile(n, stop_tol=stop_tol)
    region = sand.cluster
    if wt is None:
        wt, _ = wtilde_all(region)
    run = rotor_aggregate(n, initial)
    u_r = run.odometer_on(region) / region.degrees()
    u_n = sand.u.at(region.xs, region.ys)
    slack = u_r + wt - u_n
    i = int(np.argmin(slack))
    return {
        "n": n,
        "rotors": initial.preset,
        "min_slack": float(slack[i]),
        "at": [int(region.xs[i]), int(region.ys[i])],
        "cluster_size": len(region),
    }


def rotor_inner_region(n: float) -> Region:
    """Vertices of ``ball_region(n)`` with ``gamma_n(x, y) > 2(|x| + |y| + l n^(2/3))``."""
    ball = ball_region(n)
    lhs = gamma_array(n, ball.xs, ball.ys)
    rhs = 2.0 * (np.abs(ball.xs) + np.abs(ball.ys) + L_SHAPE * float(np.cbrt(n)) ** 2)
    return Region.from_keys(ball.keys[lhs - rhs > 0], GraphKind.COMB2, assume_sorted=True)


def line_regular_check(n: int, preset: str = "all-first") -> dict:
    """Sandpile cluster of mass ``n // 3`` on the line inside the rotor cluster of ``n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    mass = n // 3
    if mass >= 1:
        sand_cluster = sandpile(mass, kind=GraphKind.LINE).cluster
    else:
        sand_cluster = Region([], GraphKind.LINE)
    run = rotor_aggregate(n, RotorState(preset, kind=GraphKind.LINE))
    missing = sand_cluster - run.cluster
    return {
        "n": n,
        "rotors": preset,
        "contained": len(missing) == 0,
        "sandpile_size": len(sand_cluster),
        "rotor_size": len(run.cluster),
        "missing": [list(v) for v in missing],
    }
