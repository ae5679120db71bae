"""Internal diffusion limited aggregation on the comb.

Particle ``i`` starts at the origin and walks until it first steps off the
cluster built by particles ``0..i-1``; that site joins the cluster. Particle
0 settles at the origin at once.

Randomness: particle ``i`` of a run with seed ``s`` draws raw 64-bit words
from ``PCG64(SeedSequence(s, spawn_key=(i,)))``. A backbone step uses the
two low bits of the current word (E, N, W, S), a tooth step one bit (N, S);
a fresh word is taken whenever fewer than two bits remain. The JIT walk and
:func:`walk_step` follow the same rule, so any trajectory can be replayed
step by step in Python.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from numpy.random import PCG64, SeedSequence

from .lattice import ORIGIN, GraphKind, Region, Vertex, neighbors, pack
from .potential.green import stopped_green
from .shape import K_SHAPE, L_SHAPE, ball_region

log = logging.getLogger(__name__)

STEP_CAP = 10**10
_FIRST_CHUNK = 256
_MAX_CHUNK = 1 << 16


class IdlaError(RuntimeError):
    def __init__(self, message: str, state: dict | None = None):
        super().__init__(message)
        self.state = state or {}


class RngStream:
    """Deterministic bit source for one particle (or one Monte Carlo trial)."""

    def __init__(self, seed: int, key: int = 0):
        self.seed = int(seed)
        self.key = int(key)
        self._gen = PCG64(SeedSequence(self.seed, spawn_key=(self.key,)))
        self._word = 0
        self._bits = 0

    def words(self, count: int) -> np.ndarray:
        """Next ``count`` raw words; they bypass the bit buffer."""
        return self._gen.random_raw(count)

    def bits(self, k: int) -> int:
        """``k`` (1 or 2) low bits of the current word."""
        if self._bits < 2:
            self._word = int(self._gen.random_raw())
            self._bits = 64
        r = self._word & ((1 << k) - 1)
        self._word >>= k
        self._bits -= k
        return r

    def state(self) -> tuple[int, int]:
        return self._word, self._bits

    def restore(self, word: int, bits: int) -> None:
        self._word, self._bits = int(word), int(bits)


def walk_step(v, rng: RngStream, kind: GraphKind = GraphKind.COMB2) -> Vertex:
    """One simple-random-walk step: a uniformly chosen neighbour."""
    nbrs = neighbors(v, kind)
    return nbrs[rng.bits(2 if len(nbrs) == 4 else 1)]


@njit(cache=True)
def _walk(grid, ox, oy, words, pos, word, bits, x, y, steps, cap):
    # Walk until the site under the walker is empty. Returns
    # (status, x, y, steps, pos, word, bits); status 0 settled, 1 needs words, 2 cap hit.
    nw = words.shape[0]
    while grid[x + ox, y + oy] != 0:
        if steps >= cap:
            return 2, x, y, steps, pos, word, bits
        if bits < 2:
            if pos >= nw:
                return 1, x, y, steps, pos, word, bits
            word = words[pos]
            pos += 1
            bits = 64
        if y == 0:
            r = word & np.uint64(3)
            word >>= np.uint64(2)
            bits -= 2
            if r == 0:
                x += 1
            elif r == 1:
                y += 1
            elif r == 2:
                x -= 1
            else:
                y -= 1
        else:
            r = word & np.uint64(1)
            word >>= np.uint64(1)
            bits -= 1
            if r == 0:
                y += 1
            else:
                y -= 1
        steps += 1
    return 0, x, y, steps, pos, word, bits


def _run_walk(grid, ox, oy, stream: PCG64, cap: int):
    """Walk one particle from the origin until it leaves the marked sites."""
    x = y = 0
    steps = 0
    word, bits = np.uint64(0), 0
    chunk = _FIRST_CHUNK
    words = np.empty(0, dtype=np.uint64)
    pos = 0
    while True:
        status, x, y, steps, pos, word, bits = _walk(
            grid, ox, oy, words, pos, np.uint64(word), bits, x, y, steps, cap
        )
        if status == 0:
            return x, y, steps
        if status == 2:
            raise IdlaError(f"walk exceeded {cap} steps", {"x": x, "y": y, "steps": steps})
        words = stream.random_raw(chunk)
        pos = 0
        chunk = min(chunk * 4, _MAX_CHUNK)


@dataclass(frozen=True)
class IdlaRun:
    n: int
    seed: int
    cluster: Region
    xs: np.ndarray  # arrival order
    ys: np.ndarray
    steps: np.ndarray

    def prefix(self, m: int) -> Region:
        """The cluster ``A_m`` after the first ``m`` particles."""
        return Region.from_keys(pack(self.xs[:m], self.ys[:m]))


class _Grid:
    """Occupancy grid that grows so the walker never leaves it."""

    def __init__(self, half_w: int, half_h: int):
        self.ox, self.oy = half_w, half_h
        self.a = np.zeros((2 * half_w + 1, 2 * half_h + 1), dtype=np.uint8)

    def mark(self, x: int, y: int) -> None:
        self.a[x + self.ox, y + self.oy] = 1
        # keep a ring of two free sites around the cluster
        if abs(x) + 2 > self.ox or abs(y) + 2 > self.oy:
            w = 2 * self.ox if abs(x) + 2 > self.ox else self.ox
            h = 2 * self.oy if abs(y) + 2 > self.oy else self.oy
            b = np.zeros((2 * w + 1, 2 * h + 1), dtype=np.uint8)
            b[w - self.ox : w + self.ox + 1, h - self.oy : h + self.oy + 1] = self.a
            self.a, self.ox, self.oy = b, w, h


def idla_run(n: int, seed: int, *, step_cap: int = STEP_CAP) -> IdlaRun:
    if n < 1:
        raise ValueError("n must be at least 1")
    r = n ** (1.0 / 3.0)
    grid = _Grid(int(K_SHAPE * r * 1.5) + 4, int(L_SHAPE * r * r * 1.5) + 4)
    xs = np.zeros(n, dtype=np.int64)
    ys = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    grid.mark(0, 0)
    for i in range(1, n):
        stream = PCG64(SeedSequence(seed, spawn_key=(i,)))
        try:
            x, y, s = _run_walk(grid.a, grid.ox, grid.oy, stream, step_cap)
        except IdlaError as err:
            err.state.update(particle=i, seed=seed, n=n)
            raise
        grid.mark(x, y)
        xs[i], ys[i], steps[i] = x, y, s
    cluster = Region.from_arrays(xs, ys)
    return IdlaRun(n=n, seed=int(seed), cluster=cluster, xs=xs, ys=ys, steps=steps)


def containment_fraction(run: IdlaRun, eps: float) -> float:
    """Share of ``ball_region(n (1 - eps))`` covered by the cluster."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    ball = ball_region(run.n * (1.0 - eps))
    return float(np.mean(run.cluster.contains_many(ball.xs, ball.ys)))


def critical_eps(run: IdlaRun, grid=None) -> float:
    """Smallest ``eps`` on ``grid`` whose inner ball the cluster contains (1.0 if none)."""
    grid = np.round(np.arange(0.01, 1.0, 0.01), 2) if grid is None else np.sort(np.asarray(grid))
    # containment is monotone in eps, so bisect
    lo, hi = 0, len(grid)
    while lo < hi:
        mid = (lo + hi) // 2
        if containment_fraction(run, float(grid[mid])) == 1.0:
            hi = mid
        else:
            lo = mid + 1
    return float(grid[lo]) if lo < len(grid) else 1.0


def _campaign_record(args) -> dict:
    n, seed, eps = args
    t0 = time.perf_counter()
    run = idla_run(n, seed)
    frac = containment_fraction(run, eps)
    return {
        "n": n,
        "seed": seed,
        "contained": frac == 1.0,
        "fraction": frac,
        "critical_eps": critical_eps(run),
        "wall_ms": round(1000.0 * (time.perf_counter() - t0), 3),
    }


def idla_campaign(n: int, seeds, eps: float, jobs: int = 1) -> list[dict]:
    """One record per seed, sorted by seed; ``jobs > 1`` runs seeds in worker processes."""
    tasks = [(int(n), int(s), float(eps)) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_campaign_record, tasks))
    else:
        records = [_campaign_record(t) for t in tasks]
    for rec in records:
        log.info("idla n=%d seed=%d contained=%s", rec["n"], rec["seed"], rec["contained"])
    return sorted(records, key=lambda r: r["seed"])


# -- expected hitting counts ---------------------------------------------------

@njit(cache=True)
def _hits_before_exit(inside, ox, oy, zx, zy, walks, words, pos, word, bits, done, hits, x, y, seen):
    # Resumable: runs walks number done..walks-1; status 1 means more words are needed.
    nw = words.shape[0]
    while done < walks:
        if x == zx and y == zy:
            seen = True
        if inside[x + ox, y + oy] == 0:
            if seen:
                hits += 1
            done += 1
            x = 0
            y = 0
            seen = False
            continue
        if bits < 2:
            if pos >= nw:
                return 1, pos, word, bits, done, hits, x, y, seen
            word = words[pos]
            pos += 1
            bits = 64
        if y == 0:
            r = word & np.uint64(3)
            word >>= np.uint64(2)
            bits -= 2
            if r == 0:
                x += 1
            elif r == 1:
                y += 1
            elif r == 2:
                x -= 1
            else:
                y -= 1
        else:
            r = word & np.uint64(1)
            word >>= np.uint64(1)
            bits -= 1
            if r == 0:
                y += 1
            else:
                y -= 1
    return 0, pos, word, bits, done, hits, x, y, seen


def _region_grid(region: Region):
    xmin, xmax, ymin, ymax = region.extent()
    ox = max(abs(xmin), abs(xmax)) + 1
    oy = max(abs(ymin), abs(ymax)) + 1
    a = np.zeros((2 * ox + 1, 2 * oy + 1), dtype=np.uint8)
    a[region.xs + ox, region.ys + oy] = 1
    return a, ox, oy


def count_M(n: int, z, stream: PCG64, region: Region | None = None, _grid=None) -> int:
    """One sample of ``M``: how many of ``n`` walks from ``o`` hit ``z`` before leaving the ball."""
    if _grid is None:
        region = ball_region(n) if region is None else region
        _grid = _region_grid(region)
    inside, ox, oy = _grid
    state = (0, np.uint64(0), 0, 0, 0, 0, 0, False)
    words = np.empty(0, dtype=np.uint64)
    chunk = _FIRST_CHUNK
    while True:
        pos, word, bits, done, hits, x, y, seen = state
        status, *rest = _hits_before_exit(
            inside, ox, oy, int(z[0]), int(z[1]), n, words, pos, np.uint64(word), bits, done, hits, x, y, seen
        )
        state = tuple(rest)
        if status == 0:
            return int(state[4])
        words = stream.random_raw(chunk)
        state = (0,) + state[1:]
        chunk = min(chunk * 4, _MAX_CHUNK)


def estimate_M(n: int, z, trials: int, seed: int) -> tuple[float, float]:
    """Monte Carlo mean of ``M`` and its standard error; trial ``j`` uses sub-stream ``j``."""
    ball = ball_region(n)
    z = (int(z[0]), int(z[1]))
    if z not in ball:
        raise ValueError(f"{z} is outside ball_region({n})")
    if trials < 1:
        raise ValueError("need at least one trial")
    grid = _region_grid(ball)
    samples = np.array(
        [count_M(n, z, PCG64(SeedSequence(seed, spawn_key=(j,))), _grid=grid) for j in range(trials)],
        dtype=float,
    )
    se = float(samples.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return float(samples.mean()), se


def expected_M(n: int, z) -> float:
    """``n G_n(o, z) / G_n(z, z)`` from two stopped-Green solves on ``ball_region(n)``."""
    ball = ball_region(n)
    z = (int(z[0]), int(z[1]))
    if z not in ball:
        raise ValueError(f"{z} is outside ball_region({n})")
    return n * stopped_green(ball, ORIGIN)[z] / stopped_green(ball, z)[z]
