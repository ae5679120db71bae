"""Geometry of the two-dimensional comb and of the integer line.

Vertices are integer pairs ``(x, y)``. On the comb the backbone is the x-axis
(``y == 0``); every other vertex sits on the tooth hanging off ``(x, 0)``.
On the line graph only ``y == 0`` is meaningful.

Finite vertex sets are :class:`Region` objects. A region keeps its vertices
as a sorted array of packed 64-bit keys (x in the high word, y biased in the
low word), so sorting the keys is the same as sorting ``(x, y)``
lexicographically. Most numeric code in the package works directly on those
arrays.
"""

from __future__ import annotations

import csv
import enum
import io
from collections import deque
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import NamedTuple

import numpy as np

_Y_BIAS = 1 << 31


class Vertex(NamedTuple):
    x: int
    y: int

    @property
    def on_backbone(self) -> bool:
        return self.y == 0


ORIGIN = Vertex(0, 0)


class GraphKind(enum.Enum):
    COMB2 = "comb2"
    LINE = "line"


def neighbors(v: tuple[int, int], kind: GraphKind = GraphKind.COMB2) -> list[Vertex]:
    """Neighbours of ``v`` in the fixed order used for rotor sequences.

    Backbone vertices: East, North, West, South. Tooth vertices: North, South.
    Line vertices: East, West.
    """
    x, y = v
    if kind is GraphKind.LINE:
        return [Vertex(x + 1, 0), Vertex(x - 1, 0)]
    if y == 0:
        return [Vertex(x + 1, 0), Vertex(x, 1), Vertex(x - 1, 0), Vertex(x, -1)]
    return [Vertex(x, y + 1), Vertex(x, y - 1)]


def degree(v: tuple[int, int], kind: GraphKind = GraphKind.COMB2) -> int:
    if kind is GraphKind.LINE:
        return 2
    return 4 if v[1] == 0 else 2


def comb_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    """Graph distance on the comb: same tooth, or down to the backbone and back up."""
    if a[0] == b[0]:
        return abs(a[1] - b[1])
    return abs(a[1]) + abs(a[0] - b[0]) + abs(b[1])


def bfs_distances(
    sources: Iterable[tuple[int, int]],
    max_depth: int,
    kind: GraphKind = GraphKind.COMB2,
) -> dict[Vertex, int]:
    """Multi-source breadth-first search truncated at ``max_depth``."""
    dist: dict[Vertex, int] = {}
    queue: deque[Vertex] = deque()
    for s in sources:
        v = Vertex(int(s[0]), int(s[1]))
        if v not in dist:
            dist[v] = 0
            queue.append(v)
    while queue:
        v = queue.popleft()
        dv = dist[v]
        if dv == max_depth:
            continue
        for w in neighbors(v, kind):
            if w not in dist:
                dist[w] = dv + 1
                queue.append(w)
    return dist


# -- packed coordinates -----------------------------------------------------

def pack(xs, ys) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    return (xs << 32) + (ys + _Y_BIAS)


def unpack(keys) -> tuple[np.ndarray, np.ndarray]:
    keys = np.asarray(keys, dtype=np.int64)
    xs = keys >> 32
    ys = (keys & 0xFFFFFFFF) - _Y_BIAS
    return xs, ys


def neighbor_arrays(xs: np.ndarray, ys: np.ndarray, kind: GraphKind):
    """Yield ``(nx, ny, valid)`` for each neighbour slot (E, N, W, S).

    ``valid`` masks slots that do not exist at a vertex (horizontal moves off
    the backbone, vertical moves on the line).
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if kind is GraphKind.LINE:
        ones = np.ones(xs.shape, dtype=bool)
        return [(xs + 1, ys, ones), (xs - 1, ys, ones)]
    on_bb = ys == 0
    every = np.ones(xs.shape, dtype=bool)
    return [
        (xs + 1, ys, on_bb),
        (xs, ys + 1, every),
        (xs - 1, ys, on_bb),
        (xs, ys - 1, every),
    ]


def degree_array(ys: np.ndarray, kind: GraphKind) -> np.ndarray:
    ys = np.asarray(ys)
    if kind is GraphKind.LINE:
        return np.full(ys.shape, 2.0)
    return np.where(ys == 0, 4.0, 2.0)


class ColumnLayout(NamedTuple):
    """Column-interval description of a region (see :meth:`Region.columns`).

    Column ``j`` is backbone coordinate ``x0 + j``; it covers ``y`` in
    ``[lo[j], hi[j]]`` and occupies ``start[j] : start[j] + hi[j] - lo[j] + 1``
    in the region's sorted arrays.
    """

    x0: int
    lo: np.ndarray
    hi: np.ndarray
    start: np.ndarray


class Region:
    """Immutable finite set of vertices of the comb or of the line."""

    __slots__ = ("_columns", "_keyset", "_xs", "_ys", "keys", "kind")

    def __init__(self, vertices: Iterable[tuple[int, int]] = (), kind: GraphKind = GraphKind.COMB2):
        pts = list(vertices)
        if pts:
            arr = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
            keys = pack(arr[:, 0], arr[:, 1])
        else:
            keys = np.empty(0, dtype=np.int64)
        self._init(np.unique(keys), kind)

    def _init(self, keys: np.ndarray, kind: GraphKind) -> None:
        self.kind = kind
        self.keys = keys
        self.keys.setflags(write=False)
        self._xs, self._ys = unpack(keys)
        if kind is GraphKind.LINE and np.any(self._ys != 0):
            raise ValueError("line regions must have y == 0")
        self._keyset = None
        self._columns = False

    @classmethod
    def from_keys(cls, keys, kind: GraphKind = GraphKind.COMB2, *, assume_sorted: bool = False) -> Region:
        keys = np.asarray(keys, dtype=np.int64)
        if not assume_sorted:
            keys = np.unique(keys)
        obj = cls.__new__(cls)
        obj._init(keys.copy(), kind)
        return obj

    @classmethod
    def from_arrays(cls, xs, ys, kind: GraphKind = GraphKind.COMB2) -> Region:
        return cls.from_keys(pack(xs, ys), kind)

    # -- container protocol --------------------------------------------------
    @property
    def xs(self) -> np.ndarray:
        return self._xs

    @property
    def ys(self) -> np.ndarray:
        return self._ys

    def __len__(self) -> int:
        return int(self.keys.size)

    def __iter__(self) -> Iterator[Vertex]:
        for x, y in zip(self._xs.tolist(), self._ys.tolist()):
            yield Vertex(x, y)

    def _set(self) -> frozenset:
        if self._keyset is None:
            self._keyset = frozenset(self.keys.tolist())
        return self._keyset

    def __contains__(self, v) -> bool:
        x, y = v
        return (int(x) << 32) + (int(y) + _Y_BIAS) in self._set()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return self.kind is other.kind and np.array_equal(self.keys, other.keys)

    def __hash__(self) -> int:
        return hash((self.kind, self.keys.tobytes()))

    def __repr__(self) -> str:
        return f"Region({len(self)} vertices, {self.kind.value})"

    def vertices(self) -> list[Vertex]:
        return list(self)

    # -- vectorised lookups --------------------------------------------------
    def index_of(self, xs, ys) -> np.ndarray:
        """Positions of the given vertices in the sorted arrays, ``-1`` if absent."""
        q = pack(xs, ys)
        if self.keys.size == 0:
            return np.full(q.shape, -1, dtype=np.int64)
        pos = np.minimum(np.searchsorted(self.keys, q), self.keys.size - 1)
        hit = self.keys[pos] == q
        return np.where(hit, pos, -1)

    def contains_many(self, xs, ys) -> np.ndarray:
        return self.index_of(xs, ys) >= 0

    # -- set algebra ---------------------------------------------------------
    def _check(self, other: Region) -> None:
        if self.kind is not other.kind:
            raise ValueError("regions live on different graphs")

    def __or__(self, other: Region) -> Region:
        self._check(other)
        return Region.from_keys(np.union1d(self.keys, other.keys), self.kind, assume_sorted=True)

    def __and__(self, other: Region) -> Region:
        self._check(other)
        return Region.from_keys(np.intersect1d(self.keys, other.keys), self.kind, assume_sorted=True)

    def __sub__(self, other: Region) -> Region:
        self._check(other)
        return Region.from_keys(np.setdiff1d(self.keys, other.keys), self.kind, assume_sorted=True)

    def __xor__(self, other: Region) -> Region:
        self._check(other)
        return Region.from_keys(np.setxor1d(self.keys, other.keys), self.kind, assume_sorted=True)

    def issubset(self, other: Region) -> bool:
        self._check(other)
        return bool(np.all(np.isin(self.keys, other.keys, assume_unique=True)))

    def isdisjoint(self, other: Region) -> bool:
        self._check(other)
        return np.intersect1d(self.keys, other.keys).size == 0

    # -- structure -----------------------------------------------------------
    def degrees(self) -> np.ndarray:
        return degree_array(self._ys, self.kind)

    def boundary(self) -> tuple[Region, Region]:
        """Outer boundary (outside, adjacent) and inner boundary (inside, adjacent to outside)."""
        outer_keys = []
        inner_mask = np.zeros(len(self), dtype=bool)
        for nx, ny, valid in neighbor_arrays(self._xs, self._ys, self.kind):
            inside = self.contains_many(nx, ny)
            out = valid & ~inside
            inner_mask |= out
            outer_keys.append(pack(nx[out], ny[out]))
        outer = Region.from_keys(np.concatenate(outer_keys) if outer_keys else [], self.kind)
        inner = Region.from_keys(self.keys[inner_mask], self.kind, assume_sorted=True)
        return outer, inner

    def columns(self) -> ColumnLayout | None:
        """Column-interval layout, or ``None`` if the region does not have one.

        A region has a layout when its backbone part is a nonempty interval
        ``[x0, x1]``, every column it touches lies in that interval, and each
        column is a contiguous run of ``y`` values through 0. On the comb these
        are exactly the connected regions containing a backbone vertex. Line
        intervals qualify too (every column is the single site ``y == 0``).
        """
        if self._columns is not False:
            return self._columns
        layout = None
        n = len(self)
        if n:
            xs, ys = self._xs, self._ys
            col_x, start, counts = np.unique(xs, return_index=True, return_counts=True)
            lo = ys[start]
            hi = ys[start + counts - 1]
            contiguous_x = np.all(np.diff(col_x) == 1)
            if contiguous_x and np.all(hi - lo + 1 == counts) and np.all(lo <= 0) and np.all(hi >= 0):
                layout = ColumnLayout(int(col_x[0]), lo.astype(np.int64), hi.astype(np.int64), start.astype(np.int64))
        self._columns = layout
        return layout

    def is_connected(self) -> bool:
        if len(self) == 0:
            return True
        start = next(iter(self))
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in neighbors(v, self.kind):
                if w not in seen and w in self:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(self)

    def extent(self) -> tuple[int, int, int, int]:
        """``(xmin, xmax, ymin, ymax)``."""
        if not len(self):
            raise ValueError("empty region")
        return int(self._xs.min()), int(self._xs.max()), int(self._ys.min()), int(self._ys.max())

    def column_height(self, x: int) -> tuple[int, int] | None:
        """Lowest and highest ``y`` present in column ``x``."""
        sel = self._ys[self._xs == x]
        if sel.size == 0:
            return None
        return int(sel.min()), int(sel.max())

    # -- serialisation -------------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("x,y\n")
        for x, y in zip(self._xs.tolist(), self._ys.tolist()):
            buf.write(f"{x},{y}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="\n")
        return text

    @classmethod
    def from_csv(cls, source, kind: GraphKind = GraphKind.COMB2) -> Region:
        """Parse the ``x,y`` CSV format; ``source`` is a path or the CSV text.

        Extra columns (e.g. a ``value`` column from a field dump) are ignored.
        """
        text = Path(source).read_text() if not _looks_like_csv(source) else source
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["x", "y"]:
            raise ValueError("expected header starting with 'x,y'")
        pts = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                pts.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: cannot parse vertex from {row!r}") from exc
        return cls(pts, kind)


def _looks_like_csv(source) -> bool:
    return isinstance(source, str) and "\n" in source


def region_boundary(r: Region) -> tuple[Region, Region]:
    return r.boundary()
