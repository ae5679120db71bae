"""Real-valued fields on finite regions: mass, odometers, potentials."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .lattice import GraphKind, Region, Vertex, degree_array, neighbor_arrays


class LatticeField:
    """Values on a :class:`Region`, aligned with its sorted vertex order; zero elsewhere."""

    __slots__ = ("region", "values")

    def __init__(self, region: Region, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(region),):
            raise ValueError(f"expected {len(region)} values, got shape {values.shape}")
        self.region = region
        self.values = values
        self.values.setflags(write=False)

    @property
    def kind(self) -> GraphKind:
        return self.region.kind

    def __len__(self) -> int:
        return len(self.region)

    def __getitem__(self, v) -> float:
        idx = self.region.index_of([v[0]], [v[1]])[0]
        return float(self.values[idx]) if idx >= 0 else 0.0

    def at(self, xs, ys) -> np.ndarray:
        """Vectorised lookup, zero off the region."""
        idx = self.region.index_of(xs, ys)
        out = np.zeros(idx.shape)
        hit = idx >= 0
        out[hit] = self.values[idx[hit]]
        return out

    def items(self):
        for v, val in zip(self.region, self.values.tolist()):
            yield v, val

    def as_dict(self) -> dict[Vertex, float]:
        return dict(self.items())

    def total(self) -> float:
        return float(np.sum(self.values))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self) else 0.0

    def laplacian(self, region: Region | None = None) -> np.ndarray:
        """Normalised Laplacian ``(1/d) sum_{w~z} (f(w) - f(z))`` at the vertices of ``region``."""
        region = self.region if region is None else region
        xs, ys = region.xs, region.ys
        here = self.at(xs, ys)
        acc = np.zeros(len(region))
        for nx, ny, valid in neighbor_arrays(xs, ys, region.kind):
            acc += np.where(valid, self.at(nx, ny) - here, 0.0)
        return acc / degree_array(ys, region.kind)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("x,y,value\n")
        for x, y, val in zip(self.region.xs.tolist(), self.region.ys.tolist(), self.values.tolist()):
            buf.write(f"{x},{y},{val:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="\n")
        return text

    @classmethod
    def from_csv(cls, source, kind: GraphKind = GraphKind.COMB2) -> LatticeField:
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        xs = rows[:, 0].astype(np.int64)
        ys = rows[:, 1].astype(np.int64)
        region = Region.from_arrays(xs, ys, kind)
        order = region.index_of(xs, ys)
        vals = np.zeros(len(region))
        vals[order] = rows[:, 2]
        return cls(region, vals)

    def restrict(self, region: Region) -> LatticeField:
        return LatticeField(region, self.at(region.xs, region.ys))

    def __repr__(self) -> str:
        return f"LatticeField({len(self)} vertices, {self.kind.value})"


class OdometerField:
    """Emitted mass ``v`` and normalised odometer ``u = v / degree`` on a common support."""

    __slots__ = ("region", "u", "v")

    def __init__(self, region: Region, v):
        v = np.asarray(v, dtype=float)
        self.region = region
        self.v = LatticeField(region, v)
        self.u = LatticeField(region, v / region.degrees())

    @classmethod
    def from_normalized(cls, region: Region, u) -> OdometerField:
        return cls(region, np.asarray(u, dtype=float) * region.degrees())

    def __repr__(self) -> str:
        return f"OdometerField({len(self.region)} vertices)"
