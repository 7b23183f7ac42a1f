"""Triangulated regular grid topology.

Vertices of a ``width x height`` grid are numbered row-major
(``v = y * width + x``).  Every quad cell is split along the diagonal
from ``(x, y)`` to ``(x + 1, y + 1)``, so an interior vertex sees up to
six neighbors: the four axis neighbors plus the two diagonal neighbors
along that diagonal.  An optional horizontal wrap joins column
``width - 1`` back to column 0 for cyclic (longitude-like) domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridTopology",
    "GeoAxes",
    "NEIGHBOR_OFFSETS",
    "neighbor_table",
    "vertex_neighbors",
    "vertex_coords",
    "point_distance",
]

# (dx, dy) offsets of the triangulated 6-neighborhood.
NEIGHBOR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1))


@dataclass(frozen=True)
class GridTopology:
    """Shape and connectivity metadata of one scalar grid."""

    width: int
    height: int
    wrap_x: bool = False
    wrap_y: bool = False

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError(
                f"grid must be at least 2x2, got {self.width}x{self.height}"
            )

    @property
    def num_vertices(self) -> int:
        return self.width * self.height

    def vertex_id(self, x: int, y: int) -> int:
        return y * self.width + x

    def vertex_xy(self, v: int) -> tuple[int, int]:
        return v % self.width, v // self.width


@dataclass(frozen=True)
class GeoAxes:
    """Linear mapping from grid indices to geographic coordinates.

    ``lon = lon0 + x * dlon`` and ``lat = lat0 + y * dlat``, degrees.
    """

    lon0: float
    dlon: float
    lat0: float
    dlat: float

    def lon(self, x):
        return self.lon0 + np.asarray(x, dtype=np.float64) * self.dlon

    def lat(self, y):
        return self.lat0 + np.asarray(y, dtype=np.float64) * self.dlat

    def to_dict(self) -> dict:
        return {"lon0": self.lon0, "dlon": self.dlon, "lat0": self.lat0, "dlat": self.dlat}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoAxes":
        return cls(float(d["lon0"]), float(d["dlon"]), float(d["lat0"]), float(d["dlat"]))


def neighbor_table(topo: GridTopology) -> np.ndarray:
    """Per-vertex neighbor ids as an ``(V, 6)`` int64 array, -1 padded.

    Duplicate entries (possible when a wrapped axis has extent 2) are
    collapsed to -1 so every valid id appears at most once per row.
    """
    w, h = topo.width, topo.height
    xs = np.arange(w)
    ys = np.arange(h)
    gx, gy = np.meshgrid(xs, ys)  # (h, w)
    cols = []
    for dx, dy in NEIGHBOR_OFFSETS:
        nx = gx + dx
        ny = gy + dy
        valid = np.ones_like(nx, dtype=bool)
        if topo.wrap_x:
            nx = nx % w
        else:
            valid &= (nx >= 0) & (nx < w)
        if topo.wrap_y:
            ny = ny % h
        else:
            valid &= (ny >= 0) & (ny < h)
        ids = np.where(valid, ny * w + nx, -1)
        cols.append(ids.ravel())
    table = np.stack(cols, axis=1).astype(np.int64)
    # collapse duplicates produced by wrapping across an extent-2 axis
    if (topo.wrap_x and w == 2) or (topo.wrap_y and h == 2):
        for row in table:
            seen = set()
            for j, u in enumerate(row):
                if u < 0:
                    continue
                if u in seen:
                    row[j] = -1
                else:
                    seen.add(u)
    return table


def vertex_neighbors(topo: GridTopology, v: int, table: np.ndarray | None = None) -> list[int]:
    """Sorted, duplicate-free neighbor ids of one vertex."""
    if not 0 <= v < topo.num_vertices:
        raise IndexError(f"vertex {v} out of range for {topo.width}x{topo.height} grid")
    if table is None:
        table = neighbor_table(topo)
    row = table[v]
    return sorted(int(u) for u in row if u >= 0)


def vertex_coords(topo: GridTopology, vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Grid-space (x, y) coordinates of the given vertex ids."""
    v = np.asarray(vertices, dtype=np.int64)
    return (v % topo.width).astype(np.float64), (v // topo.width).astype(np.float64)


_EARTH_RADIUS_KM = 6371.0


def point_distance(
    topo: GridTopology,
    x1, y1, x2, y2,
    geo: GeoAxes | None = None,
) -> np.ndarray:
    """Distance between grid-space points.

    Great-circle kilometers when geographic axes are declared, otherwise
    Euclidean in grid units (shortest image across a wrapped axis).
    """
    x1 = np.asarray(x1, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if geo is not None:
        lam1, phi1 = np.radians(geo.lon(x1)), np.radians(geo.lat(y1))
        lam2, phi2 = np.radians(geo.lon(x2)), np.radians(geo.lat(y2))
        dphi = phi2 - phi1
        dlam = lam2 - lam1
        a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
        return 2.0 * _EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    dx = np.abs(x1 - x2)
    if topo.wrap_x:
        dx = np.minimum(dx, topo.width - dx)
    dy = np.abs(y1 - y2)
    if topo.wrap_y:
        dy = np.minimum(dy, topo.height - dy)
    return np.hypot(dx, dy)
