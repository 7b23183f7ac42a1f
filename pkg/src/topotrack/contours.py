"""Closed iso-contours of a gridded field.

The grid is padded with one ring of outside values before tracing, so
every contour closes even when the region touches the domain boundary;
such loops run up to one cell outside the domain. On x-wrapped grids the
pad splits seam-crossing regions into one loop per side.
"""

from __future__ import annotations

import numpy as np

# Per marching-squares case: pairs of cell edges (T, B, L, R) joined by a
# segment. Case bit order is c0(x,y) c1(x+1,y) c2(x+1,y+1) c3(x,y+1),
# bit set = corner inside. Cases 5 and 10 depend on the cell center.
_SEGMENTS: dict[int, tuple[tuple[str, str], ...]] = {
    0: (),
    15: (),
    8: (("T", "L"),),
    7: (("T", "L"),),
    4: (("T", "R"),),
    11: (("T", "R"),),
    2: (("R", "B"),),
    13: (("R", "B"),),
    1: (("B", "L"),),
    14: (("B", "L"),),
    12: (("L", "R"),),
    3: (("L", "R"),),
    6: (("T", "B"),),
    9: (("T", "B"),),
}
_AMBIG_JOINED = (("T", "R"), ("B", "L"))  # center inside: hug outside corners
_AMBIG_SPLIT = (("T", "L"), ("R", "B"))


def _edge_key(kind: str, x: int, y: int) -> tuple[str, int, int]:
    if kind == "T":
        return ("h", x, y)
    if kind == "B":
        return ("h", x, y + 1)
    if kind == "L":
        return ("v", x, y)
    return ("v", x + 1, y)


def marching_squares(grid: np.ndarray, level: float) -> list[np.ndarray]:
    """Trace the boundary of {f <= level} as closed loops.

    Returns a list of (k, 2) float arrays of (x, y) points in grid
    coordinates, each a closed loop (last point connects to first).
    Vertices with f == level count as inside.
    """
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    pad_val = level + 1.0
    g = np.full((h + 2, w + 2), pad_val)
    g[1:-1, 1:-1] = grid
    inside = g <= level

    c0 = inside[:-1, :-1]
    c1 = inside[:-1, 1:]
    c2 = inside[1:, 1:]
    c3 = inside[1:, :-1]
    case = (
        c0.astype(np.int8) * 8
        + c1.astype(np.int8) * 4
        + c2.astype(np.int8) * 2
        + c3.astype(np.int8)
    )
    ys, xs = np.nonzero((case != 0) & (case != 15))

    points: dict[tuple[str, int, int], tuple[float, float]] = {}
    adj: dict[tuple[str, int, int], list[tuple[str, int, int]]] = {}

    def crossing(key: tuple[str, int, int]) -> tuple[float, float]:
        got = points.get(key)
        if got is not None:
            return got
        kind, ex, ey = key
        if kind == "h":
            ax, ay, bx, by = ex, ey, ex + 1, ey
        else:
            ax, ay, bx, by = ex, ey, ex, ey + 1
        fa, fb = g[ay, ax], g[by, bx]
        if inside[ay, ax]:
            t = (level - fa) / (fb - fa)
            pt = (ax + t * (bx - ax), ay + t * (by - ay))
        else:
            t = (level - fb) / (fa - fb)
            pt = (bx + t * (ax - bx), by + t * (ay - by))
        points[key] = pt
        return pt

    for y, x in zip(ys.tolist(), xs.tolist()):
        c = int(case[y, x])
        if c == 10:
            center = (g[y, x] + g[y, x + 1] + g[y + 1, x] + g[y + 1, x + 1]) / 4.0
            segs = _AMBIG_JOINED if center <= level else _AMBIG_SPLIT
        elif c == 5:
            center = (g[y, x] + g[y, x + 1] + g[y + 1, x] + g[y + 1, x + 1]) / 4.0
            segs = _AMBIG_SPLIT if center <= level else _AMBIG_JOINED
        else:
            segs = _SEGMENTS[c]
        for e1, e2 in segs:
            k1 = _edge_key(e1, x, y)
            k2 = _edge_key(e2, x, y)
            crossing(k1)
            crossing(k2)
            adj.setdefault(k1, []).append(k2)
            adj.setdefault(k2, []).append(k1)

    loops: list[np.ndarray] = []
    visited: set[tuple[str, int, int]] = set()
    for start in adj:
        if start in visited:
            continue
        path = [start]
        visited.add(start)
        prev = None
        cur = start
        while True:
            nbrs = adj[cur]
            nxt = nbrs[0] if nbrs[0] != prev else nbrs[1]
            if nxt == start:
                break
            path.append(nxt)
            visited.add(nxt)
            prev, cur = cur, nxt
        # shift out of pad coordinates
        loops.append(np.array([crossing(k) for k in path]) - 1.0)
    return loops


def points_in_loop(px: np.ndarray, py: np.ndarray, loop: np.ndarray) -> np.ndarray:
    """Even-odd ray cast; points on the boundary are implementation-
    defined and must not matter to callers."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    out = np.zeros(px.shape, dtype=bool)
    n = loop.shape[0]
    for i in range(n):
        x1, y1 = loop[i]
        x2, y2 = loop[(i + 1) % n]
        if y1 == y2:
            continue
        straddle = (y1 > py) != (y2 > py)
        xi = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        out ^= straddle & (px < xi)
    return out


def region_loops(
    grid: np.ndarray,
    level: float,
    member_xy: np.ndarray,
    polarity: str = "minimum",
) -> tuple[list[np.ndarray], int]:
    """Contour loops of the threshold region around the given members.

    member_xy is (k, 2) grid coordinates of the feature's extrema. Only
    loops enclosing at least one member are kept. Returns (loops, count
    of members enclosed by none of the kept loops). For maxima the
    region is {f >= level}, handled by negating the field.
    """
    member_xy = np.asarray(member_xy, dtype=np.float64).reshape(-1, 2)
    if polarity == "maximum":
        loops = marching_squares(-np.asarray(grid, dtype=np.float64), -level)
    else:
        loops = marching_squares(grid, level)
    px, py = member_xy[:, 0], member_xy[:, 1]
    covered = np.zeros(member_xy.shape[0], dtype=bool)
    kept = []
    for loop in loops:
        hit = points_in_loop(px, py, loop)
        if hit.any():
            kept.append(loop)
            covered |= hit
    return kept, int((~covered).sum())
