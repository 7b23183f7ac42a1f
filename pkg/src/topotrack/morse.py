"""Extrema and their gradient manifolds on one timestep.

A vertex is an extremum when it precedes (minimum) or is preceded by
(maximum) every neighbor under the perturbed total order.  Each
non-extremal vertex has a unique steepest path: repeatedly step to the
order-wise deepest neighbor until a fixed point is reached.  Labeling
every vertex with the extremum its path reaches partitions the grid
into descending manifolds of minima (or ascending manifolds of maxima).

Both polarities run the same code against a polarity-specific rank
array, so maxima behave exactly like minima under the reversed order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridTopology, neighbor_table
from .series import ScalarTimeSeries, sos_rank

__all__ = [
    "CriticalPoint",
    "ManifoldLabeling",
    "extract_extrema",
    "extrema_vertices",
    "segment_manifolds",
    "steepest_next",
]


@dataclass
class CriticalPoint:
    """One extremum of one timestep.  Persistence is filled in later
    by the merge-tree stage."""

    vertex: int
    timestep: int
    value: float
    polarity: str
    persistence: float | None = None


@dataclass
class ManifoldLabeling:
    """Complete partition of one timestep's vertices by extremum.

    ``label[v]`` is the index of the owning extremum within the
    timestep's vertex-sorted extremum list.
    """

    timestep: int
    polarity: str
    label: np.ndarray  # (V,) int32
    extremum_vertices: np.ndarray  # (k,) int64, ascending

    @property
    def num_regions(self) -> int:
        return int(self.extremum_vertices.shape[0])


def _neighbor_ranks(rank: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Rank of each neighbor, padded entries pushed past every real rank."""
    big = rank.shape[0]
    nr = np.where(table >= 0, rank[np.where(table >= 0, table, 0)], big)
    return nr


def extrema_vertices(rank: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Vertices whose rank is below every neighbor's, ascending ids."""
    nr = _neighbor_ranks(rank, table)
    mask = rank < nr.min(axis=1)
    return np.nonzero(mask)[0].astype(np.int64)


def extract_extrema(series: ScalarTimeSeries, t: int, polarity: str = "minimum",
                    table: np.ndarray | None = None) -> list[CriticalPoint]:
    """All extrema of timestep ``t``, sorted by vertex id."""
    if table is None:
        table = neighbor_table(series.topology)
    rank = sos_rank(series.values[t], polarity)
    verts = extrema_vertices(rank, table)
    return [
        CriticalPoint(int(v), t, float(series.values[t, v]), polarity)
        for v in verts
    ]


def steepest_next(rank: np.ndarray, table: np.ndarray) -> np.ndarray:
    """One steepest step per vertex; extrema map to themselves."""
    nr = _neighbor_ranks(rank, table)
    j = np.argmin(nr, axis=1)
    rows = np.arange(rank.shape[0])
    best_rank = nr[rows, j]
    best_vertex = table[rows, j]
    return np.where(best_rank < rank, best_vertex, rows).astype(np.int64)


def segment_manifolds(series: ScalarTimeSeries, t: int, polarity: str = "minimum",
                      table: np.ndarray | None = None,
                      rank: np.ndarray | None = None) -> ManifoldLabeling:
    """Label every vertex of timestep ``t`` with its owning extremum.

    Paths are resolved by pointer doubling over the one-step array, so
    the cost is a handful of vectorized gathers even for long chains.
    """
    if table is None:
        table = neighbor_table(series.topology)
    if rank is None:
        rank = sos_rank(series.values[t], polarity)
    nxt = steepest_next(rank, table)
    while True:
        hop = nxt[nxt]
        if np.array_equal(hop, nxt):
            break
        nxt = hop
    verts = np.nonzero(nxt == np.arange(nxt.shape[0]))[0].astype(np.int64)
    label = np.searchsorted(verts, nxt).astype(np.int32)
    return ManifoldLabeling(t, polarity, label, verts)


def relabel_simplified(labeling: ManifoldLabeling, keep: np.ndarray,
                       parent_leaf_vertex: np.ndarray) -> ManifoldLabeling:
    """Merge regions of discarded extrema into their branch parents.

    ``keep`` is a boolean mask over the labeling's extrema and
    ``parent_leaf_vertex[i]`` names the leaf vertex of extremum ``i``'s
    parent branch (-1 for the root branch, which is always kept).  Each
    discarded region is relabeled to its nearest kept ancestor.
    """
    verts = labeling.extremum_vertices
    k = verts.shape[0]
    idx_of_vertex = {int(v): i for i, v in enumerate(verts)}
    target = np.arange(k, dtype=np.int64)
    for i in range(k):
        j = i
        while not keep[j]:
            pv = parent_leaf_vertex[j]
            if pv < 0:
                raise ValueError("root branch cannot be simplified away")
            j = idx_of_vertex[int(pv)]
        target[i] = j
    kept_verts = verts[keep]
    new_index = np.full(k, -1, dtype=np.int64)
    new_index[keep] = np.arange(kept_verts.shape[0])
    label = new_index[target[labeling.label]].astype(np.int32)
    return ManifoldLabeling(labeling.timestep, labeling.polarity, label, kept_verts)
