"""Merge trees and their branch decompositions.

The tree of one timestep tracks how sublevel-set components appear and
join as vertices are swept in ascending perturbed order (descending for
maximum polarity).  A vertex with no processed neighbor starts a
component and becomes a leaf; a vertex whose processed neighbors span
two or more components becomes a merge saddle joining all of them (a
degenerate multi-way join stays one node); the final vertex closes the
single remaining component as the root.

The branch decomposition pairs every leaf with the saddle where its
component is absorbed into one holding a deeper leaf: at each join the
deepest contributing leaf continues, every other side terminates.  The
root branch pairs the globally deepest leaf with the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .grid import neighbor_table
from .series import ScalarTimeSeries, sos_order, sos_rank

__all__ = [
    "MergeTree",
    "BranchDecomposition",
    "compute_merge_tree",
    "branch_decomposition",
    "subtree_query",
    "KIND_LEAF",
    "KIND_SADDLE",
    "KIND_ROOT",
]

KIND_LEAF = 0
KIND_SADDLE = 1
KIND_ROOT = 2


@njit(cache=True, nogil=True)
def _find(uf, x):
    root = x
    while uf[root] != root:
        root = uf[root]
    while uf[x] != root:
        nxt = uf[x]
        uf[x] = root
        x = nxt
    return root


@njit(cache=True, nogil=True)
def _sweep(order, rank, table):
    """Single ascending sweep with union-find.

    Returns leaf mask, per-vertex merged-component count (>=2 marks a
    saddle) and tree edges as (child vertex, parent vertex) pairs.
    """
    V = order.shape[0]
    uf = np.full(V, -1, dtype=np.int64)  # -1 = not yet processed
    deepest = np.full(V, -1, dtype=np.int64)  # per root: deepest leaf vertex
    latest = np.full(V, -1, dtype=np.int64)  # per root: newest tree node vertex
    is_leaf = np.zeros(V, dtype=np.bool_)
    n_merged = np.zeros(V, dtype=np.int64)
    edge_child = np.empty(V + 1, dtype=np.int64)
    edge_parent = np.empty(V + 1, dtype=np.int64)
    n_edges = 0
    roots = np.empty(6, dtype=np.int64)
    for i in range(V):
        v = order[i]
        k = 0
        for jj in range(table.shape[1]):
            u = table[v, jj]
            if u < 0 or uf[u] < 0:
                continue
            r = _find(uf, u)
            dup = False
            for q in range(k):
                if roots[q] == r:
                    dup = True
                    break
            if not dup:
                roots[k] = r
                k += 1
        if k == 0:
            uf[v] = v
            deepest[v] = v
            latest[v] = v
            is_leaf[v] = True
        elif k == 1:
            uf[v] = roots[0]
        else:
            best = 0
            for q in range(1, k):
                if rank[deepest[roots[q]]] < rank[deepest[roots[best]]]:
                    best = q
            bleaf = deepest[roots[best]]
            for q in range(k):
                edge_child[n_edges] = latest[roots[q]]
                edge_parent[n_edges] = v
                n_edges += 1
            uf[v] = v
            for q in range(k):
                uf[roots[q]] = v
            deepest[v] = bleaf
            latest[v] = v
            n_merged[v] = k
    last = order[V - 1]
    rfinal = _find(uf, last)
    if latest[rfinal] != last:
        edge_child[n_edges] = latest[rfinal]
        edge_parent[n_edges] = last
        n_edges += 1
    return is_leaf, n_merged, edge_child[:n_edges].copy(), edge_parent[:n_edges].copy()


@dataclass
class MergeTree:
    """Nodes are stored ascending by sweep order, so a child always has
    a smaller index than its parent and the root is last."""

    timestep: int
    polarity: str
    vertices: np.ndarray  # (n,) int64 node vertex ids
    kind: np.ndarray  # (n,) uint8, KIND_*
    parent: np.ndarray  # (n,) int32 node index, -1 at the root
    values: np.ndarray  # (n,) float64
    node_rank: np.ndarray  # (n,) int64 sweep rank of each node vertex
    _vertex_to_node: dict = field(default_factory=dict, repr=False)

    @property
    def num_nodes(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def root(self) -> int:
        return self.num_nodes - 1

    def node_of_vertex(self, v: int) -> int:
        if not self._vertex_to_node:
            self._vertex_to_node.update(
                (int(vv), i) for i, vv in enumerate(self.vertices)
            )
        return self._vertex_to_node[int(v)]

    def leaves(self) -> np.ndarray:
        return np.nonzero(self.kind == KIND_LEAF)[0]

    def children(self) -> list[list[int]]:
        out = [[] for _ in range(self.num_nodes)]
        for i, p in enumerate(self.parent):
            if p >= 0:
                out[p].append(i)
        return out

    def to_json(self) -> dict:
        return {
            "timestep": self.timestep,
            "polarity": self.polarity,
            "nodes": [
                {
                    "vertex": int(self.vertices[i]),
                    "kind": ("leaf", "saddle", "root")[self.kind[i]],
                    "parent": int(self.parent[i]),
                    "value": float(self.values[i]),
                }
                for i in range(self.num_nodes)
            ],
        }


def compute_merge_tree(series: ScalarTimeSeries, t: int, polarity: str = "minimum",
                       table: np.ndarray | None = None,
                       rank: np.ndarray | None = None) -> MergeTree:
    if table is None:
        table = neighbor_table(series.topology)
    values = series.values[t]
    if rank is None:
        rank = sos_rank(values, polarity)
    order = np.empty_like(rank)
    order[rank] = np.arange(rank.shape[0], dtype=np.int64)
    is_leaf, n_merged, edge_child, edge_parent = _sweep(order, rank, table)

    root_vertex = order[-1]
    node_mask = is_leaf | (n_merged >= 2)
    node_mask[root_vertex] = True
    node_vertices = np.nonzero(node_mask)[0].astype(np.int64)
    node_ranks = rank[node_vertices]
    by_rank = np.argsort(node_ranks)
    node_vertices = node_vertices[by_rank]
    node_ranks = node_ranks[by_rank]

    n = node_vertices.shape[0]
    idx = {int(v): i for i, v in enumerate(node_vertices)}
    kind = np.empty(n, dtype=np.uint8)
    for i, v in enumerate(node_vertices):
        if v == root_vertex:
            kind[i] = KIND_ROOT
        elif is_leaf[v]:
            kind[i] = KIND_LEAF
        else:
            kind[i] = KIND_SADDLE
    parent = np.full(n, -1, dtype=np.int32)
    for c, p in zip(edge_child, edge_parent):
        parent[idx[int(c)]] = idx[int(p)]
    tree = MergeTree(
        timestep=t,
        polarity=polarity,
        vertices=node_vertices,
        kind=kind,
        parent=parent,
        values=values[node_vertices].astype(np.float64),
        node_rank=node_ranks,
    )
    tree._vertex_to_node = idx
    return tree


@dataclass
class BranchDecomposition:
    """Branches sorted by leaf vertex, aligned with the timestep's
    vertex-sorted extremum list (leaf i of the tree is extremum i)."""

    timestep: int
    polarity: str
    leaf_vertex: np.ndarray  # (b,) int64
    birth: np.ndarray  # (b,) float64 leaf value
    death: np.ndarray  # (b,) float64 terminating node value
    death_vertex: np.ndarray  # (b,) int64
    merge_saddle: np.ndarray  # (b,) int64 saddle vertex, -1 for the root branch
    parent: np.ndarray  # (b,) int32 branch index, -1 for the root branch
    branch_of_extremum: np.ndarray  # (b,) int32, extremum local index -> branch

    @property
    def num_branches(self) -> int:
        return int(self.leaf_vertex.shape[0])

    @property
    def persistence(self) -> np.ndarray:
        return np.abs(self.death - self.birth)

    @property
    def root_branch(self) -> int:
        return int(np.nonzero(self.parent < 0)[0][0])

    def children(self) -> list[list[int]]:
        out = [[] for _ in range(self.num_branches)]
        for i, p in enumerate(self.parent):
            if p >= 0:
                out[p].append(i)
        return out

    def to_json(self) -> dict:
        pers = self.persistence
        return {
            "timestep": self.timestep,
            "polarity": self.polarity,
            "branches": [
                {
                    "leaf_vertex": int(self.leaf_vertex[i]),
                    "birth": float(self.birth[i]),
                    "death": float(self.death[i]),
                    "persistence": float(pers[i]),
                    "merge_saddle": int(self.merge_saddle[i]),
                    "parent": int(self.parent[i]),
                }
                for i in range(self.num_branches)
            ],
        }


def branch_decomposition(tree: MergeTree) -> BranchDecomposition:
    """Pair every leaf with its terminating saddle by the elder rule."""
    n = tree.num_nodes
    children = tree.children()
    deep_leaf = np.full(n, -1, dtype=np.int64)  # node index of deepest leaf below
    for i in range(n):  # ascending order: children come before parents
        if not children[i]:
            deep_leaf[i] = i
        else:
            best = children[i][0]
            for c in children[i][1:]:
                if tree.node_rank[deep_leaf[c]] < tree.node_rank[deep_leaf[best]]:
                    best = c
            deep_leaf[i] = deep_leaf[best]

    recs = []  # (leaf node, death node, parent leaf node or -1)
    for i in range(n):
        for c in children[i]:
            if deep_leaf[c] != deep_leaf[i]:
                recs.append((deep_leaf[c], i, deep_leaf[i]))
    root = tree.root
    recs.append((deep_leaf[root], root, -1))

    recs.sort(key=lambda r: tree.vertices[r[0]])
    leaf_vertex = np.array([tree.vertices[r[0]] for r in recs], dtype=np.int64)
    birth = np.array([tree.values[r[0]] for r in recs], dtype=np.float64)
    death = np.array([tree.values[r[1]] for r in recs], dtype=np.float64)
    death_vertex = np.array([tree.vertices[r[1]] for r in recs], dtype=np.int64)
    merge_saddle = np.array(
        [tree.vertices[r[1]] if r[2] >= 0 else -1 for r in recs], dtype=np.int64
    )
    branch_of_leaf_vertex = {int(v): i for i, v in enumerate(leaf_vertex)}
    parent = np.array(
        [
            branch_of_leaf_vertex[int(tree.vertices[r[2]])] if r[2] >= 0 else -1
            for r in recs
        ],
        dtype=np.int32,
    )
    return BranchDecomposition(
        timestep=tree.timestep,
        polarity=tree.polarity,
        leaf_vertex=leaf_vertex,
        birth=birth,
        death=death,
        death_vertex=death_vertex,
        merge_saddle=merge_saddle,
        parent=parent,
        branch_of_extremum=np.arange(leaf_vertex.shape[0], dtype=np.int32),
    )


def subtree_query(bd: BranchDecomposition, branch_id: int) -> list[int]:
    """All transitive descendant branches of ``branch_id``, ascending."""
    if not 0 <= branch_id < bd.num_branches:
        raise IndexError(f"branch {branch_id} out of range")
    children = bd.children()
    out = []
    stack = list(children[branch_id])
    while stack:
        b = stack.pop()
        out.append(b)
        stack.extend(children[b])
    return sorted(out)
