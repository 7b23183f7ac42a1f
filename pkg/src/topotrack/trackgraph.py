"""Complete extremum tracking graph over all timesteps.

Every extremum of timestep ``t`` owns a manifold region; looking up the
extremum's vertex in the segmentation of ``t + 1`` yields exactly one
successor (the forward map), and symmetrically in ``t - 1`` for the
backward map.  Laying both edge sets over the per-timestep extremum
lists gives a graph that downstream feature tracking only ever reads.

Edges and nodes carry named float properties; a filter is a conjunction
of property ranges, spatial boxes and a time window, evaluated lazily
against the fully materialized graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import FilterError, SeedFilteredError
from .grid import GeoAxes, GridTopology, neighbor_table, point_distance, vertex_coords
from .mergetree import BranchDecomposition, branch_decomposition, compute_merge_tree
from .morse import ManifoldLabeling, relabel_simplified, segment_manifolds
from .series import ScalarTimeSeries, sos_rank

__all__ = [
    "TrackingGraph",
    "FilterSpec",
    "FilteredView",
    "Box",
    "PropRange",
    "build_tracking_graph",
    "forward_map",
    "backward_map",
    "filter_graph",
    "query_component",
    "QueryResult",
]


def forward_map(labelings: Sequence[ManifoldLabeling], t: int) -> np.ndarray:
    """Pairs ``(i, j)``: extremum ``i`` of ``t`` to its successor at ``t + 1``."""
    if t + 1 >= len(labelings):
        raise IndexError(f"no successor timestep for t={t}")
    src = labelings[t].extremum_vertices
    j = labelings[t + 1].label[src]
    return np.stack([np.arange(src.shape[0], dtype=np.int64), j.astype(np.int64)], axis=1)


def backward_map(labelings: Sequence[ManifoldLabeling], t: int) -> np.ndarray:
    """Pairs ``(i, j)``: extremum ``i`` of ``t`` to its predecessor at ``t - 1``."""
    if t == 0:
        raise IndexError("no predecessor timestep for t=0")
    src = labelings[t].extremum_vertices
    j = labelings[t - 1].label[src]
    return np.stack([np.arange(src.shape[0], dtype=np.int64), j.astype(np.int64)], axis=1)


@dataclass
class TrackingGraph:
    """Extremum nodes for every timestep plus forward/backward edges."""

    topology: GridTopology
    polarity: str
    num_timesteps: int
    geo: GeoAxes | None
    offsets: np.ndarray  # (T+1,) int64, node id range per timestep
    node_vertex: np.ndarray  # (N,) int64
    node_props: dict  # name -> (N,) float64
    fm_src: np.ndarray  # (M,) int64 global node ids
    fm_dst: np.ndarray
    fm_props: dict  # name -> (M,) float64
    bm_src: np.ndarray
    bm_dst: np.ndarray
    bm_props: dict

    @property
    def num_nodes(self) -> int:
        return int(self.node_vertex.shape[0])

    def node_id(self, t: int, local: int) -> int:
        return int(self.offsets[t] + local)

    def node_timestep(self, node: int) -> int:
        return int(np.searchsorted(self.offsets, node, side="right") - 1)

    def node_local(self, node: int) -> int:
        return node - int(self.offsets[self.node_timestep(node)])

    def timestep_slice(self, t: int) -> slice:
        return slice(int(self.offsets[t]), int(self.offsets[t + 1]))

    def fm_successor_local(self, t: int) -> np.ndarray:
        """Successor local index at ``t + 1`` for each extremum of ``t``."""
        sl = self.timestep_slice(t)
        mask = (self.fm_src >= sl.start) & (self.fm_src < sl.stop)
        out = np.full(sl.stop - sl.start, -1, dtype=np.int64)
        out[self.fm_src[mask] - sl.start] = self.fm_dst[mask] - self.offsets[t + 1]
        return out

    def bm_predecessor_local(self, t: int) -> np.ndarray:
        sl = self.timestep_slice(t)
        mask = (self.bm_src >= sl.start) & (self.bm_src < sl.stop)
        out = np.full(sl.stop - sl.start, -1, dtype=np.int64)
        out[self.bm_src[mask] - sl.start] = self.bm_dst[mask] - self.offsets[t - 1]
        return out

    def filter(self, spec: "FilterSpec") -> "FilteredView":
        return filter_graph(self, spec)


def _timestep_parts(series, t, polarity, table):
    rank = sos_rank(series.values[t], polarity)
    labeling = segment_manifolds(series, t, polarity, table=table, rank=rank)
    tree = compute_merge_tree(series, t, polarity, table=table, rank=rank)
    bd = branch_decomposition(tree)
    return labeling, bd


def build_tracking_graph(
    series: ScalarTimeSeries,
    polarity: str = "minimum",
    min_persistence: float = 0.0,
    parts: Sequence[tuple[ManifoldLabeling, BranchDecomposition]] | None = None,
    table: np.ndarray | None = None,
) -> TrackingGraph:
    """Materialize nodes, both edge sets and default properties.

    ``min_persistence`` > 0 drops extrema below the threshold before the
    graph is built; their manifold regions are merged into the region of
    the branch parent so both maps stay total over surviving extrema.
    """
    T = series.num_timesteps
    if table is None:
        table = neighbor_table(series.topology)
    if parts is None:
        parts = [_timestep_parts(series, t, polarity, table) for t in range(T)]

    labelings = []
    pers_per_t = []
    for labeling, bd in parts:
        pers = bd.persistence
        if min_persistence > 0.0:
            keep = pers >= min_persistence
            keep[bd.root_branch] = True
            if not keep.all():
                parent_leaf = np.where(
                    bd.parent >= 0, bd.leaf_vertex[bd.parent], -1
                )
                labeling = relabel_simplified(labeling, keep, parent_leaf)
                pers = pers[keep]
        labelings.append(labeling)
        pers_per_t.append(pers)

    offsets = np.zeros(T + 1, dtype=np.int64)
    for t in range(T):
        offsets[t + 1] = offsets[t] + labelings[t].num_regions
    node_vertex = np.concatenate([lab.extremum_vertices for lab in labelings])
    node_t = np.concatenate(
        [np.full(lab.num_regions, t, dtype=np.int64) for t, lab in enumerate(labelings)]
    )
    persistence = np.concatenate(pers_per_t)
    values = np.concatenate(
        [series.values[t][lab.extremum_vertices] for t, lab in enumerate(labelings)]
    )
    x, y = vertex_coords(series.topology, node_vertex)
    node_props = {
        "timestep": node_t.astype(np.float64),
        "value": values.astype(np.float64),
        "persistence": persistence.astype(np.float64),
        "x": x,
        "y": y,
    }
    if series.geo is not None:
        node_props["lon"] = series.geo.lon(x)
        node_props["lat"] = series.geo.lat(y)

    fm_src_parts, fm_dst_parts = [], []
    for t in range(T - 1):
        pairs = forward_map(labelings, t)
        fm_src_parts.append(offsets[t] + pairs[:, 0])
        fm_dst_parts.append(offsets[t + 1] + pairs[:, 1])
    bm_src_parts, bm_dst_parts = [], []
    for t in range(1, T):
        pairs = backward_map(labelings, t)
        bm_src_parts.append(offsets[t] + pairs[:, 0])
        bm_dst_parts.append(offsets[t - 1] + pairs[:, 1])

    def _cat(parts_list):
        if not parts_list:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(parts_list).astype(np.int64)

    fm_src, fm_dst = _cat(fm_src_parts), _cat(fm_dst_parts)
    bm_src, bm_dst = _cat(bm_src_parts), _cat(bm_dst_parts)

    def _edge_props(src, dst):
        length = point_distance(
            series.topology, x[src], y[src], x[dst], y[dst], series.geo
        )
        return {
            "length": np.asarray(length, dtype=np.float64).reshape(src.shape),
            "abs_dvalue": np.abs(values[dst] - values[src]),
            "d_persistence": persistence[dst] - persistence[src],
        }

    return TrackingGraph(
        topology=series.topology,
        polarity=polarity,
        num_timesteps=T,
        geo=series.geo,
        offsets=offsets,
        node_vertex=node_vertex,
        node_props=node_props,
        fm_src=fm_src,
        fm_dst=fm_dst,
        fm_props=_edge_props(fm_src, fm_dst),
        bm_src=bm_src,
        bm_dst=bm_dst,
        bm_props=_edge_props(bm_src, bm_dst),
    )


# ---------------------------------------------------------------------------
# filtering

@dataclass(frozen=True)
class Box:
    """Closed spatial box; ``x0 > x1`` wraps across the cyclic seam."""

    x0: float
    x1: float
    y0: float
    y1: float

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.x0 <= self.x1:
            in_x = (x >= self.x0) & (x <= self.x1)
        else:
            in_x = (x >= self.x0) | (x <= self.x1)
        return in_x & (y >= min(self.y0, self.y1)) & (y <= max(self.y0, self.y1))

    def to_dict(self) -> dict:
        return {"x0": self.x0, "x1": self.x1, "y0": self.y0, "y1": self.y1}


@dataclass(frozen=True)
class PropRange:
    """Inclusive range predicate over one named property."""

    prop: str
    min: float | None = None
    max: float | None = None

    def mask(self, values: np.ndarray) -> np.ndarray:
        m = np.ones(values.shape[0], dtype=bool)
        if self.min is not None:
            m &= values >= self.min
        if self.max is not None:
            m &= values <= self.max
        return m

    def to_dict(self) -> dict:
        d = {"prop": self.prop}
        if self.min is not None:
            d["min"] = self.min
        if self.max is not None:
            d["max"] = self.max
        return d


@dataclass(frozen=True)
class FilterSpec:
    """Conjunction of predicates; within one box group, boxes union."""

    t0: int | None = None
    t1: int | None = None
    box_groups: tuple[tuple[Box, ...], ...] = ()
    node_ranges: tuple[PropRange, ...] = ()
    edge_ranges: tuple[PropRange, ...] = ()

    @classmethod
    def from_json(cls, obj: dict | str) -> "FilterSpec":
        if isinstance(obj, str):
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError as e:
                raise FilterError(f"filter is not valid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise FilterError("filter must be a JSON object")
        known = {"t0", "t1", "boxes", "boxes_and", "node", "edge"}
        unknown = set(obj) - known
        if unknown:
            raise FilterError(f"unknown filter fields: {sorted(unknown)}")

        def _box(b) -> Box:
            try:
                return Box(float(b["x0"]), float(b["x1"]), float(b["y0"]), float(b["y1"]))
            except (KeyError, TypeError, ValueError) as e:
                raise FilterError(f"bad box {b!r}: {e}") from e

        def _range(r) -> PropRange:
            try:
                return PropRange(str(r["prop"]), r.get("min"), r.get("max"))
            except (KeyError, TypeError, AttributeError) as e:
                raise FilterError(f"bad range {r!r}: {e}") from e

        groups: list[tuple[Box, ...]] = []
        if obj.get("boxes"):
            groups.append(tuple(_box(b) for b in obj["boxes"]))
        for extra in obj.get("boxes_and", []):
            groups.append(tuple(_box(b) for b in extra))
        return cls(
            t0=obj.get("t0"),
            t1=obj.get("t1"),
            box_groups=tuple(groups),
            node_ranges=tuple(_range(r) for r in obj.get("node", [])),
            edge_ranges=tuple(_range(r) for r in obj.get("edge", [])),
        )

    def to_json(self) -> dict:
        out: dict = {}
        if self.t0 is not None:
            out["t0"] = self.t0
        if self.t1 is not None:
            out["t1"] = self.t1
        if self.box_groups:
            out["boxes"] = [b.to_dict() for b in self.box_groups[0]]
            for extra in self.box_groups[1:]:
                out.setdefault("boxes_and", []).append([b.to_dict() for b in extra])
        if self.node_ranges:
            out["node"] = [r.to_dict() for r in self.node_ranges]
        if self.edge_ranges:
            out["edge"] = [r.to_dict() for r in self.edge_ranges]
        return out

    def compose(self, other: "FilterSpec") -> "FilterSpec":
        """Conjunction of two specs: a node passes iff it passes both."""

        def _tmax(a, b):
            return b if a is None else (a if b is None else max(a, b))

        def _tmin(a, b):
            return b if a is None else (a if b is None else min(a, b))

        return FilterSpec(
            t0=_tmax(self.t0, other.t0),
            t1=_tmin(self.t1, other.t1),
            box_groups=self.box_groups + other.box_groups,
            node_ranges=self.node_ranges + other.node_ranges,
            edge_ranges=self.edge_ranges + other.edge_ranges,
        )


@dataclass
class FilteredView:
    """Lazily evaluated filter application; masks are cached."""

    graph: TrackingGraph
    spec: FilterSpec
    _node_mask: np.ndarray | None = field(default=None, repr=False)
    _fm_mask: np.ndarray | None = field(default=None, repr=False)
    _bm_mask: np.ndarray | None = field(default=None, repr=False)

    @property
    def node_mask(self) -> np.ndarray:
        if self._node_mask is None:
            g, spec = self.graph, self.spec
            m = np.ones(g.num_nodes, dtype=bool)
            ts = g.node_props["timestep"]
            if spec.t0 is not None:
                m &= ts >= spec.t0
            if spec.t1 is not None:
                m &= ts <= spec.t1
            if spec.box_groups:
                if g.geo is not None:
                    bx, by = g.node_props["lon"], g.node_props["lat"]
                else:
                    bx, by = g.node_props["x"], g.node_props["y"]
                for group in spec.box_groups:
                    gm = np.zeros(g.num_nodes, dtype=bool)
                    for box in group:
                        gm |= box.contains(bx, by)
                    m &= gm
            for r in spec.node_ranges:
                if r.prop not in g.node_props:
                    raise FilterError(
                        f"unknown node property {r.prop!r}; "
                        f"known: {sorted(g.node_props)}"
                    )
                m &= r.mask(g.node_props[r.prop])
            self._node_mask = m
        return self._node_mask

    def _edge_mask(self, src, dst, props, ranges) -> np.ndarray:
        nm = self.node_mask
        m = nm[src] & nm[dst]
        for r in ranges:
            if r.prop not in props:
                raise FilterError(
                    f"unknown edge property {r.prop!r}; known: {sorted(props)}"
                )
            m &= r.mask(props[r.prop])
        return m

    @property
    def fm_mask(self) -> np.ndarray:
        if self._fm_mask is None:
            g = self.graph
            self._fm_mask = self._edge_mask(
                g.fm_src, g.fm_dst, g.fm_props, self.spec.edge_ranges
            )
        return self._fm_mask

    @property
    def bm_mask(self) -> np.ndarray:
        if self._bm_mask is None:
            g = self.graph
            self._bm_mask = self._edge_mask(
                g.bm_src, g.bm_dst, g.bm_props, self.spec.edge_ranges
            )
        return self._bm_mask

    def node_ids(self) -> np.ndarray:
        return np.nonzero(self.node_mask)[0].astype(np.int64)


def filter_graph(graph: TrackingGraph, spec: FilterSpec) -> FilteredView:
    view = FilteredView(graph, spec)
    view.node_mask  # validate property names eagerly
    view.fm_mask
    view.bm_mask
    return view


@dataclass
class QueryResult:
    """Connected component of surviving edges around the seed nodes."""

    node_ids: np.ndarray  # sorted by (timestep, local index) == by id
    fm_edge_idx: np.ndarray  # indices into graph.fm_src
    bm_edge_idx: np.ndarray


def query_component(view: FilteredView, seeds: Sequence[int]) -> QueryResult:
    """Reachable subgraph through surviving forward+backward edges."""
    g = view.graph
    nm = view.node_mask
    seeds = [int(s) for s in seeds]
    bad = [s for s in seeds if not (0 <= s < g.num_nodes) or not nm[s]]
    if bad:
        raise SeedFilteredError(bad)

    adj: dict[int, list[int]] = {}
    fm_idx = np.nonzero(view.fm_mask)[0]
    bm_idx = np.nonzero(view.bm_mask)[0]
    for i in fm_idx:
        a, b = int(g.fm_src[i]), int(g.fm_dst[i])
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for i in bm_idx:
        a, b = int(g.bm_src[i]), int(g.bm_dst[i])
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    seen = set(seeds)
    stack = list(seeds)
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    nodes = np.array(sorted(seen), dtype=np.int64)
    node_set = seen
    kept_fm = np.array(
        [i for i in fm_idx if int(g.fm_src[i]) in node_set and int(g.fm_dst[i]) in node_set],
        dtype=np.int64,
    )
    kept_bm = np.array(
        [i for i in bm_idx if int(g.bm_src[i]) in node_set and int(g.bm_dst[i]) in node_set],
        dtype=np.int64,
    )
    return QueryResult(nodes, kept_fm, kept_bm)
