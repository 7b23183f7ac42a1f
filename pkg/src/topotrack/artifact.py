"""Precomputed artifact: one directory holding everything the
interactive phase needs.

Layout: field.bin (the series itself), labels_<pol>.bin,
trees_<pol>.bin, graph_<pol>.bin per precomputed polarity, and
manifest.json written last so a crashed run never looks complete.
The manifest carries sha256 checksums of every data file; opening
verifies them and refuses version mismatches.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ArtifactChecksumError,
    ArtifactError,
    ArtifactVersionError,
)
from .features import DescriptorSpec, evaluate_descriptor
from .grid import GeoAxes, GridTopology
from .mergetree import BranchDecomposition, MergeTree, branch_decomposition, compute_merge_tree
from .morse import ManifoldLabeling, segment_manifolds
from .series import ScalarTimeSeries, load_series, save_raw_f64
from .trackgraph import (
    FilterSpec,
    TrackingGraph,
    build_tracking_graph,
    filter_graph,
    query_component,
)
from .tracking import MatchWeights, TrackingResult, track_features

__all__ = ["write_artifact", "ArtifactStore", "ARTIFACT_VERSION"]

ARTIFACT_VERSION = 1
_LABELS_MAGIC = b"TTLB"
_TREES_MAGIC = b"TTMT"
_GRAPH_MAGIC = b"TTGR"

log = logging.getLogger("topotrack")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_arr(fh, arr: np.ndarray, dtype) -> None:
    fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def _read_arr(fh, count: int, dtype) -> np.ndarray:
    dt = np.dtype(dtype)
    buf = fh.read(count * dt.itemsize)
    if len(buf) != count * dt.itemsize:
        raise ArtifactError("truncated artifact file")
    return np.frombuffer(buf, dtype=dt).copy()


def _write_labels(path: Path, labelings: list[ManifoldLabeling], V: int) -> None:
    with open(path, "wb") as fh:
        fh.write(_LABELS_MAGIC)
        fh.write(struct.pack("<III", ARTIFACT_VERSION, len(labelings), V))
        for lab in labelings:
            fh.write(struct.pack("<I", lab.num_regions))
            _write_arr(fh, lab.extremum_vertices, "<i8")
            _write_arr(fh, lab.label, "<i4")


def _read_labels(path: Path, polarity: str) -> list[ManifoldLabeling]:
    with open(path, "rb") as fh:
        if fh.read(4) != _LABELS_MAGIC:
            raise ArtifactError(f"{path.name}: bad magic")
        ver, T, V = struct.unpack("<III", fh.read(12))
        if ver != ARTIFACT_VERSION:
            raise ArtifactVersionError(f"{path.name}: version {ver}")
        out = []
        for t in range(T):
            (k,) = struct.unpack("<I", fh.read(4))
            ev = _read_arr(fh, k, "<i8")
            lab = _read_arr(fh, V, "<i4")
            out.append(ManifoldLabeling(t, polarity, lab, ev))
        return out


def _write_trees(
    path: Path, trees: list[MergeTree], bds: list[BranchDecomposition]
) -> None:
    with open(path, "wb") as fh:
        fh.write(_TREES_MAGIC)
        fh.write(struct.pack("<II", ARTIFACT_VERSION, len(trees)))
        for tree, bd in zip(trees, bds):
            n, b = tree.num_nodes, bd.num_branches
            fh.write(struct.pack("<II", n, b))
            _write_arr(fh, tree.vertices, "<i8")
            _write_arr(fh, tree.kind, "u1")
            _write_arr(fh, tree.parent, "<i4")
            _write_arr(fh, tree.values, "<f8")
            _write_arr(fh, tree.node_rank, "<i8")
            _write_arr(fh, bd.leaf_vertex, "<i8")
            _write_arr(fh, bd.birth, "<f8")
            _write_arr(fh, bd.death, "<f8")
            _write_arr(fh, bd.death_vertex, "<i8")
            _write_arr(fh, bd.merge_saddle, "<i8")
            _write_arr(fh, bd.parent, "<i4")
            _write_arr(fh, bd.branch_of_extremum, "<i4")


def _read_trees(
    path: Path, polarity: str
) -> tuple[list[MergeTree], list[BranchDecomposition]]:
    with open(path, "rb") as fh:
        if fh.read(4) != _TREES_MAGIC:
            raise ArtifactError(f"{path.name}: bad magic")
        ver, T = struct.unpack("<II", fh.read(8))
        if ver != ARTIFACT_VERSION:
            raise ArtifactVersionError(f"{path.name}: version {ver}")
        trees, bds = [], []
        for t in range(T):
            n, b = struct.unpack("<II", fh.read(8))
            trees.append(
                MergeTree(
                    t,
                    polarity,
                    _read_arr(fh, n, "<i8"),
                    _read_arr(fh, n, "u1"),
                    _read_arr(fh, n, "<i4"),
                    _read_arr(fh, n, "<f8"),
                    _read_arr(fh, n, "<i8"),
                )
            )
            bds.append(
                BranchDecomposition(
                    t,
                    polarity,
                    _read_arr(fh, b, "<i8"),
                    _read_arr(fh, b, "<f8"),
                    _read_arr(fh, b, "<f8"),
                    _read_arr(fh, b, "<i8"),
                    _read_arr(fh, b, "<i8"),
                    _read_arr(fh, b, "<i4"),
                    _read_arr(fh, b, "<i4"),
                )
            )
        return trees, bds


def _write_props(fh, props: dict[str, np.ndarray]) -> None:
    fh.write(struct.pack("<I", len(props)))
    for name in sorted(props):
        raw = name.encode()
        fh.write(struct.pack("<H", len(raw)))
        fh.write(raw)
        _write_arr(fh, props[name], "<f8")


def _read_props(fh, count: int) -> dict[str, np.ndarray]:
    (n,) = struct.unpack("<I", fh.read(4))
    out = {}
    for _ in range(n):
        (ln,) = struct.unpack("<H", fh.read(2))
        name = fh.read(ln).decode()
        out[name] = _read_arr(fh, count, "<f8")
    return out


def _write_graph(path: Path, g: TrackingGraph) -> None:
    with open(path, "wb") as fh:
        fh.write(_GRAPH_MAGIC)
        n = len(g.node_vertex)
        fh.write(struct.pack("<IIQ", ARTIFACT_VERSION, g.num_timesteps, n))
        _write_arr(fh, g.offsets, "<i8")
        _write_arr(fh, g.node_vertex, "<i8")
        _write_props(fh, g.node_props)
        for src, dst, props in ((g.fm_src, g.fm_dst, g.fm_props), (g.bm_src, g.bm_dst, g.bm_props)):
            fh.write(struct.pack("<Q", len(src)))
            _write_arr(fh, src, "<i8")
            _write_arr(fh, dst, "<i8")
            _write_props(fh, props)


def _read_graph(
    path: Path, polarity: str, topo: GridTopology, geo: GeoAxes | None
) -> TrackingGraph:
    with open(path, "rb") as fh:
        if fh.read(4) != _GRAPH_MAGIC:
            raise ArtifactError(f"{path.name}: bad magic")
        ver, T, n = struct.unpack("<IIQ", fh.read(16))
        if ver != ARTIFACT_VERSION:
            raise ArtifactVersionError(f"{path.name}: version {ver}")
        offsets = _read_arr(fh, T + 1, "<i8")
        node_vertex = _read_arr(fh, n, "<i8")
        node_props = _read_props(fh, n)
        edges = []
        for _ in range(2):
            (m,) = struct.unpack("<Q", fh.read(8))
            src = _read_arr(fh, m, "<i8")
            dst = _read_arr(fh, m, "<i8")
            props = _read_props(fh, m)
            edges.append((src, dst, props))
        return TrackingGraph(
            topology=topo,
            polarity=polarity,
            num_timesteps=T,
            geo=geo,
            offsets=offsets,
            node_vertex=node_vertex,
            node_props=node_props,
            fm_src=edges[0][0],
            fm_dst=edges[0][1],
            fm_props=edges[0][2],
            bm_src=edges[1][0],
            bm_dst=edges[1][1],
            bm_props=edges[1][2],
        )


def write_artifact(
    series: ScalarTimeSeries,
    out_dir,
    polarities: tuple[str, ...] = ("minimum",),
    workers: int | None = None,
    force: bool = False,
) -> dict:
    """Precompute everything for a series and persist it. Returns the
    manifest. Refuses a directory that already holds an artifact unless
    force is set."""
    out = Path(out_dir)
    if (out / "manifest.json").exists() and not force:
        raise ArtifactError(f"{out}: artifact already exists (use force)")
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    timings: dict = {"workers": workers or 1}

    field_path = out / "field.bin"
    save_raw_f64(series, field_path)
    files = {}

    T = series.num_timesteps
    for polarity in polarities:
        if polarity not in ("minimum", "maximum"):
            raise ValueError(f"unknown polarity {polarity!r}")
        seg_s = [0.0] * T
        tree_s = [0.0] * T

        def per_step(t: int):
            u0 = time.perf_counter()
            lab = segment_manifolds(series, t, polarity)
            u1 = time.perf_counter()
            tree = compute_merge_tree(series, t, polarity)
            bd = branch_decomposition(tree)
            u2 = time.perf_counter()
            seg_s[t] = u1 - u0
            tree_s[t] = u2 - u1
            return lab, tree, bd

        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(per_step, range(T)))
        else:
            parts = [per_step(t) for t in range(T)]
        labelings = [p[0] for p in parts]
        trees = [p[1] for p in parts]
        bds = [p[2] for p in parts]

        g0 = time.perf_counter()
        graph = build_tracking_graph(
            series, polarity, parts=[(lab, bd) for lab, _, bd in parts]
        )
        g1 = time.perf_counter()

        _write_labels(out / f"labels_{polarity}.bin", labelings, series.topology.num_vertices)
        _write_trees(out / f"trees_{polarity}.bin", trees, bds)
        _write_graph(out / f"graph_{polarity}.bin", graph)
        timings[polarity] = {
            "segmentation_s": round(sum(seg_s), 6),
            "merge_tree_s": round(sum(tree_s), 6),
            "tracking_graph_s": round(g1 - g0, 6),
        }
        log.info(
            "%s: segmentation %.2fs, trees %.2fs, graph %.2fs",
            polarity,
            sum(seg_s),
            sum(tree_s),
            g1 - g0,
        )

    names = ["field.bin"] + [
        f"{kind}_{p}.bin" for p in polarities for kind in ("labels", "trees", "graph")
    ]
    for name in names:
        p = out / name
        files[name] = {"sha256": _sha256(p), "bytes": p.stat().st_size}

    timings["total_s"] = round(time.perf_counter() - t_start, 6)
    manifest = {
        "format_version": ARTIFACT_VERSION,
        "package_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "grid": {
            "width": series.topology.width,
            "height": series.topology.height,
            "wrap_x": series.topology.wrap_x,
            "wrap_y": series.topology.wrap_y,
        },
        "geo": series.geo.to_dict() if series.geo else None,
        "dt_hours": series.dt_hours,
        "num_timesteps": T,
        "field_range": list(series.field_range),
        "polarities": list(polarities),
        "files": files,
        "timings": timings,
    }
    # manifest last: its presence marks a complete artifact
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


@dataclass
class _PolarityData:
    labelings: list[ManifoldLabeling]
    trees: list[MergeTree]
    bds: list[BranchDecomposition]
    graph: TrackingGraph


class ArtifactStore:
    """Opened artifact plus the interactive operations on it."""

    def __init__(self, path, verify: bool = True):
        self.path = Path(path)
        mpath = self.path / "manifest.json"
        if not mpath.exists():
            raise ArtifactError(f"{self.path}: no manifest.json (not an artifact?)")
        try:
            self.manifest = json.loads(mpath.read_text())
        except json.JSONDecodeError as e:
            raise ArtifactError(f"{mpath}: corrupt manifest: {e}") from e
        ver = self.manifest.get("format_version")
        if ver != ARTIFACT_VERSION:
            raise ArtifactVersionError(
                f"{self.path}: artifact format {ver}, this build reads {ARTIFACT_VERSION}"
            )
        if verify:
            for name, rec in self.manifest["files"].items():
                p = self.path / name
                if not p.exists():
                    raise ArtifactError(f"{self.path}: missing {name}")
                got = _sha256(p)
                if got != rec["sha256"]:
                    raise ArtifactChecksumError(
                        f"{name}: checksum mismatch (expected {rec['sha256'][:12]}, got {got[:12]})"
                    )
        geo = GeoAxes.from_dict(self.manifest["geo"]) if self.manifest["geo"] else None
        self.series = load_series(self.path / "field.bin", format="raw-f64")
        if geo is not None:
            self.series.geo = geo
        self._pol: dict[str, _PolarityData] = {}

    @property
    def polarities(self) -> list[str]:
        return list(self.manifest["polarities"])

    def _data(self, polarity: str) -> _PolarityData:
        got = self._pol.get(polarity)
        if got is None:
            if polarity not in self.manifest["polarities"]:
                raise ArtifactError(
                    f"polarity {polarity!r} not in artifact (has {self.manifest['polarities']})"
                )
            labelings = _read_labels(self.path / f"labels_{polarity}.bin", polarity)
            trees, bds = _read_trees(self.path / f"trees_{polarity}.bin", polarity)
            graph = _read_graph(
                self.path / f"graph_{polarity}.bin",
                polarity,
                self.series.topology,
                self.series.geo,
            )
            got = _PolarityData(labelings, trees, bds, graph)
            self._pol[polarity] = got
        return got

    def labelings(self, polarity="minimum"):
        return self._data(polarity).labelings

    def trees(self, polarity="minimum"):
        return self._data(polarity).trees

    def branch_decompositions(self, polarity="minimum"):
        return self._data(polarity).bds

    def graph(self, polarity="minimum") -> TrackingGraph:
        return self._data(polarity).graph

    # ---- interactive operations ----

    def meta(self) -> dict:
        m = self.manifest
        return {
            "grid": m["grid"],
            "geo": m["geo"],
            "dt_hours": m["dt_hours"],
            "num_timesteps": m["num_timesteps"],
            "field_range": m["field_range"],
            "polarities": m["polarities"],
            "format_version": m["format_version"],
            "package_version": m["package_version"],
        }

    def field_slice(self, t: int, stride: int = 1) -> dict:
        if not 0 <= t < self.series.num_timesteps:
            raise IndexError(f"timestep {t} out of range")
        if stride < 1:
            raise ValueError("stride must be >= 1")
        g = self.series.grid(t)[::stride, ::stride]
        return {
            "t": t,
            "stride": stride,
            "width": g.shape[1],
            "height": g.shape[0],
            "values": [[round(float(v), 9) for v in row] for row in g],
        }

    def window(self, t0, t1) -> tuple[int, int]:
        T = self.series.num_timesteps
        t0 = 0 if t0 is None else int(t0)
        t1 = T - 1 if t1 is None else int(t1)
        if not 0 <= t0 <= t1 < T:
            raise IndexError(f"window [{t0}, {t1}] out of range (T={T})")
        return t0, t1

    def features(
        self,
        spec: DescriptorSpec,
        t0: int | None = None,
        t1: int | None = None,
        with_geometry: bool = False,
    ):
        t0, t1 = self.window(t0, t1)
        bds = self._data(spec.polarity).bds
        return evaluate_descriptor(self.series, bds, spec, t0, t1, with_geometry)

    def tracks(
        self,
        spec: DescriptorSpec,
        weights: MatchWeights = MatchWeights(),
        t0: int | None = None,
        t1: int | None = None,
    ) -> tuple[list, TrackingResult]:
        t0, t1 = self.window(t0, t1)
        data = self._data(spec.polarity)
        feats = evaluate_descriptor(self.series, data.bds, spec, t0, t1)
        res = track_features(
            feats,
            data.graph,
            weights,
            t0=t0,
            labelings=data.labelings,
            series=self.series,
        )
        return feats, res

    def graph_view(
        self,
        spec: FilterSpec | None = None,
        polarity: str = "minimum",
    ) -> dict:
        g = self._data(polarity).graph
        view = filter_graph(g, spec or FilterSpec())
        ids = np.flatnonzero(view.node_mask)
        fm = np.flatnonzero(view.fm_mask)
        bm = np.flatnonzero(view.bm_mask)
        return {
            "polarity": polarity,
            "nodes": {
                "id": ids.tolist(),
                "timestep": g.node_props["timestep"][ids].astype(int).tolist(),
                "vertex": g.node_vertex[ids].tolist(),
                **{
                    k: [round(float(v), 9) for v in g.node_props[k][ids]]
                    for k in sorted(g.node_props)
                    if k != "timestep"
                },
            },
            "forward_edges": {
                "src": g.fm_src[fm].tolist(),
                "dst": g.fm_dst[fm].tolist(),
                **{
                    k: [round(float(v), 9) for v in g.fm_props[k][fm]]
                    for k in sorted(g.fm_props)
                },
            },
            "backward_edges": {
                "src": g.bm_src[bm].tolist(),
                "dst": g.bm_dst[bm].tolist(),
                **{
                    k: [round(float(v), 9) for v in g.bm_props[k][bm]]
                    for k in sorted(g.bm_props)
                },
            },
        }

    def component(
        self,
        seeds: list[int],
        spec: FilterSpec | None = None,
        polarity: str = "minimum",
    ) -> dict:
        g = self._data(polarity).graph
        view = filter_graph(g, spec or FilterSpec())
        res = query_component(view, seeds)
        return {
            "nodes": [int(i) for i in res.node_ids],
            "forward_edges": [int(i) for i in res.fm_edge_idx],
            "backward_edges": [int(i) for i in res.bm_edge_idx],
        }

    def extremum_track(
        self,
        t: int,
        local: int,
        spec: FilterSpec | None = None,
        polarity: str = "minimum",
    ) -> dict:
        """Trajectory of one extremum: follow surviving map edges
        backward to the earliest and forward to the latest node."""
        g = self._data(polarity).graph
        if not 0 <= t < g.num_timesteps:
            raise IndexError(f"timestep {t} out of range")
        if not 0 <= local < g.offsets[t + 1] - g.offsets[t]:
            raise IndexError(f"no extremum {local} at timestep {t}")
        view = filter_graph(g, spec or FilterSpec())
        nid = g.node_id(t, local)
        if not view.node_mask[nid]:
            from .errors import SeedFilteredError

            raise SeedFilteredError([nid])

        fm_ok = view.fm_mask
        bm_ok = view.bm_mask
        # forward chain: each node has at most one outgoing map edge
        fwd_of = {}
        for i in np.flatnonzero(fm_ok):
            fwd_of[int(g.fm_src[i])] = int(g.fm_dst[i])
        bwd_of = {}
        for i in np.flatnonzero(bm_ok):
            bwd_of[int(g.bm_src[i])] = int(g.bm_dst[i])
        chain = [nid]
        seen = {nid}
        cur = nid
        while cur in bwd_of and bwd_of[cur] not in seen:
            cur = bwd_of[cur]
            seen.add(cur)
            chain.insert(0, cur)
        cur = nid
        while cur in fwd_of and fwd_of[cur] not in seen:
            cur = fwd_of[cur]
            seen.add(cur)
            chain.append(cur)
        return {
            "seed": int(nid),
            "nodes": [
                {
                    "id": int(i),
                    "timestep": int(g.node_props["timestep"][i]),
                    "vertex": int(g.node_vertex[i]),
                    "x": float(g.node_props["x"][i]),
                    "y": float(g.node_props["y"][i]),
                    "value": round(float(g.node_props["value"][i]), 9),
                    "persistence": round(float(g.node_props["persistence"][i]), 9),
                }
                for i in chain
            ],
        }
