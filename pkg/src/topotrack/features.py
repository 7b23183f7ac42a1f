"""Feature descriptors: group extrema of one timestep into features.

A feature is a set of extrema owned by a carrier, the member whose
branch outlives the local depth scale. Three grouping rules are
provided; all operate on the branch decomposition alone plus the field
values, so evaluation is cheap enough for interactive use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contours import region_loops
from .errors import FilterError
from .mergetree import BranchDecomposition
from .series import ScalarTimeSeries
from .trackgraph import Box

__all__ = [
    "DeltaField",
    "DescriptorSpec",
    "Feature",
    "evaluate_timestep",
    "evaluate_descriptor",
    "attach_geometry",
]

_KINDS = ("local-offset", "persistence-threshold", "global-threshold")


@dataclass(frozen=True)
class DeltaField:
    """Depth scale delta: constant, percent of the series value range,
    or a per-vertex grid."""

    constant: float | None = None
    percent: float | None = None
    grid: tuple[float, ...] | None = None

    def __post_init__(self):
        n = sum(x is not None for x in (self.constant, self.percent, self.grid))
        if n != 1:
            raise ValueError("delta needs exactly one of constant/percent/grid")

    def resolve(self, field_range: tuple[float, float], num_vertices: int):
        """Per-vertex delta as a scalar or an (V,) array."""
        if self.constant is not None:
            return float(self.constant)
        if self.percent is not None:
            lo, hi = field_range
            return float(self.percent) / 100.0 * (hi - lo)
        arr = np.asarray(self.grid, dtype=np.float64)
        if arr.size != num_vertices:
            raise ValueError(
                f"grid delta has {arr.size} values, grid has {num_vertices} vertices"
            )
        return arr

    @classmethod
    def from_json(cls, obj) -> "DeltaField":
        if isinstance(obj, (int, float)):
            return cls(constant=float(obj))
        if not isinstance(obj, dict):
            raise FilterError("delta must be a number or an object")
        kind = obj.get("kind", "constant")
        if kind == "constant":
            return cls(constant=float(obj["value"]))
        if kind == "percent":
            return cls(percent=float(obj["value"]))
        if kind == "grid":
            return cls(grid=tuple(float(v) for v in obj["values"]))
        raise FilterError(f"unknown delta kind {kind!r}")

    def to_json(self):
        if self.constant is not None:
            return {"kind": "constant", "value": self.constant}
        if self.percent is not None:
            return {"kind": "percent", "value": self.percent}
        return {"kind": "grid", "values": list(self.grid)}


@dataclass(frozen=True)
class DescriptorSpec:
    kind: str
    polarity: str = "minimum"
    delta: DeltaField | None = None
    threshold: float | None = None
    threshold_percent: float | None = None
    representative: str = "carrier"
    attach: str = "transitive"
    roi: tuple[Box, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown descriptor kind {self.kind!r}")
        if self.polarity not in ("minimum", "maximum"):
            raise ValueError(f"unknown polarity {self.polarity!r}")
        if self.representative not in ("carrier", "deepest"):
            raise ValueError(f"unknown representative {self.representative!r}")
        if self.attach not in ("transitive", "direct"):
            raise ValueError(f"unknown attach mode {self.attach!r}")
        if self.kind in ("local-offset", "persistence-threshold"):
            if self.delta is None:
                raise ValueError(f"{self.kind} needs a delta")
            if self.threshold is not None or self.threshold_percent is not None:
                raise ValueError(f"{self.kind} does not take a threshold")
        else:
            has = (self.threshold is not None) + (self.threshold_percent is not None)
            if has != 1:
                raise ValueError(
                    "global-threshold needs exactly one of threshold/threshold_percent"
                )
            if self.delta is not None:
                raise ValueError("global-threshold does not take a delta")

    def level_for(self, field_range: tuple[float, float]) -> float:
        """Absolute cut level of a global-threshold descriptor."""
        if self.threshold is not None:
            return float(self.threshold)
        lo, hi = field_range
        if self.polarity == "minimum":
            return lo + float(self.threshold_percent) / 100.0 * (hi - lo)
        return hi - float(self.threshold_percent) / 100.0 * (hi - lo)

    @classmethod
    def from_json(cls, obj: dict) -> "DescriptorSpec":
        if not isinstance(obj, dict):
            raise FilterError("descriptor must be a JSON object")
        known = {
            "kind",
            "polarity",
            "delta",
            "threshold",
            "threshold_percent",
            "representative",
            "attach",
            "roi",
        }
        unknown = set(obj) - known
        if unknown:
            raise FilterError(f"unknown descriptor fields: {sorted(unknown)}")
        try:
            return cls(
                kind=obj["kind"],
                polarity=obj.get("polarity", "minimum"),
                delta=DeltaField.from_json(obj["delta"]) if "delta" in obj else None,
                threshold=obj.get("threshold"),
                threshold_percent=obj.get("threshold_percent"),
                representative=obj.get("representative", "carrier"),
                attach=obj.get("attach", "transitive"),
                roi=tuple(
                    Box(float(b["x0"]), float(b["x1"]), float(b["y0"]), float(b["y1"]))
                    for b in obj.get("roi", [])
                ),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FilterError(f"bad descriptor: {e}") from e

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "polarity": self.polarity}
        if self.delta is not None:
            out["delta"] = self.delta.to_json()
        if self.threshold is not None:
            out["threshold"] = self.threshold
        if self.threshold_percent is not None:
            out["threshold_percent"] = self.threshold_percent
        if self.representative != "carrier":
            out["representative"] = self.representative
        if self.attach != "transitive":
            out["attach"] = self.attach
        if self.roi:
            out["roi"] = [b.to_dict() for b in self.roi]
        return out


@dataclass
class Feature:
    """One feature at one timestep. Indices are extremum-local (the
    position within the vertex-sorted extrema of that timestep)."""

    feature_id: int
    timestep: int
    polarity: str
    carrier: int
    members: np.ndarray
    master_branch: int
    master_persistence: float
    representative: int
    representative_value: float
    level: float
    geometry: list[np.ndarray] | None = None
    members_outside_geometry: int | None = None
    member_weight_cache: dict = field(default_factory=dict, repr=False)

    def to_json(self, with_geometry: bool = False) -> dict:
        out = {
            "id": self.feature_id,
            "timestep": self.timestep,
            "carrier": int(self.carrier),
            "members": [int(m) for m in self.members],
            "master_branch": int(self.master_branch),
            "master_persistence": float(self.master_persistence),
            "representative": int(self.representative),
            "representative_value": float(self.representative_value),
            "level": float(self.level),
        }
        if with_geometry and self.geometry is not None:
            # in-memory loops are implicitly closed; serialized rings repeat
            # the first point so any consumer can draw them as-is
            rings = []
            for loop in self.geometry:
                ring = [[round(float(x), 9), round(float(y), 9)] for x, y in loop]
                if ring and ring[0] != ring[-1]:
                    ring.append(ring[0])
                rings.append(ring)
            out["geometry"] = rings
            out["members_outside_geometry"] = self.members_outside_geometry
        return out


def _delta_at(resolved, vertices: np.ndarray) -> np.ndarray:
    if isinstance(resolved, float):
        return np.full(len(vertices), resolved)
    return resolved[vertices]


def _roi_mask(series: ScalarTimeSeries, spec: DescriptorSpec, vertices: np.ndarray):
    if not spec.roi:
        return np.ones(len(vertices), dtype=bool)
    xs = (vertices % series.topology.width).astype(np.float64)
    ys = (vertices // series.topology.width).astype(np.float64)
    if series.geo is not None:
        xs, ys = series.geo.lon(xs), series.geo.lat(ys)
    m = np.zeros(len(vertices), dtype=bool)
    for box in spec.roi:
        m |= box.contains(xs, ys)
    return m


def _deepest_member(members, leaf_values, leaf_vertex, polarity) -> int:
    vals = leaf_values[members]
    vids = leaf_vertex[members]
    if polarity == "minimum":
        pick = np.lexsort((vids, vals))[0]
    else:
        pick = np.lexsort((-vids, -vals))[0]
    return int(members[pick])


def _build_features(
    groups: list[tuple[int, list[int]]],
    spec: DescriptorSpec,
    t: int,
    bd: BranchDecomposition,
    leaf_values: np.ndarray,
    level_of_carrier,
) -> list[Feature]:
    pers = bd.persistence
    out = []
    for fid, (carrier, members_list) in enumerate(groups):
        members = np.array(sorted(members_list), dtype=np.int64)
        mb = int(members[np.argmax(pers[members])])
        if spec.representative == "deepest":
            rep = _deepest_member(members, leaf_values, bd.leaf_vertex, spec.polarity)
        else:
            rep = carrier
        out.append(
            Feature(
                feature_id=fid,
                timestep=t,
                polarity=spec.polarity,
                carrier=int(carrier),
                members=members,
                master_branch=mb,
                master_persistence=float(pers[mb]),
                representative=int(rep),
                representative_value=float(leaf_values[rep]),
                level=float(level_of_carrier(carrier, rep)),
            )
        )
    return out


def _offset_features(
    series: ScalarTimeSeries,
    t: int,
    bd: BranchDecomposition,
    spec: DescriptorSpec,
    use_value_criterion: bool,
) -> list[Feature]:
    pers = bd.persistence
    leafv = bd.leaf_vertex
    leaf_values = series.values[t][leafv]
    resolved = spec.delta.resolve(series.field_range, series.topology.num_vertices)
    delta = _delta_at(resolved, leafv)
    roi = _roi_mask(series, spec, leafv)
    sign = 1.0 if spec.polarity == "minimum" else -1.0

    carrier = (pers > delta) & roi
    members: dict[int, list[int]] = {int(c): [int(c)] for c in np.flatnonzero(carrier)}
    n = len(leafv)
    for i in range(n):
        if carrier[i] or not roi[i]:
            continue
        # nearest carrier ancestor along the branch hierarchy
        j = bd.parent[i]
        hops = 0
        while j >= 0 and not carrier[j]:
            if spec.attach == "direct":
                j = -1
                break
            j = bd.parent[j]
            hops += 1
        if j < 0:
            continue
        if use_value_criterion:
            reach = leaf_values[j] + sign * delta[j]
            if sign * leaf_values[i] > sign * reach:
                continue
        if not pers[i] < delta[j]:
            continue
        members[j].append(i)

    groups = [(c, ms) for c, ms in sorted(members.items())]
    return _build_features(
        groups,
        spec,
        t,
        bd,
        leaf_values,
        lambda c, rep: leaf_values[rep] + sign * _delta_at(resolved, leafv[[c]])[0],
    )


def _global_threshold_features(
    series: ScalarTimeSeries,
    t: int,
    bd: BranchDecomposition,
    spec: DescriptorSpec,
) -> list[Feature]:
    level = spec.level_for(series.field_range)
    leafv = bd.leaf_vertex
    leaf_values = series.values[t][leafv]
    roi = _roi_mask(series, spec, leafv)
    sign = 1.0 if spec.polarity == "minimum" else -1.0
    n = len(leafv)

    # union along branch parents while the connecting saddle is within
    # the cut region; components of the union are the features
    root = np.arange(n)

    def find(i):
        while root[i] != i:
            root[i] = root[root[i]]
            i = root[i]
        return i

    for i in range(n):
        p = bd.parent[i]
        if p >= 0 and sign * bd.death[i] <= sign * level:
            root[find(i)] = find(p)

    present = (sign * leaf_values <= sign * level) & roi
    groups_by_root: dict[int, list[int]] = {}
    for i in np.flatnonzero(present):
        groups_by_root.setdefault(find(int(i)), []).append(int(i))

    pers = bd.persistence
    groups = []
    for ms in groups_by_root.values():
        carrier = int(ms[int(np.argmax(pers[np.array(ms)]))])
        groups.append((carrier, ms))
    groups.sort()
    return _build_features(groups, spec, t, bd, leaf_values, lambda c, rep: level)


def evaluate_timestep(
    series: ScalarTimeSeries,
    t: int,
    bd: BranchDecomposition,
    spec: DescriptorSpec,
) -> list[Feature]:
    """Features of one timestep from its branch decomposition."""
    if bd.polarity != spec.polarity:
        raise ValueError(
            f"descriptor polarity {spec.polarity!r} does not match "
            f"decomposition polarity {bd.polarity!r}"
        )
    if spec.kind == "local-offset":
        return _offset_features(series, t, bd, spec, use_value_criterion=True)
    if spec.kind == "persistence-threshold":
        return _offset_features(series, t, bd, spec, use_value_criterion=False)
    return _global_threshold_features(series, t, bd, spec)


def attach_geometry(
    series: ScalarTimeSeries, feature: Feature, bd: BranchDecomposition
) -> None:
    """Trace the feature's threshold-region outline in place."""
    w = series.topology.width
    vids = bd.leaf_vertex[feature.members]
    xy = np.stack([(vids % w).astype(float), (vids // w).astype(float)], axis=1)
    grid = series.grid(feature.timestep)
    loops, missed = region_loops(grid, feature.level, xy, feature.polarity)
    feature.geometry = loops
    feature.members_outside_geometry = missed


def evaluate_descriptor(
    series: ScalarTimeSeries,
    bds: list[BranchDecomposition],
    spec: DescriptorSpec,
    t0: int = 0,
    t1: int | None = None,
    with_geometry: bool = False,
) -> list[list[Feature]]:
    """Features for the inclusive window [t0, t1], one list per step."""
    if t1 is None:
        t1 = series.num_timesteps - 1
    if not 0 <= t0 <= t1 < series.num_timesteps:
        raise IndexError(f"window [{t0}, {t1}] out of range")
    out = []
    for t in range(t0, t1 + 1):
        feats = evaluate_timestep(series, t, bds[t], spec)
        if with_geometry:
            for f in feats:
                attach_geometry(series, f, bds[t])
        out.append(feats)
    return out
