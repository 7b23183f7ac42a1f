"""Feature correspondence over time.

Features of adjacent timesteps are matched by pushing each member
extremum along the complete tracking graph and accumulating weighted
votes on the features its image lands in. Weight accumulated on
extrema whose image lies in no feature counts against the match: a
feature dies when that unmatched weight wins, or when nothing scores
above zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TopotrackError
from .features import Feature
from .morse import ManifoldLabeling
from .series import ScalarTimeSeries, sos_rank
from .trackgraph import TrackingGraph
from .grid import neighbor_table

__all__ = [
    "MatchWeights",
    "Matching",
    "TrackingEvent",
    "FeatureTrack",
    "TrackingResult",
    "match_step",
    "track_features",
]

_WEIGHT_KINDS = ("persistence", "uniform", "manifold-overlap", "sublevel-overlap")


@dataclass(frozen=True)
class MatchWeights:
    """How much each member's vote counts during matching."""

    kind: str = "persistence"
    delta: float | None = None  # sublevel-overlap flood depth above the extremum

    def __post_init__(self):
        if self.kind not in _WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "sublevel-overlap" and self.delta is None:
            raise ValueError("sublevel-overlap weights need a delta")

    @classmethod
    def from_json(cls, obj) -> "MatchWeights":
        if obj is None:
            return cls()
        if isinstance(obj, str):
            return cls(kind=obj)
        return cls(kind=obj.get("kind", "persistence"), delta=obj.get("delta"))

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.delta is not None:
            out["delta"] = self.delta
        return out


@dataclass
class Matching:
    """One directed matching step between adjacent timesteps."""

    t_from: int
    t_to: int
    matched: dict[int, int]
    dead: list[int]
    scores: dict[int, dict[int, float]]
    unmatched_weight: dict[int, float]


@dataclass
class TrackingEvent:
    kind: str  # birth | death | merge | split
    timestep: int
    features: list[tuple[int, int]]  # (timestep, feature_id) participants

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "timestep": self.timestep,
            "features": [[t, f] for t, f in self.features],
        }


@dataclass
class FeatureTrack:
    track_id: int
    nodes: list[tuple[int, int]]  # (timestep, feature_id), strictly increasing t
    start: str = "birth"  # birth | split | window-start
    end: str = "window-end"  # death | merge | window-end
    max_persistence: float = 0.0

    def to_json(self) -> dict:
        return {
            "id": self.track_id,
            "nodes": [[t, f] for t, f in self.nodes],
            "start": self.start,
            "end": self.end,
            "max_persistence": self.max_persistence,
        }


@dataclass
class TrackingResult:
    t0: int
    t1: int
    forward: list[Matching]
    backward: list[Matching]
    events: list[TrackingEvent]
    tracks: list[FeatureTrack]

    def events_json(self) -> list[dict]:
        return [e.to_json() for e in self.events]

    def tracks_json(self) -> list[dict]:
        return [tr.to_json() for tr in self.tracks]


class _WeightContext:
    """Per-transition member weights.

    persistence and uniform need only the graph node table; the overlap
    kinds additionally need the per-step labelings or the raw field.
    """

    def __init__(
        self,
        weights: MatchWeights,
        graph: TrackingGraph,
        labelings: list[ManifoldLabeling] | None,
        series: ScalarTimeSeries | None,
    ):
        self.weights = weights
        self.graph = graph
        self.labelings = labelings
        self.series = series
        if weights.kind == "manifold-overlap" and labelings is None:
            raise TopotrackError("manifold-overlap weights need labelings")
        if weights.kind == "sublevel-overlap" and series is None:
            raise TopotrackError("sublevel-overlap weights need the field")
        self._overlap_cache: dict = {}
        self._flood_cache: dict = {}
        self._table = None

    def member_weight(self, t_from: int, m: int, t_to: int, succ: int) -> float:
        kind = self.weights.kind
        if kind == "uniform":
            return 1.0
        if kind == "persistence":
            sl = self.graph.timestep_slice(t_from)
            return float(self.graph.node_props["persistence"][sl][m])
        if kind == "manifold-overlap":
            return float(self._overlap(t_from, t_to)[m, succ])
        return float(self._flood_overlap(t_from, m, t_to, succ))

    def _overlap(self, t_from: int, t_to: int) -> np.ndarray:
        key = (t_from, t_to)
        got = self._overlap_cache.get(key)
        if got is None:
            a = self.labelings[t_from].label.astype(np.int64)
            b = self.labelings[t_to].label.astype(np.int64)
            ka = self.labelings[t_from].num_regions
            kb = self.labelings[t_to].num_regions
            got = np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb)
            self._overlap_cache[key] = got
        return got

    def _flood_mask(self, t: int, m: int) -> np.ndarray:
        key = (t, m)
        got = self._flood_cache.get(key)
        if got is None:
            if self._table is None:
                self._table = neighbor_table(self.series.topology)
            lab = self.labelings[t] if self.labelings else None
            if lab is not None:
                v0 = int(lab.extremum_vertices[m])
                polarity = lab.polarity
            else:
                raise TopotrackError("sublevel-overlap weights need labelings")
            vals = self.series.values[t]
            sign = 1.0 if polarity == "minimum" else -1.0
            cut = vals[v0] + sign * float(self.weights.delta)
            ok = sign * vals <= sign * cut
            got = np.zeros(len(vals), dtype=bool)
            stack = [v0]
            got[v0] = True
            while stack:
                v = stack.pop()
                for u in self._table[v]:
                    if u >= 0 and ok[u] and not got[u]:
                        got[u] = True
                        stack.append(int(u))
            self._flood_cache[key] = got
        return got

    def _flood_overlap(self, t_from: int, m: int, t_to: int, succ: int) -> float:
        a = self._flood_mask(t_from, m)
        b = self._flood_mask(t_to, succ)
        return float(np.count_nonzero(a & b))


def _feature_of_extremum(feats: list[Feature], n_extrema: int) -> np.ndarray:
    out = np.full(n_extrema, -1, dtype=np.int64)
    for f in feats:
        out[f.members] = f.feature_id
    return out


def match_step(
    feats_from: list[Feature],
    feats_to: list[Feature],
    successor_local: np.ndarray,
    ctx: _WeightContext,
    t_from: int,
    t_to: int,
) -> Matching:
    """Match every feature of t_from onto features of t_to (either
    direction; successor_local carries the corresponding edges)."""
    n_to = ctx.graph.offsets[t_to + 1] - ctx.graph.offsets[t_to]
    fmap = _feature_of_extremum(feats_to, int(n_to))
    matched: dict[int, int] = {}
    dead: list[int] = []
    all_scores: dict[int, dict[int, float]] = {}
    unmatched: dict[int, float] = {}
    master = {f.feature_id: f.master_persistence for f in feats_to}
    for f in feats_from:
        scores: dict[int, float] = {}
        u = 0.0
        for m in f.members:
            succ = int(successor_local[int(m)])
            w = ctx.member_weight(t_from, int(m), t_to, succ)
            fj = int(fmap[succ])
            if fj < 0:
                u += w
            else:
                scores[fj] = scores.get(fj, 0.0) + w
        all_scores[f.feature_id] = scores
        unmatched[f.feature_id] = u
        if not scores:
            dead.append(f.feature_id)
            continue
        best_id, best_score = max(
            scores.items(), key=lambda kv: (kv[1], master[kv[0]], -kv[0])
        )
        if best_score <= 0.0 or u > best_score:
            dead.append(f.feature_id)
        else:
            matched[f.feature_id] = best_id
    return Matching(t_from, t_to, matched, dead, all_scores, unmatched)


def _detect_events(
    feats_by_t: list[list[Feature]],
    forward: list[Matching],
    backward: list[Matching],
    t0: int,
) -> list[TrackingEvent]:
    events: list[TrackingEvent] = []
    for f in feats_by_t[0]:
        events.append(TrackingEvent("birth", t0, [(t0, f.feature_id)]))
    n = len(feats_by_t)
    for i in range(n - 1):
        t = t0 + i
        fwd = forward[i]
        bwd = backward[i]
        targets: dict[int, list[int]] = {}
        for src, dst in fwd.matched.items():
            targets.setdefault(dst, []).append(src)
        back_targets: dict[int, list[int]] = {}
        for src, dst in bwd.matched.items():
            back_targets.setdefault(dst, []).append(src)

        for fid in sorted(fwd.dead):
            events.append(TrackingEvent("death", t, [(t, fid)]))
        for dst in sorted(targets):
            srcs = targets[dst]
            if len(srcs) >= 2:
                events.append(
                    TrackingEvent(
                        "merge",
                        t + 1,
                        [(t, s) for s in sorted(srcs)] + [(t + 1, dst)],
                    )
                )
        split_children: set[int] = set()
        for dst in sorted(back_targets):
            srcs = back_targets[dst]
            if len(srcs) >= 2:
                events.append(
                    TrackingEvent(
                        "split",
                        t + 1,
                        [(t, dst)] + [(t + 1, s) for s in sorted(srcs)],
                    )
                )
                split_children.update(srcs)
        matched_targets = set(targets)
        for f in feats_by_t[i + 1]:
            fid = f.feature_id
            if fid in matched_targets or fid in split_children:
                continue
            if fid in bwd.dead or not bwd.scores.get(fid):
                events.append(TrackingEvent("birth", t + 1, [(t + 1, fid)]))
            elif fid in bwd.matched:
                # backward-connected orphan: continuation exists but the
                # forward pass preferred another target; no event
                pass
            else:
                events.append(TrackingEvent("birth", t + 1, [(t + 1, fid)]))
    return events


def _assemble_tracks(
    feats_by_t: list[list[Feature]],
    forward: list[Matching],
    events: list[TrackingEvent],
    t0: int,
) -> list[FeatureTrack]:
    births = {(e.timestep, e.features[0][1]) for e in events if e.kind == "birth"}
    split_children = {
        (t, f) for e in events if e.kind == "split" for (t, f) in e.features[1:]
    }
    tracks: list[FeatureTrack] = []
    active: dict[int, int] = {}

    def start_track(t: int, fid: int):
        if (t, fid) in births:
            kind = "birth"
        elif (t, fid) in split_children:
            kind = "split"
        else:
            kind = "window-start"
        tracks.append(FeatureTrack(len(tracks), [(t, fid)], start=kind))
        active[fid] = tracks[-1].track_id

    for f in feats_by_t[0]:
        start_track(t0, f.feature_id)
    n = len(feats_by_t)
    for i in range(n - 1):
        t = t0 + i
        fwd = forward[i]
        master = {f.feature_id: f.master_persistence for f in feats_by_t[i]}
        targets: dict[int, list[int]] = {}
        for src, dst in sorted(fwd.matched.items()):
            targets.setdefault(dst, []).append(src)
        nxt: dict[int, int] = {}
        for dst, srcs in targets.items():
            keep = max(srcs, key=lambda s: (master[s], -s))
            for s in srcs:
                if s == keep:
                    tracks[active[s]].nodes.append((t + 1, dst))
                    nxt[dst] = active[s]
                else:
                    tracks[active[s]].end = "merge"
        for fid in fwd.dead:
            tracks[active[fid]].end = "death"
        active = nxt
        for f in feats_by_t[i + 1]:
            if f.feature_id not in active:
                start_track(t + 1, f.feature_id)
    for f in feats_by_t[-1]:
        tracks[active[f.feature_id]].end = "window-end"

    by_step = {}
    for i, feats in enumerate(feats_by_t):
        for f in feats:
            by_step[(t0 + i, f.feature_id)] = f.master_persistence
    for tr in tracks:
        tr.max_persistence = max(by_step[n] for n in tr.nodes)
    return tracks


def track_features(
    feats_by_t: list[list[Feature]],
    graph: TrackingGraph,
    weights: MatchWeights = MatchWeights(),
    t0: int = 0,
    labelings: list[ManifoldLabeling] | None = None,
    series: ScalarTimeSeries | None = None,
) -> TrackingResult:
    """Full matching, event detection and track assembly over a window.

    feats_by_t[i] holds the features of timestep t0+i; the graph must
    cover the whole window (it is indexed by absolute timestep).
    """
    n = len(feats_by_t)
    if n == 0:
        return TrackingResult(t0, t0 - 1, [], [], [], [])
    ctx = _WeightContext(weights, graph, labelings, series)
    forward: list[Matching] = []
    backward: list[Matching] = []
    for i in range(n - 1):
        t = t0 + i
        forward.append(
            match_step(
                feats_by_t[i],
                feats_by_t[i + 1],
                graph.fm_successor_local(t),
                ctx,
                t,
                t + 1,
            )
        )
        backward.append(
            match_step(
                feats_by_t[i + 1],
                feats_by_t[i],
                graph.bm_predecessor_local(t + 1),
                ctx,
                t + 1,
                t,
            )
        )
    events = _detect_events(feats_by_t, forward, backward, t0)
    tracks = _assemble_tracks(feats_by_t, forward, events, t0)
    return TrackingResult(t0, t0 + n - 1, forward, backward, events, tracks)
