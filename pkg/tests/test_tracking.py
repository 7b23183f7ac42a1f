import numpy as np
import pytest

from topotrack import (
    DeltaField,
    DescriptorSpec,
    MatchWeights,
    branch_decomposition,
    build_tracking_graph,
    compute_merge_tree,
    evaluate_descriptor,
    segment_manifolds,
    track_features,
)
from topotrack.synth import (
    MERGE_STEP,
    dominant_swap_series,
    feature_death_series,
    merging_wells_series,
    static_series,
    translating_well_series,
)


def run(series, delta, weights=MatchWeights(), polarity="minimum"):
    spec = DescriptorSpec("local-offset", polarity=polarity, delta=DeltaField(constant=delta))
    bds = [
        branch_decomposition(compute_merge_tree(series, t, polarity))
        for t in range(series.num_timesteps)
    ]
    feats = evaluate_descriptor(series, bds, spec)
    graph = build_tracking_graph(series, polarity)
    labelings = [
        segment_manifolds(series, t, polarity) for t in range(series.num_timesteps)
    ]
    res = track_features(
        feats, graph, weights, labelings=labelings, series=series
    )
    return feats, res


def kinds(res):
    return [(e.kind, e.timestep) for e in res.events]


def test_merge_event():
    s = merging_wells_series()
    feats, res = run(s, 4.0)
    merges = [e for e in res.events if e.kind == "merge"]
    assert len(merges) == 1
    assert merges[0].timestep == MERGE_STEP
    # two predecessors at t=2, one successor at t=3
    assert merges[0].features == [(2, 0), (2, 1), (3, 0)]
    assert [e.kind for e in res.events if e.kind not in ("birth",)] == ["merge"]


def test_split_event_on_reversal():
    s = merging_wells_series().reversed()
    feats, res = run(s, 4.0)
    splits = [e for e in res.events if e.kind == "split"]
    assert len(splits) == 1
    assert splits[0].timestep == 5 - 1 - MERGE_STEP + 1
    assert [e.kind for e in res.events if e.kind != "birth"] == ["split"]


def test_merge_track_continuation():
    s = merging_wells_series()
    feats, res = run(s, 4.0)
    assert len(res.tracks) == 2
    deep, shallow = res.tracks
    # the deeper well's track continues through the merge to the end
    assert deep.start == "birth" and deep.end == "window-end"
    assert [t for t, _ in deep.nodes] == [0, 1, 2, 3, 4]
    assert shallow.end == "merge"
    assert [t for t, _ in shallow.nodes] == [0, 1, 2]
    assert deep.max_persistence > shallow.max_persistence


def test_split_track_child():
    s = merging_wells_series().reversed()
    feats, res = run(s, 4.0)
    child = [t for t in res.tracks if t.start == "split"]
    assert len(child) == 1
    assert [t for t, _ in child[0].nodes] == [2, 3, 4]


def test_death_event():
    s = feature_death_series()
    feats, res = run(s, 5.0)
    assert [len(f) for f in feats] == [2, 1]
    deaths = [e for e in res.events if e.kind == "death"]
    assert len(deaths) == 1
    assert deaths[0].timestep == 0
    tracks_ended = [t for t in res.tracks if t.end == "death"]
    assert len(tracks_ended) == 1


def test_birth_event_on_reversal():
    s = feature_death_series().reversed()
    feats, res = run(s, 5.0)
    births = [e for e in res.events if e.kind == "birth"]
    # one initial birth at t=0 plus the appearing feature at t=1
    assert [(e.kind, e.timestep) for e in births] == [("birth", 0), ("birth", 1)]
    assert not [e for e in res.events if e.kind in ("merge", "split", "death")]


def test_swap_keeps_single_track():
    s = dominant_swap_series()
    feats, res = run(s, 12.5)
    assert [len(f) for f in feats] == [1, 1]
    assert kinds(res) == [("birth", 0)]
    assert len(res.tracks) == 1
    assert res.tracks[0].nodes == [(0, 0), (1, 0)]
    # carrier and master branch swap between the steps
    assert feats[0][0].carrier != feats[1][0].carrier
    assert feats[0][0].master_branch != feats[1][0].master_branch
    # but the member sets are the same extrema
    assert np.array_equal(feats[0][0].members, feats[1][0].members)


def test_swap_forward_score_positive():
    s = dominant_swap_series()
    feats, res = run(s, 12.5)
    fm = res.forward[0]
    assert fm.matched == {0: 0}
    assert fm.scores[0][0] > 0
    assert fm.unmatched_weight[0] == 0.0


def test_static_no_events_after_initial():
    f = np.round(np.random.default_rng(3).standard_normal((15, 15)) * 2, 2)
    s = static_series(f, 4)
    feats, res = run(s, 0.8)
    n0 = len(feats[0])
    assert all(len(fs) == n0 for fs in feats)
    assert all(e.kind == "birth" and e.timestep == 0 for e in res.events)
    assert len(res.tracks) == n0
    for tr in res.tracks:
        assert [t for t, _ in tr.nodes] == [0, 1, 2, 3]


def test_translation_single_track():
    s = translating_well_series(steps=6, speed=3.0)
    feats, res = run(s, 5.0)
    main = [t for t in res.tracks if len(t.nodes) == 6]
    assert len(main) == 1


@pytest.mark.parametrize(
    "weights",
    [
        MatchWeights("uniform"),
        MatchWeights("persistence"),
        MatchWeights("manifold-overlap"),
        MatchWeights("sublevel-overlap", delta=3.0),
    ],
)
def test_all_weight_kinds_agree_on_merge(weights):
    s = merging_wells_series()
    feats, res = run(s, 4.0, weights=weights)
    merges = [e for e in res.events if e.kind == "merge"]
    assert len(merges) == 1 and merges[0].timestep == MERGE_STEP


def test_weights_validation():
    with pytest.raises(ValueError):
        MatchWeights("closest")
    with pytest.raises(ValueError):
        MatchWeights("sublevel-overlap")  # needs delta
    assert MatchWeights.from_json("uniform").kind == "uniform"
    w = MatchWeights.from_json({"kind": "sublevel-overlap", "delta": 2.0})
    assert w.delta == 2.0


def test_bookkeeping_identity():
    # every feature at t+1 is exactly one of: matched target, birth,
    # split child, or backward-connected orphan
    s = merging_wells_series()
    feats, res = run(s, 4.0)
    for i in range(len(feats) - 1):
        fwd = res.forward[i]
        n_next = len(feats[i + 1])
        targets = set(fwd.matched.values())
        births = {
            e.features[0][1]
            for e in res.events
            if e.kind == "birth" and e.timestep == i + 1
        }
        split_children = {
            f
            for e in res.events
            if e.kind == "split" and e.timestep == i + 1
            for (t, f) in e.features[1:]
        }
        # distinct targets = features at t minus deaths minus merges
        merged_away = sum(
            len(e.features) - 2
            for e in res.events
            if e.kind == "merge" and e.timestep == i + 1
        )
        assert len(targets) == len(feats[i]) - len(fwd.dead) - merged_away
        orphans = n_next - len(targets) - len(births) - len(split_children - targets)
        assert orphans >= 0


def test_events_json_shape():
    s = merging_wells_series()
    feats, res = run(s, 4.0)
    ev = res.events_json()
    assert all(set(e) == {"kind", "timestep", "features"} for e in ev)
    tr = res.tracks_json()
    assert all(
        set(t) == {"id", "nodes", "start", "end", "max_persistence"} for t in tr
    )


def test_track_timesteps_strictly_increase():
    s = merging_wells_series()
    for series in (s, s.reversed()):
        feats, res = run(series, 4.0)
        for tr in res.tracks:
            ts = [t for t, _ in tr.nodes]
            assert ts == sorted(set(ts))
