import numpy as np
import pytest

from topotrack import (
    Box,
    DeltaField,
    DescriptorSpec,
    branch_decomposition,
    compute_merge_tree,
    evaluate_descriptor,
)
from topotrack.errors import FilterError
from topotrack.features import evaluate_timestep
from topotrack.synth import three_well_series

from .conftest import random_series
from .oracles import threshold_component_members


@pytest.fixture(scope="module")
def wells():
    s = three_well_series()
    bd = branch_decomposition(compute_merge_tree(s, 0, "minimum"))
    return s, bd


# well vertex ids on row y=20
M1, M2, M3 = 15 + 2000, 26 + 2000, 32 + 2000


def members_by_vertex(bd, feat):
    return sorted(int(bd.leaf_vertex[m]) for m in feat.members)


def test_three_well_fixture_numbers(wells):
    s, bd = wells
    assert s.field_range == (40.0, 98.0)
    by_leaf = {int(bd.leaf_vertex[i]): i for i in range(bd.num_branches)}
    pers = bd.persistence
    assert pers[by_leaf[M1]] == 58.0
    assert pers[by_leaf[M2]] == 4.0
    assert pers[by_leaf[M3]] == 2.0
    assert bd.death[by_leaf[M2]] == 46.0
    assert bd.death[by_leaf[M3]] == 45.5
    # nesting: M3's branch hangs off M2's, M2's off the root branch M1
    assert bd.parent[by_leaf[M3]] == by_leaf[M2]
    assert bd.parent[by_leaf[M2]] == by_leaf[M1]


def test_carrier_counts_across_depth_scales(wells):
    s, bd = wells
    for pct, want in ((2.0, 3), (5.0, 2), (10.0, 1), (15.0, 1)):
        spec = DescriptorSpec("local-offset", delta=DeltaField(percent=pct))
        feats = evaluate_timestep(s, 0, bd, spec)
        assert len(feats) == want, pct


def test_members_at_each_scale(wells):
    s, bd = wells
    spec = DescriptorSpec("local-offset", delta=DeltaField(percent=5.0))
    feats = evaluate_timestep(s, 0, bd, spec)
    assert members_by_vertex(bd, feats[0]) == [M1]
    assert members_by_vertex(bd, feats[1]) == [M2, M3]
    spec = DescriptorSpec("local-offset", delta=DeltaField(percent=10.0))
    feats = evaluate_timestep(s, 0, bd, spec)
    assert members_by_vertex(bd, feats[0]) == [M1, M2, M3]


def test_constant_delta_equals_percent(wells):
    s, bd = wells
    a = evaluate_timestep(
        s, 0, bd, DescriptorSpec("local-offset", delta=DeltaField(percent=10.0))
    )
    b = evaluate_timestep(
        s, 0, bd, DescriptorSpec("local-offset", delta=DeltaField(constant=5.8))
    )
    assert len(a) == len(b) == 1
    assert np.array_equal(a[0].members, b[0].members)
    assert a[0].level == b[0].level


def test_value_criterion_blocks_attachment(wells):
    s, bd = wells
    # delta 4.5: carriers {M1}; M2 deeper than reach 40+4.5=44.5? no,
    # 42 <= 44.5 so M2 attaches; pers(M2)=4 < 4.5 too. M3: 43.5 <= 44.5
    # and pers 2 < 4.5 -> in. Shrink to 3.0: M2 pers 4 > 3 stays carrier.
    feats = evaluate_timestep(
        s, 0, bd, DescriptorSpec("local-offset", delta=DeltaField(constant=4.5))
    )
    assert len(feats) == 1
    assert members_by_vertex(bd, feats[0]) == [M1, M2, M3]
    feats = evaluate_timestep(
        s, 0, bd, DescriptorSpec("local-offset", delta=DeltaField(constant=3.0))
    )
    assert len(feats) == 2


def test_persistence_threshold_skips_value_criterion():
    # deep narrow well far above the carrier's value band: local-offset
    # rejects it, persistence-threshold keeps it
    from topotrack import GridTopology, ScalarTimeSeries
    from topotrack.synth import cone_wells_field

    topo = GridTopology(60, 20)
    f = cone_wells_field(topo, [(10.0, 10.0, 0.0), (40.0, 10.0, 20.0)], 50.0)
    s = ScalarTimeSeries(topo, f[None])
    bd = branch_decomposition(compute_merge_tree(s, 0, "minimum"))
    by_leaf = {int(v): i for i, v in enumerate(bd.leaf_vertex)}
    i2 = by_leaf[40 + 10 * 60]
    assert bd.persistence[i2] == 5.0  # saddle 25 on the row
    lo = evaluate_timestep(
        s, 0, bd, DescriptorSpec("local-offset", delta=DeltaField(constant=6.0))
    )
    pt = evaluate_timestep(
        s,
        0,
        bd,
        DescriptorSpec("persistence-threshold", delta=DeltaField(constant=6.0)),
    )
    # f(second well) = 20 > 0 + 6: rejected by the value criterion only
    assert len(lo) == 1 and len(lo[0].members) == 1
    assert len(pt) == 1 and len(pt[0].members) == 2


def test_attach_direct_vs_transitive(wells):
    s, bd = wells
    # at 10% only M1 carries; M3's branch parent is M2 (not a carrier),
    # so direct attachment drops M3 while transitive keeps it
    tr = evaluate_timestep(
        s,
        0,
        bd,
        DescriptorSpec("local-offset", delta=DeltaField(percent=10.0)),
    )
    di = evaluate_timestep(
        s,
        0,
        bd,
        DescriptorSpec("local-offset", delta=DeltaField(percent=10.0), attach="direct"),
    )
    assert members_by_vertex(bd, tr[0]) == [M1, M2, M3]
    assert members_by_vertex(bd, di[0]) == [M1, M2]


def test_representative_deepest_vs_carrier(wells):
    s, bd = wells
    spec_c = DescriptorSpec("local-offset", delta=DeltaField(percent=10.0))
    spec_d = DescriptorSpec(
        "local-offset", delta=DeltaField(percent=10.0), representative="deepest"
    )
    fc = evaluate_timestep(s, 0, bd, spec_c)[0]
    fd = evaluate_timestep(s, 0, bd, spec_d)[0]
    # M1 is both the carrier and the deepest member here
    assert fc.representative == fd.representative
    assert fc.representative_value == 40.0
    assert fc.carrier == fc.master_branch


def test_grid_delta(wells):
    s, bd = wells
    # spatially varying delta: tiny everywhere except around M2/M3
    V = s.topology.num_vertices
    dg = np.full(V, 0.5)
    xs = np.arange(V) % 100
    ys = np.arange(V) // 100
    dg[(xs > 20) & (ys > 10) & (ys < 30)] = 3.0
    spec = DescriptorSpec("local-offset", delta=DeltaField(grid=tuple(dg)))
    feats = evaluate_timestep(s, 0, bd, spec)
    # M1 keeps its own feature (0.5 < 58), M2 carries (4 > 3),
    # M3 attaches to M2 (pers 2 < 3, value 43.5 <= 42+3)
    assert len(feats) == 2
    assert members_by_vertex(bd, feats[1]) == [M2, M3]


def test_roi_restricts_extrema(wells):
    s, bd = wells
    spec = DescriptorSpec(
        "local-offset",
        delta=DeltaField(percent=2.0),
        roi=(Box(20.0, 40.0, 10.0, 30.0),),
    )
    feats = evaluate_timestep(s, 0, bd, spec)
    got = [members_by_vertex(bd, f) for f in feats]
    assert got == [[M2], [M3]]  # M1 is outside the box


def test_global_threshold_vs_flood_fill_oracle(wells):
    s, bd = wells
    g = s.grid(0)
    mins = bd.leaf_vertex
    for level in (41.0, 44.0, 45.7, 45.9, 46.0, 50.0):
        spec = DescriptorSpec("global-threshold", threshold=level)
        feats = evaluate_timestep(s, 0, bd, spec)
        got = sorted(members_by_vertex(bd, f) for f in feats)
        want = threshold_component_members(g, level, mins)
        assert got == want, level
        for f in feats:
            assert f.level == level


def test_global_threshold_random_fields(rng):
    for _ in range(5):
        s = random_series(rng, 12, 9, ties=True)
        bd = branch_decomposition(compute_merge_tree(s, 0, "minimum"))
        g = s.grid(0)
        lo, hi = s.field_range
        for q in (0.2, 0.45, 0.8):
            level = lo + q * (hi - lo)
            spec = DescriptorSpec("global-threshold", threshold=level)
            feats = evaluate_timestep(s, 0, bd, spec)
            got = sorted(members_by_vertex(bd, f) for f in feats)
            want = threshold_component_members(g, level, bd.leaf_vertex)
            assert got == want, level


def test_global_threshold_percent(wells):
    s, bd = wells
    # 10% of (40, 98) above the low end: level 45.8, two components
    spec = DescriptorSpec("global-threshold", threshold_percent=10.0)
    feats = evaluate_timestep(s, 0, bd, spec)
    assert len(feats) == 2
    assert feats[0].level == pytest.approx(45.8)


def test_global_threshold_maximum_polarity(rng):
    s = random_series(rng, 10, 8, ties=True)
    bd = branch_decomposition(compute_merge_tree(s, 0, "maximum"))
    lo, hi = s.field_range
    level = hi - 0.3 * (hi - lo)
    spec = DescriptorSpec("global-threshold", polarity="maximum", threshold=level)
    feats = evaluate_timestep(s, 0, bd, spec)
    got = sorted(members_by_vertex(bd, f) for f in feats)
    want = threshold_component_members(
        s.grid(0), level, bd.leaf_vertex, polarity="maximum"
    )
    assert got == want


def test_feature_ids_deterministic(wells):
    s, bd = wells
    spec = DescriptorSpec("local-offset", delta=DeltaField(percent=2.0))
    a = evaluate_timestep(s, 0, bd, spec)
    b = evaluate_timestep(s, 0, bd, spec)
    assert [f.feature_id for f in a] == [0, 1, 2]
    assert [(f.feature_id, f.carrier) for f in a] == [
        (f.feature_id, f.carrier) for f in b
    ]


def test_master_branch_is_most_persistent(wells):
    s, bd = wells
    spec = DescriptorSpec("local-offset", delta=DeltaField(percent=10.0))
    f = evaluate_timestep(s, 0, bd, spec)[0]
    pers = bd.persistence[f.members]
    assert bd.persistence[f.master_branch] == pers.max()
    assert f.master_persistence == 58.0


def test_polarity_mismatch_raises(wells):
    s, bd = wells
    spec = DescriptorSpec(
        "local-offset", polarity="maximum", delta=DeltaField(constant=1.0)
    )
    with pytest.raises(ValueError):
        evaluate_timestep(s, 0, bd, spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        DescriptorSpec("local-offset")  # missing delta
    with pytest.raises(ValueError):
        DescriptorSpec("global-threshold")  # missing threshold
    with pytest.raises(ValueError):
        DescriptorSpec("global-threshold", threshold=1.0, threshold_percent=5.0)
    with pytest.raises(ValueError):
        DescriptorSpec("blobs", delta=DeltaField(constant=1.0))
    with pytest.raises(ValueError):
        DeltaField()
    with pytest.raises(ValueError):
        DeltaField(constant=1.0, percent=2.0)


def test_spec_json_roundtrip():
    spec = DescriptorSpec(
        "local-offset",
        polarity="maximum",
        delta=DeltaField(percent=7.5),
        attach="direct",
        roi=(Box(1.0, 2.0, 3.0, 4.0),),
    )
    j = spec.to_json()
    assert DescriptorSpec.from_json(j) == spec
    with pytest.raises(FilterError):
        DescriptorSpec.from_json({"kind": "local-offset", "delta": 1.0, "huh": 2})


def test_evaluate_descriptor_window(wells):
    s, bd = wells
    spec = DescriptorSpec("local-offset", delta=DeltaField(percent=5.0))
    out = evaluate_descriptor(s, [bd], spec, t0=0, t1=0)
    assert len(out) == 1 and len(out[0]) == 2
    with pytest.raises(IndexError):
        evaluate_descriptor(s, [bd], spec, t0=0, t1=3)
