import numpy as np
import pytest

from topotrack import GeoAxes, GridTopology, neighbor_table, vertex_neighbors
from topotrack.grid import point_distance

from .oracles import brute_neighbors


def test_interior_vertex_3x3():
    topo = GridTopology(3, 3)
    assert vertex_neighbors(topo, 4) == [0, 1, 3, 5, 7, 8]


def test_corner_vertex_3x3():
    topo = GridTopology(3, 3)
    assert vertex_neighbors(topo, 0) == [1, 3, 4]


def test_corner_wrap_x_4x3():
    topo = GridTopology(4, 3, wrap_x=True)
    assert vertex_neighbors(topo, 0) == [1, 3, 4, 5]


def test_against_brute_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(20):
        w = int(rng.integers(2, 9))
        h = int(rng.integers(2, 9))
        wx = bool(rng.integers(0, 2))
        wy = bool(rng.integers(0, 2))
        topo = GridTopology(w, h, wrap_x=wx, wrap_y=wy)
        for v in range(topo.num_vertices):
            assert vertex_neighbors(topo, v) == brute_neighbors(
                w, h, v, wrap_x=wx, wrap_y=wy
            ), (w, h, wx, wy, v)


def test_neighbor_symmetry():
    topo = GridTopology(6, 5, wrap_x=True)
    table = neighbor_table(topo)
    for v in range(topo.num_vertices):
        for u in table[v]:
            if u >= 0:
                assert v in table[u]


def test_neighbor_table_matches_scalar_api():
    topo = GridTopology(5, 4, wrap_x=True)
    table = neighbor_table(topo)
    for v in range(topo.num_vertices):
        got = sorted(int(u) for u in table[v] if u >= 0)
        assert got == vertex_neighbors(topo, v)


def test_degree_bounds_interior():
    # interior vertices always see all six offsets
    topo = GridTopology(8, 8)
    table = neighbor_table(topo)
    for y in range(1, 7):
        for x in range(1, 7):
            v = y * 8 + x
            assert (table[v] >= 0).sum() == 6


def test_vertex_id_roundtrip():
    topo = GridTopology(7, 3)
    for v in range(topo.num_vertices):
        x, y = topo.vertex_xy(v)
        assert topo.vertex_id(x, y) == v


def test_bad_vertex_raises():
    topo = GridTopology(3, 3)
    with pytest.raises(IndexError):
        vertex_neighbors(topo, 9)
    with pytest.raises(IndexError):
        vertex_neighbors(topo, -1)


def test_min_extent():
    with pytest.raises(ValueError):
        GridTopology(1, 5)


def test_euclidean_distance_wrap():
    topo = GridTopology(10, 4, wrap_x=True)
    # x=9 to x=0 crosses the seam: distance 1, not 9
    assert point_distance(topo, 9.0, 2.0, 0.0, 2.0, None) == pytest.approx(1.0)
    assert point_distance(topo, 2.0, 0.0, 2.0, 3.0, None) == pytest.approx(3.0)


def test_haversine_quarter_meridian():
    topo = GridTopology(360, 181, wrap_x=True)
    geo = GeoAxes(lon0=0.0, dlon=1.0, lat0=-90.0, dlat=1.0)
    # equator to pole along one meridian: quarter of the great circle
    d = point_distance(topo, 0.0, 90.0, 0.0, 180.0, geo)
    assert d == pytest.approx(np.pi / 2 * 6371.0, rel=1e-6)


def test_geo_axes_roundtrip():
    geo = GeoAxes(lon0=-180.0, dlon=1.125, lat0=-89.0, dlat=1.0)
    assert GeoAxes.from_dict(geo.to_dict()) == geo
    assert geo.lon(np.array([0.0, 160.0]))[1] == pytest.approx(0.0)
