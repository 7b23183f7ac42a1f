"""Synthetic test fields with analytically known topology.

The cone-well construction keeps every interesting value exact on the
integer lattice: wells sit on one row, so saddle heights between them
are plain integer-arithmetic minima along that row.
"""

from __future__ import annotations

import numpy as np

from .grid import GridTopology
from .series import ScalarTimeSeries

__all__ = [
    "cone_wells_field",
    "three_well_series",
    "merging_wells_series",
    "gaussian_merge_series",
    "dominant_swap_series",
    "feature_death_series",
    "translating_well_series",
    "traveling_waves_series",
    "static_series",
    "MERGE_STEP",
    "GAUSSIAN_MERGE_STEP",
]

# timestep at which merging_wells_series collapses to one feature
MERGE_STEP = 3
# timestep at which gaussian_merge_series loses its second minimum
GAUSSIAN_MERGE_STEP = 3


def cone_wells_field(
    topo: GridTopology,
    wells: list[tuple[float, float, float]],
    plateau: float,
    slope: float = 1.0,
) -> np.ndarray:
    """min over wells of (bottom + slope * distance), clipped at plateau.

    wells are (x, y, bottom). Distance is Euclidean, wrap-aware on
    cyclic axes. Returns an (H, W) array.
    """
    xs = np.arange(topo.width, dtype=np.float64)[None, :]
    ys = np.arange(topo.height, dtype=np.float64)[:, None]
    f = np.full((topo.height, topo.width), float(plateau))
    for wx, wy, bottom in wells:
        dx = np.abs(xs - wx)
        if topo.wrap_x:
            dx = np.minimum(dx, topo.width - dx)
        dy = np.abs(ys - wy)
        if topo.wrap_y:
            dy = np.minimum(dy, topo.height - dy)
        f = np.minimum(f, bottom + slope * np.hypot(dx, dy))
    return f


def three_well_series() -> ScalarTimeSeries:
    """100x50, one step, three nested wells on row y=20.

    Bottoms 40.0 / 42.0 / 43.5 at x=15/26/32, unit slope, plateau 98.
    Row arithmetic gives saddles at 46.0 (between wells 1-2) and 45.5
    (between 2-3), hence persistences 58.0 / 4.0 / 2.0 and value range
    (40.0, 98.0).
    """
    topo = GridTopology(100, 50)
    f = cone_wells_field(
        topo, [(15.0, 20.0, 40.0), (26.0, 20.0, 42.0), (32.0, 20.0, 43.5)], 98.0
    )
    return ScalarTimeSeries(topo, f[None])


def merging_wells_series() -> ScalarTimeSeries:
    """80x40, five steps: a shallow well approaches a deep one.

    Deep well (bottom 10) fixed at x=30, shallow well (bottom 12) at
    x=30+d with d = 16,14,12,9,7. Row saddles are 19,18,17,15,14, so
    the shallow branch persistence decays 7,6,5,3,2: with a constant
    delta of 4 the two features collapse into one at step MERGE_STEP.
    """
    topo = GridTopology(80, 40)
    steps = []
    for d in (16, 14, 12, 9, 7):
        steps.append(
            cone_wells_field(
                topo, [(30.0, 20.0, 10.0), (30.0 + d, 20.0, 12.0)], 60.0
            )
        )
    return ScalarTimeSeries(topo, np.stack(steps))


def gaussian_merge_series() -> ScalarTimeSeries:
    """64x32, five steps: two Gaussian depressions approach and fuse.

    Depths 20 (fixed at x=24) and 12 (at x=24+d), both sigma 3, on a
    plateau of 30. Separations d = 18,16,14,6,5: at d >= 14 the shallow
    branch keeps persistence above 9.8, at d <= 6 its minimum no longer
    exists at all, so any delta below 9 puts the merge exactly at
    GAUSSIAN_MERGE_STEP regardless of threshold placement. Reversing
    the series turns the merge into a split at step 2.
    """
    topo = GridTopology(64, 32)
    xs = np.arange(64, dtype=np.float64)[None, :]
    ys = np.arange(32, dtype=np.float64)[:, None]
    steps = []
    for d in (18.0, 16.0, 14.0, 6.0, 5.0):
        r1 = (xs - 24.0) ** 2 + (ys - 16.0) ** 2
        r2 = (xs - (24.0 + d)) ** 2 + (ys - 16.0) ** 2
        steps.append(
            30.0
            - 20.0 * np.exp(-r1 / (2.0 * 3.0**2))
            - 12.0 * np.exp(-r2 / (2.0 * 3.0**2))
        )
    return ScalarTimeSeries(topo, np.stack(steps))


def _bowl_with_dimples(
    topo: GridTopology, bottom_a: float, bottom_b: float
) -> np.ndarray:
    xs = np.arange(topo.width, dtype=np.float64)[None, :]
    ys = np.arange(topo.height, dtype=np.float64)[:, None]
    ra = np.hypot(xs - 32.0, ys - 32.0)
    rb = np.hypot(xs - 42.0, ys - 32.0)
    floor = 12.0 + 0.05 * ra + 3.0 * np.maximum(0.0, ra - 20.0)
    return np.minimum(floor, np.minimum(bottom_a + 2.0 * ra, bottom_b + 2.0 * rb))


def dominant_swap_series() -> ScalarTimeSeries:
    """64x64, two steps: which of two dimples is deeper swaps.

    A tilted bowl (floor 12 + 0.05 r, steep wall past r=20, centered at
    (32,32)) holds dimples at (32,32) and (42,32) with bottoms 3.0/2.5,
    swapped in the second step. The saddle between them is 12.25, so
    with a constant delta of 12.5 both dimples form one feature whose
    carrier swaps. The cut level 2.5 + 12.5 = 15 lies on the wall, which
    never moves, so the outline is identical in both steps.
    """
    topo = GridTopology(64, 64)
    return ScalarTimeSeries(
        topo,
        np.stack(
            [
                _bowl_with_dimples(topo, 3.0, 2.5),
                _bowl_with_dimples(topo, 2.5, 3.0),
            ]
        ),
    )


def feature_death_series() -> ScalarTimeSeries:
    """72x32, two steps: one of two wells decays below the depth scale.

    Wells at x=20 and x=50 on row y=16, plateau 30. Step 0 bottoms are
    6 and 4 (row saddle 20, persistences 14 and 26). Step 1 raises the
    first bottom to 24 (saddle 29, persistence 5): with delta 5 it is
    neither carrier (5 > 5 fails) nor attachable (24 > 4 + 5), so its
    feature dies.
    """
    topo = GridTopology(72, 32)
    f0 = cone_wells_field(topo, [(20.0, 16.0, 6.0), (50.0, 16.0, 4.0)], 30.0)
    f1 = cone_wells_field(topo, [(20.0, 16.0, 24.0), (50.0, 16.0, 4.0)], 30.0)
    return ScalarTimeSeries(topo, np.stack([f0, f1]))


def translating_well_series(
    steps: int = 6, speed: float = 3.0, wrap_x: bool = True
) -> ScalarTimeSeries:
    """48x24, one well drifting in +x, optionally across the seam."""
    topo = GridTopology(48, 24, wrap_x=wrap_x)
    frames = [
        cone_wells_field(topo, [((40.0 + speed * t) % 48.0, 12.0, 2.0)], 30.0)
        for t in range(steps)
    ]
    return ScalarTimeSeries(topo, np.stack(frames))


def traveling_waves_series(
    width: int = 320, height: int = 160, steps: int = 120, dt_hours: float = 6.0
) -> ScalarTimeSeries:
    """Sum of drifting smooth modes on an x-wrapped grid.

    Deterministic, no RNG; rich enough in extrema for load and timing
    tests at the stated size.
    """
    topo = GridTopology(width, height, wrap_x=True)
    x = np.arange(width)[None, None, :] / width
    y = np.arange(height)[None, :, None] / height
    t = np.arange(steps)[:, None, None].astype(np.float64)
    tau = 2.0 * np.pi
    f = (
        np.sin(tau * (3 * x - 0.07 * t)) * np.cos(tau * 2 * y)
        + 0.6 * np.sin(tau * (5 * x + 0.031 * t)) * np.sin(tau * (3 * y + 0.011 * t))
        + 0.25 * np.cos(tau * (x - 0.013 * t + 0.3)) * np.cos(tau * y)
    )
    return ScalarTimeSeries(topo, f, dt_hours=dt_hours)


def static_series(field2d: np.ndarray, steps: int, **topo_kw) -> ScalarTimeSeries:
    """Tile one frame: every per-step structure must then be identical."""
    field2d = np.asarray(field2d, dtype=np.float64)
    h, w = field2d.shape
    topo = GridTopology(w, h, **topo_kw)
    return ScalarTimeSeries(topo, np.repeat(field2d[None], steps, axis=0))
