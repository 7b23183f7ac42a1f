"""Time series of scalar fields on a grid, with file formats and vertex order.

Two on-disk formats are supported:

``raw-f64``
    One little-endian binary file: magic ``TTSF``, u32 version, u32
    width, u32 height, u32 steps, u8 wrap_x flag, f64 step spacing in
    hours, then ``steps * height * width`` f64 samples row-major.

``csv-stack``
    A JSON manifest naming one CSV file per timestep plus grid
    metadata; each CSV holds ``height`` rows of ``width`` values.

Vertex comparisons use a symbolic-perturbation total order: vertices
compare by value first, equal values break by ascending vertex id, so
every field behaves as if all values were distinct.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SeriesFormatError
from .grid import GeoAxes, GridTopology

__all__ = [
    "ScalarTimeSeries",
    "load_series",
    "save_raw_f64",
    "write_csv_stack",
    "precedes",
    "sos_order",
    "sos_rank",
    "RAW_MAGIC",
    "RAW_VERSION",
]

RAW_MAGIC = b"TTSF"
RAW_VERSION = 1
_RAW_HEADER = struct.Struct("<4sIIIIBd")


@dataclass
class ScalarTimeSeries:
    """A ``(T, V)`` stack of scalar samples over one grid topology."""

    topology: GridTopology
    values: np.ndarray  # (T, V) float64, C-contiguous
    dt_hours: float = 1.0
    geo: GeoAxes | None = None
    field_range: tuple[float, float] = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim == 3:
            t, h, w = v.shape
            if (h, w) != (self.topology.height, self.topology.width):
                raise SeriesFormatError(
                    f"field shape {h}x{w} does not match grid "
                    f"{self.topology.height}x{self.topology.width}"
                )
            v = v.reshape(t, h * w)
        if v.ndim != 2 or v.shape[1] != self.topology.num_vertices:
            raise SeriesFormatError(
                f"expected (T, {self.topology.num_vertices}) values, got shape {v.shape}"
            )
        bad = ~np.isfinite(v)
        if bad.any():
            t_bad, v_bad = np.argwhere(bad)[0]
            raise SeriesFormatError(
                f"non-finite sample at timestep {t_bad}, vertex {v_bad}"
            )
        self.values = v
        self.field_range = (float(v.min()), float(v.max()))

    @property
    def num_timesteps(self) -> int:
        return self.values.shape[0]

    def grid(self, t: int) -> np.ndarray:
        """Timestep ``t`` as an ``(height, width)`` view."""
        return self.values[t].reshape(self.topology.height, self.topology.width)

    def reversed(self) -> "ScalarTimeSeries":
        """The same fields played back in reverse time order."""
        return ScalarTimeSeries(
            self.topology, self.values[::-1].copy(), self.dt_hours, self.geo
        )


# ---------------------------------------------------------------------------
# vertex order

def sos_order(values: np.ndarray, polarity: str = "minimum") -> np.ndarray:
    """Vertex ids sorted by the perturbed total order.

    For ``minimum`` polarity the order ascends by (value, id); for
    ``maximum`` it is the exact reverse, so maxima play the role minima
    play under the ascending order.
    """
    v = np.asarray(values, dtype=np.float64)
    ids = np.arange(v.shape[0], dtype=np.int64)
    if polarity == "minimum":
        return np.lexsort((ids, v))
    if polarity == "maximum":
        return np.lexsort((-ids, -v))
    raise ValueError(f"unknown polarity {polarity!r}")


def sos_rank(values: np.ndarray, polarity: str = "minimum") -> np.ndarray:
    """Position of each vertex in :func:`sos_order` (lower = deeper)."""
    order = sos_order(values, polarity)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.shape[0], dtype=np.int64)
    return rank


def precedes(series: ScalarTimeSeries, t: int, u: int, v: int) -> bool:
    """Strict total order on vertices of timestep ``t``."""
    fu, fv = series.values[t, u], series.values[t, v]
    return (fu, u) < (fv, v)


# ---------------------------------------------------------------------------
# raw-f64

def save_raw_f64(series: ScalarTimeSeries, path: str | Path) -> None:
    path = Path(path)
    topo = series.topology
    header = _RAW_HEADER.pack(
        RAW_MAGIC, RAW_VERSION, topo.width, topo.height,
        series.num_timesteps, int(topo.wrap_x), float(series.dt_hours),
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(series.values, dtype="<f8").tobytes())


def _load_raw_f64(path: Path, meta: GridTopology | None) -> ScalarTimeSeries:
    with open(path, "rb") as f:
        head = f.read(_RAW_HEADER.size)
        if len(head) < _RAW_HEADER.size:
            raise SeriesFormatError(f"{path}: truncated header")
        magic, version, width, height, steps, wrap_x, dt_hours = _RAW_HEADER.unpack(head)
        if magic != RAW_MAGIC:
            raise SeriesFormatError(f"{path}: bad magic {magic!r}, expected {RAW_MAGIC!r}")
        if version != RAW_VERSION:
            raise SeriesFormatError(f"{path}: unsupported raw-f64 version {version}")
        payload = np.frombuffer(f.read(), dtype="<f8")
    expected = steps * width * height
    if payload.size != expected:
        raise SeriesFormatError(
            f"{path}: dimension mismatch, header declares {steps}x{height}x{width} "
            f"({expected} samples) but payload holds {payload.size}"
        )
    topo = GridTopology(width=width, height=height, wrap_x=bool(wrap_x))
    if meta is not None and (meta.width, meta.height, meta.wrap_x) != (width, height, bool(wrap_x)):
        raise SeriesFormatError(
            f"{path}: header grid {width}x{height} wrap_x={bool(wrap_x)} "
            f"does not match expected {meta.width}x{meta.height} wrap_x={meta.wrap_x}"
        )
    values = payload.reshape(steps, height * width).astype(np.float64)
    return ScalarTimeSeries(topo, values, dt_hours=dt_hours)


# ---------------------------------------------------------------------------
# csv-stack

def write_csv_stack(series: ScalarTimeSeries, directory: str | Path,
                    manifest_name: str = "series.json") -> Path:
    """Write one CSV per timestep plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for t in range(series.num_timesteps):
        name = f"step_{t:04d}.csv"
        np.savetxt(directory / name, series.grid(t), delimiter=",", fmt="%.17g")
        names.append(name)
    manifest = {
        "width": series.topology.width,
        "height": series.topology.height,
        "wrap_x": series.topology.wrap_x,
        "dt_hours": series.dt_hours,
        "timesteps": names,
    }
    if series.geo is not None:
        manifest["geo"] = series.geo.to_dict()
    mpath = directory / manifest_name
    mpath.write_text(json.dumps(manifest, indent=2))
    return mpath


def _load_csv_stack(path: Path, meta: GridTopology | None) -> ScalarTimeSeries:
    if path.is_dir():
        path = path / "series.json"
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SeriesFormatError(f"{path}: unreadable csv-stack manifest: {e}") from e
    for key in ("width", "height", "timesteps"):
        if key not in manifest:
            raise SeriesFormatError(f"{path}: manifest missing {key!r}")
    topo = GridTopology(
        width=int(manifest["width"]),
        height=int(manifest["height"]),
        wrap_x=bool(manifest.get("wrap_x", False)),
    )
    if meta is not None and (meta.width, meta.height, meta.wrap_x) != (
        topo.width, topo.height, topo.wrap_x,
    ):
        raise SeriesFormatError(
            f"{path}: manifest grid does not match expected {meta.width}x{meta.height}"
        )
    geo = GeoAxes.from_dict(manifest["geo"]) if "geo" in manifest else None
    steps = []
    for name in manifest["timesteps"]:
        fpath = path.parent / name
        try:
            arr = np.loadtxt(fpath, delimiter=",", dtype=np.float64, ndmin=2)
        except (OSError, ValueError) as e:
            raise SeriesFormatError(f"{fpath}: unreadable timestep CSV: {e}") from e
        if arr.shape != (topo.height, topo.width):
            raise SeriesFormatError(
                f"{fpath}: dimension mismatch, got {arr.shape[0]}x{arr.shape[1]}, "
                f"manifest declares {topo.height}x{topo.width}"
            )
        steps.append(arr.ravel())
    if not steps:
        raise SeriesFormatError(f"{path}: manifest lists no timesteps")
    values = np.stack(steps)
    return ScalarTimeSeries(topo, values, dt_hours=float(manifest.get("dt_hours", 1.0)), geo=geo)


def load_series(path: str | Path, format: str = "raw-f64",
                meta: GridTopology | None = None) -> ScalarTimeSeries:
    """Load a series from disk.

    ``meta``, when given, is cross-checked against the file's own grid
    metadata and a mismatch raises :class:`SeriesFormatError`.
    """
    path = Path(path)
    if not path.exists():
        raise SeriesFormatError(f"{path}: no such file")
    if format == "raw-f64":
        return _load_raw_f64(path, meta)
    if format == "csv-stack":
        return _load_csv_stack(path, meta)
    raise SeriesFormatError(f"unknown series format {format!r}")
