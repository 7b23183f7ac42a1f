"""Command line front end.

Batch commands (precompute, features, tracks, synth, inspect) run
against local files; the ``client`` group is a thin HTTP client for a
running ``serve`` instance and does no computation of its own.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .errors import TopotrackError


def _echo_json(obj, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_descriptor(raw: str) -> dict:
    if raw.startswith("@"):
        raw = Path(raw[1:]).read_text()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise click.BadParameter(f"descriptor is not valid JSON: {e}") from e


def _parse_geo(raw: str | None):
    if raw is None:
        return None
    from .grid import GeoAxes

    try:
        lon0, dlon, lat0, dlat = (float(x) for x in raw.split(","))
    except ValueError as e:
        raise click.BadParameter("expected lon0,dlon,lat0,dlat") from e
    return GeoAxes(lon0=lon0, dlon=dlon, lat0=lat0, dlat=dlat)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
def main(verbose: bool):
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("out_dir", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["raw-f64", "csv-stack"]), default="raw-f64")
@click.option("--polarity", "polarities", multiple=True, default=("minimum",),
              type=click.Choice(["minimum", "maximum"]))
@click.option("--workers", type=int, default=None, help="parallel timesteps")
@click.option("--force", is_flag=True, help="overwrite an existing artifact")
@click.option("--geo", default=None, help="attach lon/lat axes: lon0,dlon,lat0,dlat")
def precompute(input_path, out_dir, fmt, polarities, workers, force, geo):
    """Build an artifact directory from a series file."""
    from .artifact import write_artifact
    from .series import load_series

    try:
        series = load_series(input_path, format=fmt)
        axes = _parse_geo(geo)
        if axes is not None:
            series.geo = axes
        manifest = write_artifact(
            series, out_dir, polarities=tuple(polarities), workers=workers, force=force
        )
    except TopotrackError as e:
        raise click.ClickException(str(e)) from e
    click.echo(
        f"wrote {out_dir}: {manifest['num_timesteps']} steps, "
        f"{manifest['grid']['width']}x{manifest['grid']['height']}, "
        f"{manifest['timings']['total_s']}s"
    )


@main.command()
@click.argument("artifact", type=click.Path(exists=True))
@click.option("--descriptor", required=True, help="descriptor JSON or @file")
@click.option("--t0", type=int, default=None)
@click.option("--t1", type=int, default=None)
@click.option("--geometry", is_flag=True, help="include contour outlines")
@click.option("--out", default=None, help="write JSON here instead of stdout")
def features(artifact, descriptor, t0, t1, geometry, out):
    """Evaluate a feature descriptor over a timestep window."""
    from .artifact import ArtifactStore
    from .features import DescriptorSpec

    try:
        store = ArtifactStore(artifact)
        spec = DescriptorSpec.from_json(_read_descriptor(descriptor))
        t0_, t1_ = store.window(t0, t1)
        per_step = store.features(spec, t0_, t1_, with_geometry=geometry)
    except (TopotrackError, IndexError, ValueError) as e:
        raise click.ClickException(str(e)) from e
    _echo_json(
        {
            "descriptor": spec.to_json(),
            "t0": t0_,
            "t1": t1_,
            "steps": [
                {"timestep": t0_ + i, "features": [f.to_json(geometry) for f in fs]}
                for i, fs in enumerate(per_step)
            ],
        },
        out,
    )


@main.command()
@click.argument("artifact", type=click.Path(exists=True))
@click.option("--descriptor", required=True, help="descriptor JSON or @file")
@click.option("--weights", default=None, help='e.g. {"kind":"uniform"}')
@click.option("--t0", type=int, default=None)
@click.option("--t1", type=int, default=None)
@click.option("--out", default=None)
def tracks(artifact, descriptor, weights, t0, t1, out):
    """Evaluate a descriptor and assemble feature tracks and events."""
    from .artifact import ArtifactStore
    from .features import DescriptorSpec
    from .tracking import MatchWeights

    try:
        store = ArtifactStore(artifact)
        spec = DescriptorSpec.from_json(_read_descriptor(descriptor))
        w = MatchWeights.from_json(json.loads(weights) if weights else None)
        t0_, t1_ = store.window(t0, t1)
        feats, res = store.tracks(spec, w, t0_, t1_)
    except (TopotrackError, IndexError, ValueError) as e:
        raise click.ClickException(str(e)) from e
    _echo_json(
        {
            "descriptor": spec.to_json(),
            "weights": w.to_json(),
            "t0": t0_,
            "t1": t1_,
            "steps": [
                {"timestep": t0_ + i, "features": [f.to_json() for f in fs]}
                for i, fs in enumerate(feats)
            ],
            "events": res.events_json(),
            "tracks": res.tracks_json(),
        },
        out,
    )


@main.command()
@click.argument("artifact", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8787)
@click.option("--cache-size", type=int, default=64)
def serve(artifact, host, port, cache_size):
    """Serve the artifact over HTTP."""
    import uvicorn

    from .artifact import ArtifactStore
    from .service import create_app

    try:
        store = ArtifactStore(artifact)
    except TopotrackError as e:
        raise click.ClickException(str(e)) from e
    uvicorn.run(create_app(store, cache_size=cache_size), host=host, port=port)


_SYNTH = {
    "three-well": "three_well_series",
    "merging": "merging_wells_series",
    "gaussian-merge": "gaussian_merge_series",
    "swap": "dominant_swap_series",
    "death": "feature_death_series",
    "translating": "translating_well_series",
    "waves": "traveling_waves_series",
}


@main.command()
@click.argument("name", type=click.Choice(sorted(_SYNTH)))
@click.argument("out_path", type=click.Path())
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--steps", type=int, default=None)
def synth(name, out_path, width, height, steps):
    """Write a synthetic series (raw-f64) for trials and demos."""
    from . import synth as synthmod
    from .series import save_raw_f64

    kwargs = {}
    if name == "waves":
        if width:
            kwargs["width"] = width
        if height:
            kwargs["height"] = height
        if steps:
            kwargs["steps"] = steps
    elif name == "translating" and steps:
        kwargs["steps"] = steps
    series = getattr(synthmod, _SYNTH[name])(**kwargs)
    save_raw_f64(series, out_path)
    click.echo(
        f"wrote {out_path}: {series.num_timesteps} steps, "
        f"{series.topology.width}x{series.topology.height}"
    )


@main.command()
@click.argument("artifact", type=click.Path(exists=True))
def inspect(artifact):
    """Print an artifact's manifest summary."""
    from .artifact import ArtifactStore

    try:
        store = ArtifactStore(artifact, verify=False)
    except TopotrackError as e:
        raise click.ClickException(str(e)) from e
    m = store.manifest
    click.echo(json.dumps(
        {
            "grid": m["grid"],
            "num_timesteps": m["num_timesteps"],
            "field_range": m["field_range"],
            "polarities": m["polarities"],
            "dt_hours": m["dt_hours"],
            "geo": m["geo"],
            "created": m["created"],
            "files": {k: v["bytes"] for k, v in m["files"].items()},
        },
        indent=2,
        sort_keys=True,
    ))


@main.group()
@click.option("--url", default="http://127.0.0.1:8787", show_default=True)
@click.pass_context
def client(ctx, url):
    """Query a running serve instance."""
    ctx.obj = url.rstrip("/")


def _client_get(url: str, path: str, params: dict) -> None:
    import httpx

    r = httpx.get(url + path, params={k: v for k, v in params.items() if v is not None})
    if r.status_code != 200:
        raise click.ClickException(f"{r.status_code}: {r.text}")
    sys.stdout.write(r.text + "\n")


@client.command("meta")
@click.pass_obj
def client_meta(url):
    _client_get(url, "/meta", {})


@client.command("field")
@click.argument("t", type=int)
@click.option("--stride", type=int, default=1)
@click.pass_obj
def client_field(url, t, stride):
    _client_get(url, f"/field/{t}", {"stride": stride})


@client.command("graph")
@click.option("--filter", "filter_", default=None)
@click.option("--t0", type=int, default=None)
@click.option("--t1", type=int, default=None)
@click.option("--polarity", default="minimum")
@click.pass_obj
def client_graph(url, filter_, t0, t1, polarity):
    _client_get(url, "/graph", {"filter": filter_, "t0": t0, "t1": t1, "polarity": polarity})


@client.command("features")
@click.option("--descriptor", required=True)
@click.option("--t0", type=int, default=None)
@click.option("--t1", type=int, default=None)
@click.option("--geometry", is_flag=True)
@click.pass_obj
def client_features(url, descriptor, t0, t1, geometry):
    import httpx

    body = {"descriptor": _read_descriptor(descriptor), "with_geometry": geometry}
    if t0 is not None:
        body["t0"] = t0
    if t1 is not None:
        body["t1"] = t1
    r = httpx.post(url + "/features", json=body)
    if r.status_code != 200:
        raise click.ClickException(f"{r.status_code}: {r.text}")
    sys.stdout.write(r.text + "\n")


@client.command("tracks")
@click.option("--descriptor", required=True)
@click.option("--weights", default=None)
@click.option("--t0", type=int, default=None)
@click.option("--t1", type=int, default=None)
@click.pass_obj
def client_tracks(url, descriptor, weights, t0, t1):
    import httpx

    body = {"descriptor": _read_descriptor(descriptor)}
    if weights:
        body["weights"] = json.loads(weights)
    if t0 is not None:
        body["t0"] = t0
    if t1 is not None:
        body["t1"] = t1
    r = httpx.post(url + "/tracks", json=body)
    if r.status_code != 200:
        raise click.ClickException(f"{r.status_code}: {r.text}")
    sys.stdout.write(r.text + "\n")


@client.command("track")
@click.argument("t", type=int)
@click.argument("local", type=int)
@click.option("--filter", "filter_", default=None)
@click.option("--polarity", default="minimum")
@click.pass_obj
def client_track(url, t, local, filter_, polarity):
    _client_get(url, f"/minimum/{t}/{local}/track", {"filter": filter_, "polarity": polarity})


if __name__ == "__main__":
    main()
