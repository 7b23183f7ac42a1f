"""HTTP query service over an opened artifact.

Responses are canonical JSON (sorted keys, fixed separators) and the
serialized bytes are LRU-cached per request key, so a replayed request
returns byte-identical content with ``X-Cache: hit``.
"""

from __future__ import annotations

import json
from collections import OrderedDict
from typing import Literal

from fastapi import FastAPI, HTTPException, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .artifact import ArtifactStore
from .errors import ArtifactError, FilterError, SeedFilteredError
from .features import DescriptorSpec
from .trackgraph import FilterSpec
from .tracking import MatchWeights

__all__ = ["create_app"]


class DeltaModel(BaseModel):
    kind: Literal["constant", "percent", "grid"] = "constant"
    value: float | None = None
    values: list[float] | None = None


class DescriptorModel(BaseModel):
    kind: Literal["local-offset", "persistence-threshold", "global-threshold"]
    polarity: Literal["minimum", "maximum"] = "minimum"
    delta: float | DeltaModel | None = None
    threshold: float | None = None
    threshold_percent: float | None = None
    representative: Literal["carrier", "deepest"] = "carrier"
    attach: Literal["transitive", "direct"] = "transitive"
    roi: list[dict] | None = None

    def to_spec(self) -> DescriptorSpec:
        obj = self.model_dump(exclude_none=True)
        try:
            return DescriptorSpec.from_json(obj)
        except (FilterError, ValueError) as e:
            raise HTTPException(status_code=422, detail=str(e)) from e


class WeightsModel(BaseModel):
    kind: Literal[
        "persistence", "uniform", "manifold-overlap", "sublevel-overlap"
    ] = "persistence"
    delta: float | None = None


class FeaturesRequest(BaseModel):
    descriptor: DescriptorModel
    t0: int | None = Field(default=None, ge=0)
    t1: int | None = Field(default=None, ge=0)
    with_geometry: bool = False


class TracksRequest(BaseModel):
    descriptor: DescriptorModel
    weights: WeightsModel = WeightsModel()
    t0: int | None = Field(default=None, ge=0)
    t1: int | None = Field(default=None, ge=0)


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


class _ByteCache:
    def __init__(self, size: int):
        self.size = size
        self.data: OrderedDict[bytes, bytes] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, key: bytes) -> bytes | None:
        got = self.data.get(key)
        if got is not None:
            self.data.move_to_end(key)
            self.hits += 1
        else:
            self.misses += 1
        return got

    def put(self, key: bytes, value: bytes) -> None:
        self.data[key] = value
        self.data.move_to_end(key)
        while len(self.data) > self.size:
            self.data.popitem(last=False)


def _parse_filter(raw: str | None, t0: int | None, t1: int | None) -> FilterSpec:
    try:
        spec = FilterSpec.from_json(raw) if raw else FilterSpec()
    except FilterError as e:
        raise HTTPException(status_code=400, detail=str(e)) from e
    if t0 is not None or t1 is not None:
        spec = spec.compose(FilterSpec(t0=t0, t1=t1))
    return spec


def create_app(store: ArtifactStore, cache_size: int = 64) -> FastAPI:
    app = FastAPI(title="topotrack", version=store.manifest["package_version"])
    # browser clients (the explorer UI) load from a different origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    cache = _ByteCache(cache_size)
    app.state.store = store
    app.state.cache = cache

    def cached_json(key_obj, build) -> Response:
        key = _canonical(key_obj)
        body = cache.get(key)
        state = "hit"
        if body is None:
            body = _canonical(build())
            cache.put(key, body)
            state = "miss"
        return Response(
            content=body, media_type="application/json", headers={"X-Cache": state}
        )

    def _http_errors(fn):
        try:
            return fn()
        except SeedFilteredError as e:
            raise HTTPException(
                status_code=409,
                detail=f"seed nodes excluded by the active filter: {e.seeds}",
            ) from e
        except FilterError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        except ArtifactError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        except IndexError as e:
            raise HTTPException(status_code=404, detail=str(e)) from e

    @app.get("/meta")
    def meta():
        return cached_json(["meta"], store.meta)

    @app.get("/field/{t}")
    def field(t: int, stride: int = Query(default=1, ge=1)):
        return _http_errors(
            lambda: cached_json(["field", t, stride], lambda: store.field_slice(t, stride))
        )

    @app.get("/graph")
    def graph(
        filter: str | None = None,
        t0: int | None = None,
        t1: int | None = None,
        polarity: str = "minimum",
    ):
        spec = _parse_filter(filter, t0, t1)
        return _http_errors(
            lambda: cached_json(
                ["graph", spec.to_json(), polarity],
                lambda: store.graph_view(spec, polarity),
            )
        )

    @app.post("/features")
    def features(req: FeaturesRequest):
        spec = req.descriptor.to_spec()

        def build():
            t0, t1 = store.window(req.t0, req.t1)
            per_step = store.features(spec, t0, t1, req.with_geometry)
            return {
                "t0": t0,
                "t1": t1,
                "descriptor": spec.to_json(),
                "steps": [
                    {
                        "timestep": t0 + i,
                        "features": [f.to_json(req.with_geometry) for f in feats],
                    }
                    for i, feats in enumerate(per_step)
                ],
            }

        return _http_errors(
            lambda: cached_json(
                ["features", spec.to_json(), req.t0, req.t1, req.with_geometry], build
            )
        )

    @app.post("/tracks")
    def tracks(req: TracksRequest):
        spec = req.descriptor.to_spec()
        try:
            weights = MatchWeights(kind=req.weights.kind, delta=req.weights.delta)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e

        def build():
            t0, t1 = store.window(req.t0, req.t1)
            feats, res = store.tracks(spec, weights, t0, t1)
            return {
                "t0": t0,
                "t1": t1,
                "descriptor": spec.to_json(),
                "weights": weights.to_json(),
                "steps": [
                    {
                        "timestep": t0 + i,
                        "features": [f.to_json() for f in fs],
                    }
                    for i, fs in enumerate(feats)
                ],
                "events": res.events_json(),
                "tracks": res.tracks_json(),
            }

        return _http_errors(
            lambda: cached_json(
                ["tracks", spec.to_json(), weights.to_json(), req.t0, req.t1], build
            )
        )

    @app.get("/minimum/{t}/{local}/track")
    def minimum_track(
        t: int,
        local: int,
        filter: str | None = None,
        polarity: str = "minimum",
    ):
        spec = _parse_filter(filter, None, None)
        return _http_errors(
            lambda: cached_json(
                ["track", t, local, spec.to_json(), polarity],
                lambda: store.extremum_track(t, local, spec, polarity),
            )
        )

    @app.get("/cache/stats")
    def cache_stats():
        return {
            "entries": len(cache.data),
            "hits": cache.hits,
            "misses": cache.misses,
            "size": cache.size,
        }

    return app
