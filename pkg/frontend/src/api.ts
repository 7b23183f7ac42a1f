// Typed client for the tracking-pipeline HTTP API.
//
// Every number the explorer displays originates in one of these responses;
// the client never recomputes topology from the raw field.

export interface GridInfo {
  width: number;
  height: number;
  wrap_x: boolean;
  wrap_y: boolean;
}

export interface GeoAxes {
  lon0: number;
  dlon: number;
  lat0: number;
  dlat: number;
}

export interface Meta {
  format_version: number;
  package_version: string;
  grid: GridInfo;
  geo: GeoAxes | null;
  dt_hours: number;
  num_timesteps: number;
  field_range: [number, number];
  polarities: string[];
}

export interface FieldSlice {
  t: number;
  stride: number;
  width: number;
  height: number;
  values: number[][]; // values[row][col], row 0 at y = 0
}

// Graph node/edge tables are columnar; row i of nodes is one extremum.
// Node ids are global over the window, grouped by timestep in step-local
// order, so the i-th row of a timestep is that step's extremum index i.
export interface GraphNodes {
  id: number[];
  timestep: number[];
  vertex: number[];
  value: number[];
  persistence: number[];
  x: number[];
  y: number[];
  lon?: number[];
  lat?: number[];
}

export interface GraphEdges {
  src: number[];
  dst: number[];
  length: number[];
  abs_dvalue: number[];
  d_persistence: number[];
}

export interface GraphView {
  polarity: string;
  nodes: GraphNodes;
  forward_edges: GraphEdges;
  backward_edges: GraphEdges;
}

export type DeltaJson = number | { kind: "constant" | "percent"; value: number };

export interface RoiBox {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

export type DescriptorKind =
  | "local-offset"
  | "persistence-threshold"
  | "global-threshold";

export interface DescriptorJson {
  kind: DescriptorKind;
  polarity?: "minimum" | "maximum";
  delta?: DeltaJson;
  threshold?: number;
  threshold_percent?: number;
  representative?: "carrier" | "deepest";
  attach?: "transitive" | "direct";
  roi?: RoiBox[];
}

export interface PropRangeJson {
  prop: string;
  min?: number;
  max?: number;
}

export interface FilterJson {
  t0?: number;
  t1?: number;
  boxes?: RoiBox[]; // union within the list
  boxes_and?: RoiBox[][]; // further groups, intersected
  node?: PropRangeJson[];
  edge?: PropRangeJson[];
}

export interface FeatureJson {
  id: number;
  timestep: number;
  carrier: number; // extremum index within its timestep
  members: number[];
  representative: number;
  representative_value: number;
  level: number;
  master_branch: number;
  master_persistence: number;
  geometry?: number[][][]; // closed [x, y] loops, last point repeats the first
  members_outside_geometry?: number;
}

export interface FeatureStep {
  timestep: number;
  features: FeatureJson[];
}

export interface FeaturesResponse {
  t0: number;
  t1: number;
  descriptor: DescriptorJson;
  steps: FeatureStep[];
}

export type WeightKind =
  | "persistence"
  | "uniform"
  | "manifold-overlap"
  | "sublevel-overlap";

export interface WeightsJson {
  kind: WeightKind;
  delta?: number;
}

export type EventKind = "birth" | "death" | "merge" | "split";

export interface EventJson {
  kind: EventKind;
  timestep: number;
  features: [number, number][]; // [timestep, feature id] pairs
}

export interface TrackJson {
  id: number;
  start: string;
  end: string;
  max_persistence: number;
  nodes: [number, number][]; // [timestep, feature id] per step, consecutive
}

export interface TracksResponse extends FeaturesResponse {
  weights: WeightsJson;
  events: EventJson[];
  tracks: TrackJson[];
}

export interface ExtremumTrackNode {
  id: number;
  timestep: number;
  vertex: number;
  value: number;
  persistence: number;
  x: number;
  y: number;
  lon?: number;
  lat?: number;
}

export interface ExtremumTrack {
  seed: number;
  nodes: ExtremumTrackNode[];
}

export interface FeaturesRequest {
  descriptor: DescriptorJson;
  t0?: number;
  t1?: number;
  with_geometry?: boolean;
}

export interface TracksRequest {
  descriptor: DescriptorJson;
  weights?: WeightsJson;
  t0?: number;
  t1?: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

interface RequestOptions {
  signal?: AbortSignal;
}

async function toError(res: Response): Promise<ApiError> {
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") detail = body.detail;
    else if (body && body.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body, keep the status text
  }
  return new ApiError(res.status, detail);
}

export class ApiClient {
  constructor(
    public readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async get<T>(path: string, opts: RequestOptions = {}): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, { signal: opts.signal });
    if (!res.ok) throw await toError(res);
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown, opts: RequestOptions = {}): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal: opts.signal,
    });
    if (!res.ok) throw await toError(res);
    return (await res.json()) as T;
  }

  meta(opts?: RequestOptions): Promise<Meta> {
    return this.get("/meta", opts);
  }

  field(t: number, stride = 1, opts?: RequestOptions): Promise<FieldSlice> {
    return this.get(`/field/${t}?stride=${stride}`, opts);
  }

  graph(
    params: { filter?: FilterJson; t0?: number; t1?: number; polarity?: string } = {},
    opts?: RequestOptions,
  ): Promise<GraphView> {
    const q = new URLSearchParams();
    if (params.filter) q.set("filter", JSON.stringify(params.filter));
    if (params.t0 !== undefined) q.set("t0", String(params.t0));
    if (params.t1 !== undefined) q.set("t1", String(params.t1));
    if (params.polarity) q.set("polarity", params.polarity);
    const qs = q.toString();
    return this.get(`/graph${qs ? "?" + qs : ""}`, opts);
  }

  features(req: FeaturesRequest, opts?: RequestOptions): Promise<FeaturesResponse> {
    return this.post("/features", req, opts);
  }

  tracks(req: TracksRequest, opts?: RequestOptions): Promise<TracksResponse> {
    return this.post("/tracks", req, opts);
  }

  extremumTrack(
    t: number,
    localId: number,
    params: { filter?: FilterJson; polarity?: string } = {},
    opts?: RequestOptions,
  ): Promise<ExtremumTrack> {
    const q = new URLSearchParams();
    if (params.filter) q.set("filter", JSON.stringify(params.filter));
    if (params.polarity) q.set("polarity", params.polarity);
    const qs = q.toString();
    return this.get(`/minimum/${t}/${localId}/track${qs ? "?" + qs : ""}`, opts);
  }
}
