// Builds the map's layer stack for one time cursor from server responses:
// scalar backdrop with iso-lines, minima glyphs scaled by persistence, red
// feature contours, track polylines and merge/split glyphs. Everything here
// is a rearrangement of response fields; no topology is computed locally.

import type {
  EventKind,
  ExtremumTrack,
  FeatureJson,
  FeaturesResponse,
  FieldSlice,
  GraphView,
  Meta,
  TracksResponse,
} from "./api.js";
import type { Selection } from "./state.js";

export interface MinimaGlyph {
  localId: number; // extremum index within the cursor timestep
  x: number;
  y: number;
  value: number;
  persistence: number;
  radius: number;
  selected: boolean;
}

export interface FeatureContour {
  featureId: number;
  loops: number[][][];
  selected: boolean;
}

export interface TrackPoint {
  t: number;
  x: number;
  y: number;
}

export interface TrackPolyline {
  trackId: number | null; // null for a raw extremum track
  points: TrackPoint[];
  highlighted: boolean;
}

export interface EventGlyph {
  kind: EventKind;
  timestep: number;
  x: number;
  y: number;
  atCursor: boolean;
}

export type MapLayer =
  | { kind: "backdrop"; field: FieldSlice; range: [number, number]; stale: boolean }
  | { kind: "isolines"; field: FieldSlice; levels: number[]; stale: boolean }
  | { kind: "glyphs"; glyphs: MinimaGlyph[]; stale: boolean }
  | { kind: "contours"; contours: FeatureContour[]; stale: boolean }
  | { kind: "tracks"; lines: TrackPolyline[]; stale: boolean }
  | { kind: "events"; glyphs: EventGlyph[]; stale: boolean }
  | { kind: "banner"; text: string };

export interface MapInputs {
  meta: Meta | null;
  cursor: number;
  field: FieldSlice | null;
  graph: GraphView | null;
  features: FeaturesResponse | null;
  tracks: TracksResponse | null;
  selection: Selection | null;
  selectionTrack: ExtremumTrack | null; // /minimum/{t}/{id}/track for the selection
  offline: boolean;
}

// Graph node rows grouped per timestep. Row order inside a group is the
// step-local extremum order, which is what feature member indices mean.
export function nodeRowsByTimestep(g: GraphView): Map<number, number[]> {
  const rows = new Map<number, number[]>();
  const ts = g.nodes.timestep;
  const order = ts.map((_, i) => i).sort((a, b) => ts[a] - ts[b] || g.nodes.id[a] - g.nodes.id[b]);
  for (const i of order) {
    let bucket = rows.get(ts[i]);
    if (!bucket) {
      bucket = [];
      rows.set(ts[i], bucket);
    }
    bucket.push(i);
  }
  return rows;
}

export function glyphRadius(persistence: number, maxPersistence: number, rMin = 3, rMax = 14): number {
  if (maxPersistence <= 0) return rMin;
  return rMin + (rMax - rMin) * Math.min(1, persistence / maxPersistence);
}

function isolineLevels(range: [number, number], n = 8): number[] {
  const [lo, hi] = range;
  if (!(hi > lo)) return [];
  const step = (hi - lo) / (n + 1);
  return Array.from({ length: n }, (_, i) => lo + (i + 1) * step);
}

function findStep(resp: FeaturesResponse, t: number): FeatureJson[] | null {
  const step = resp.steps.find((s) => s.timestep === t);
  return step ? step.features : null;
}

function featurePosition(
  resp: FeaturesResponse,
  rows: Map<number, number[]>,
  g: GraphView,
  t: number,
  featureId: number,
): TrackPoint | null {
  const feats = findStep(resp, t);
  const feat = feats?.find((f) => f.id === featureId);
  const bucket = rows.get(t);
  if (!feat || !bucket || feat.representative >= bucket.length) return null;
  const row = bucket[feat.representative];
  return { t, x: g.nodes.x[row], y: g.nodes.y[row] };
}

export function buildLayerStack(inp: MapInputs): MapLayer[] {
  const layers: MapLayer[] = [];
  const stale = inp.offline;

  if (inp.field) {
    const range: [number, number] = inp.meta
      ? inp.meta.field_range
      : [Math.min(...inp.field.values.flat()), Math.max(...inp.field.values.flat())];
    layers.push({ kind: "backdrop", field: inp.field, range, stale });
    const levels = isolineLevels(range);
    if (levels.length > 0) {
      layers.push({ kind: "isolines", field: inp.field, levels, stale });
    }
  }

  const rows = inp.graph ? nodeRowsByTimestep(inp.graph) : null;

  if (inp.graph && rows) {
    const bucket = rows.get(inp.cursor) ?? [];
    const maxPers = inp.graph.nodes.persistence.reduce((m, p) => Math.max(m, p), 0);
    const glyphs: MinimaGlyph[] = bucket.map((row, local) => ({
      localId: local,
      x: inp.graph!.nodes.x[row],
      y: inp.graph!.nodes.y[row],
      value: inp.graph!.nodes.value[row],
      persistence: inp.graph!.nodes.persistence[row],
      radius: glyphRadius(inp.graph!.nodes.persistence[row], maxPers),
      selected:
        inp.selection?.kind === "minimum" &&
        inp.selection.timestep === inp.cursor &&
        inp.selection.id === local,
    }));
    if (glyphs.length > 0) layers.push({ kind: "glyphs", glyphs, stale });
  }

  if (inp.features) {
    const feats = findStep(inp.features, inp.cursor) ?? [];
    const contours: FeatureContour[] = feats
      .filter((f) => f.geometry && f.geometry.length > 0)
      .map((f) => ({
        featureId: f.id,
        loops: f.geometry!,
        selected:
          inp.selection?.kind === "feature" &&
          inp.selection.timestep === inp.cursor &&
          inp.selection.id === f.id,
      }));
    if (contours.length > 0) layers.push({ kind: "contours", contours, stale });
  }

  const lines: TrackPolyline[] = [];
  if (inp.tracks && inp.graph && rows) {
    for (const tr of inp.tracks.tracks) {
      const points: TrackPoint[] = [];
      for (const [t, fid] of tr.nodes) {
        const p = featurePosition(inp.tracks, rows, inp.graph, t, fid);
        if (p) points.push(p);
      }
      if (points.length > 1) {
        const highlighted =
          inp.selection?.kind === "feature" &&
          tr.nodes.some(([t, fid]) => t === inp.selection!.timestep && fid === inp.selection!.id);
        lines.push({ trackId: tr.id, points, highlighted });
      }
    }
  }
  if (inp.selectionTrack && inp.selection?.kind === "minimum") {
    lines.push({
      trackId: null,
      points: inp.selectionTrack.nodes.map((n) => ({ t: n.timestep, x: n.x, y: n.y })),
      highlighted: true,
    });
  }
  if (lines.length > 0) layers.push({ kind: "tracks", lines, stale });

  if (inp.tracks && inp.graph && rows) {
    const glyphs: EventGlyph[] = [];
    for (const ev of inp.tracks.events) {
      if (ev.kind !== "merge" && ev.kind !== "split") continue;
      const pts = ev.features
        .map(([t, fid]) => featurePosition(inp.tracks!, rows, inp.graph!, t, fid))
        .filter((p): p is TrackPoint => p !== null);
      if (pts.length === 0) continue;
      glyphs.push({
        kind: ev.kind,
        timestep: ev.timestep,
        x: pts.reduce((s, p) => s + p.x, 0) / pts.length,
        y: pts.reduce((s, p) => s + p.y, 0) / pts.length,
        atCursor: ev.timestep === inp.cursor,
      });
    }
    if (glyphs.length > 0) layers.push({ kind: "events", glyphs, stale });
  }

  if (inp.offline) {
    layers.push({ kind: "banner", text: "server unreachable, showing stale data" });
  }
  return layers;
}
