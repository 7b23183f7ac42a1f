// Track-ribbon layout: one horizontal lane per track over an abstract time
// axis, with markers at birth/death/merge/split events. Pure layout; the
// canvas drawing lives in render.ts.

import type { EventKind, TracksResponse } from "./api.js";

export interface LaneSegment {
  trackId: number;
  lane: number;
  t0: number;
  t1: number;
  start: string;
  end: string;
  maxPersistence: number;
}

export interface TimelineMarker {
  kind: EventKind;
  timestep: number;
  featureRefs: [number, number][];
  trackIds: number[];
  lanes: number[];
}

export interface TimelineLayout {
  t0: number;
  t1: number;
  laneCount: number;
  segments: LaneSegment[];
  markers: TimelineMarker[];
}

export function layoutTimeline(resp: TracksResponse): TimelineLayout {
  const spans = resp.tracks.map((tr) => {
    const ts = tr.nodes.map((n) => n[0]);
    return { track: tr, t0: Math.min(...ts), t1: Math.max(...ts) };
  });
  // Stable order, then greedy lane reuse: a lane frees up after its last
  // segment ends, so disjoint tracks can share a lane.
  spans.sort((a, b) => a.t0 - b.t0 || a.track.id - b.track.id);
  const laneEnds: number[] = [];
  const segments: LaneSegment[] = [];
  const laneOfTrack = new Map<number, number>();
  for (const s of spans) {
    let lane = laneEnds.findIndex((end) => end < s.t0);
    if (lane === -1) {
      lane = laneEnds.length;
      laneEnds.push(s.t1);
    } else {
      laneEnds[lane] = s.t1;
    }
    laneOfTrack.set(s.track.id, lane);
    segments.push({
      trackId: s.track.id,
      lane,
      t0: s.t0,
      t1: s.t1,
      start: s.track.start,
      end: s.track.end,
      maxPersistence: s.track.max_persistence,
    });
  }

  // node (timestep, feature id) -> owning track
  const owner = new Map<string, number>();
  for (const tr of resp.tracks) {
    for (const [t, fid] of tr.nodes) owner.set(`${t}:${fid}`, tr.id);
  }

  const markers: TimelineMarker[] = resp.events.map((ev) => {
    const trackIds = [
      ...new Set(
        ev.features
          .map(([t, fid]) => owner.get(`${t}:${fid}`))
          .filter((id): id is number => id !== undefined),
      ),
    ].sort((a, b) => a - b);
    return {
      kind: ev.kind,
      timestep: ev.timestep,
      featureRefs: ev.features,
      trackIds,
      lanes: trackIds.map((id) => laneOfTrack.get(id)!),
    };
  });

  return {
    t0: resp.t0,
    t1: resp.t1,
    laneCount: laneEnds.length,
    segments,
    markers,
  };
}

// Clicking a marker jumps the time cursor there and focuses the involved
// features on the map.
export function markerFocus(m: TimelineMarker): {
  cursor: number;
  featureRefs: [number, number][];
} {
  return { cursor: m.timestep, featureRefs: m.featureRefs };
}
