// Session state and its URL-fragment form. The whole view is reproducible
// from the fragment alone: paste the link, get the same panels, cursor,
// filter and selection.

import type { DescriptorJson, FilterJson, WeightKind } from "./api.js";

export interface Selection {
  kind: "feature" | "minimum";
  timestep: number;
  id: number; // feature id or step-local extremum index
}

export interface SessionState {
  server: string;
  panelA: DescriptorJson;
  panelB: DescriptorJson | null; // non-null turns on A/B comparison
  weights: WeightKind;
  cursor: number;
  playing: boolean;
  fps: number;
  filter: FilterJson | null;
  selection: Selection | null;
}

export function defaultState(server = ""): SessionState {
  return {
    server,
    panelA: { kind: "local-offset", delta: { kind: "percent", value: 5 } },
    panelB: null,
    weights: "persistence",
    cursor: 0,
    playing: false,
    fps: 4,
    filter: null,
    selection: null,
  };
}

const STATE_KEYS: (keyof SessionState)[] = [
  "server",
  "panelA",
  "panelB",
  "weights",
  "cursor",
  "playing",
  "fps",
  "filter",
  "selection",
];

// Keys equal to their defaults are left out so shared links stay short.
export function encodeState(state: SessionState): string {
  const base = defaultState();
  const out: Record<string, unknown> = {};
  for (const key of STATE_KEYS) {
    if (JSON.stringify(state[key]) !== JSON.stringify(base[key])) {
      out[key] = state[key];
    }
  }
  return "#s=" + encodeURIComponent(JSON.stringify(out));
}

export function decodeState(fragment: string): SessionState {
  const state = defaultState();
  const m = /^#s=(.+)$/.exec(fragment);
  if (!m) return state;
  let obj: unknown;
  try {
    obj = JSON.parse(decodeURIComponent(m[1]));
  } catch {
    return state; // a mangled link still opens the app
  }
  if (typeof obj !== "object" || obj === null) return state;
  for (const key of STATE_KEYS) {
    if (key in (obj as Record<string, unknown>)) {
      (state as unknown as Record<string, unknown>)[key] = (obj as Record<string, unknown>)[key];
    }
  }
  return state;
}
