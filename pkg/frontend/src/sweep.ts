// Debounced descriptor evaluation with stale-response protection.
//
// Every fired evaluation gets a sequence number from a per-panel counter.
// A response is applied only if its number is higher than the last applied
// one, so when rapid slider edits make requests resolve out of order the
// readout never moves backwards. Superseded requests are aborted, keeping
// at most one live evaluation per panel.

import type {
  ApiClient,
  DescriptorJson,
  EventKind,
  FeaturesResponse,
  TracksResponse,
  WeightsJson,
} from "./api.js";

export interface EvalSpec {
  descriptor: DescriptorJson;
  weights?: WeightsJson;
  t0?: number;
  t1?: number;
  withGeometry?: boolean;
}

export interface PanelResult {
  seq: number;
  spec: EvalSpec;
  features: FeaturesResponse;
  tracks: TracksResponse;
}

// Injectable timer so tests can run the debounce by hand.
export type Scheduler = (fn: () => void, ms: number) => () => void;

const realScheduler: Scheduler = (fn, ms) => {
  const handle = setTimeout(fn, ms);
  return () => clearTimeout(handle);
};

export interface PanelOptions {
  debounceMs?: number;
  schedule?: Scheduler;
  onError?: (err: unknown, seq: number) => void;
}

export class PanelEvaluator {
  current: PanelResult | null = null;

  private seq = 0;
  private applied = 0;
  private pending: EvalSpec | null = null;
  private cancelTimer: (() => void) | null = null;
  private abort: AbortController | null = null;
  private readonly debounceMs: number;
  private readonly schedule: Scheduler;
  private readonly onError?: (err: unknown, seq: number) => void;

  constructor(
    private readonly client: ApiClient,
    private readonly onResult: (r: PanelResult) => void,
    opts: PanelOptions = {},
  ) {
    this.debounceMs = opts.debounceMs ?? 150;
    this.schedule = opts.schedule ?? realScheduler;
    this.onError = opts.onError;
  }

  // Called on every control edit; only the newest spec survives the debounce.
  submit(spec: EvalSpec): void {
    this.pending = spec;
    if (this.cancelTimer) this.cancelTimer();
    this.cancelTimer = this.schedule(() => {
      this.cancelTimer = null;
      void this.fire();
    }, this.debounceMs);
  }

  // Skip the debounce (initial load, programmatic state restore).
  evaluateNow(spec: EvalSpec): void {
    this.pending = spec;
    if (this.cancelTimer) {
      this.cancelTimer();
      this.cancelTimer = null;
    }
    void this.fire();
  }

  private async fire(): Promise<void> {
    if (!this.pending) return;
    const spec = this.pending;
    this.pending = null;
    const seq = ++this.seq;

    this.abort?.abort(); // supersede whatever is still on the wire
    const ctl = new AbortController();
    this.abort = ctl;

    try {
      const [features, tracks] = await Promise.all([
        this.client.features(
          {
            descriptor: spec.descriptor,
            t0: spec.t0,
            t1: spec.t1,
            with_geometry: spec.withGeometry ?? false,
          },
          { signal: ctl.signal },
        ),
        this.client.tracks(
          { descriptor: spec.descriptor, weights: spec.weights, t0: spec.t0, t1: spec.t1 },
          { signal: ctl.signal },
        ),
      ]);
      if (seq > this.applied) {
        this.applied = seq;
        this.current = { seq, spec, features, tracks };
        this.onResult(this.current);
      }
    } catch (err) {
      if (!ctl.signal.aborted) this.onError?.(err, seq);
    } finally {
      if (this.abort === ctl) this.abort = null;
    }
  }
}

export function featureCounts(resp: FeaturesResponse): number[] {
  return resp.steps.map((s) => s.features.length);
}

export function featureCountAt(resp: FeaturesResponse, t: number): number {
  const step = resp.steps.find((s) => s.timestep === t);
  return step ? step.features.length : 0;
}

export function carrierSet(resp: FeaturesResponse, t: number): Set<number> {
  const step = resp.steps.find((s) => s.timestep === t);
  return new Set(step ? step.features.map((f) => f.carrier) : []);
}

// True when every feature of `inner` has a matching carrier in `outer`,
// timestep by timestep. Used to sanity-check ROI-restricted panels.
export function carriersAreSubset(inner: FeaturesResponse, outer: FeaturesResponse): boolean {
  for (const step of inner.steps) {
    const allowed = carrierSet(outer, step.timestep);
    for (const f of step.features) {
      if (!allowed.has(f.carrier)) return false;
    }
  }
  return true;
}

export function eventCountAt(resp: TracksResponse, t: number): number {
  return resp.events.filter((e) => e.timestep === t).length;
}

export function eventCountsByKind(resp: TracksResponse): Record<EventKind, number> {
  const out: Record<EventKind, number> = { birth: 0, death: 0, merge: 0, split: 0 };
  for (const e of resp.events) out[e.kind] += 1;
  return out;
}

export interface DiffRow {
  timestep: number;
  dFeatures: number; // B minus A
  dEvents: number;
}

export interface DiffSummary {
  rows: DiffRow[];
  allZero: boolean;
}

// Per-timestep comparison of two panels, shown next to the B controls.
export function diffSummary(a: PanelResult, b: PanelResult): DiffSummary {
  const steps = new Set<number>();
  for (const s of a.features.steps) steps.add(s.timestep);
  for (const s of b.features.steps) steps.add(s.timestep);
  const rows: DiffRow[] = [...steps]
    .sort((x, y) => x - y)
    .map((t) => ({
      timestep: t,
      dFeatures: featureCountAt(b.features, t) - featureCountAt(a.features, t),
      dEvents: eventCountAt(b.tracks, t) - eventCountAt(a.tracks, t),
    }));
  return { rows, allZero: rows.every((r) => r.dFeatures === 0 && r.dEvents === 0) };
}
