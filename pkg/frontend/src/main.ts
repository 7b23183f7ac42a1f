// DOM bootstrap: wires the controls, the two descriptor panels, the map and
// the timeline together. All logic lives in the imported modules; this file
// only moves values between the DOM and them.

import { ApiClient, type DeltaJson, type DescriptorJson, type ExtremumTrack, type FieldSlice, type GraphView, type Meta, type WeightKind } from "./api.js";
import { decodeState, defaultState, encodeState, type SessionState } from "./state.js";
import { PanelEvaluator, diffSummary, featureCountAt, type PanelResult } from "./sweep.js";
import { layoutTimeline, markerFocus, type TimelineLayout } from "./timeline.js";
import { buildLayerStack } from "./mapview.js";
import { laneToY, paintLayers, paintTimeline, timestepToX, timelineHeight, type Viewport } from "./render.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

let state: SessionState = decodeState(location.hash) ?? defaultState();
let client: ApiClient | null = null;
let meta: Meta | null = null;
let field: FieldSlice | null = null;
let graph: GraphView | null = null;
let selectionTrack: ExtremumTrack | null = null;
let resultA: PanelResult | null = null;
let resultB: PanelResult | null = null;
let offline = false;
let playTimer: number | null = null;

function pushState(): void {
  history.replaceState(null, "", encodeState(state));
}

function deltaOf(desc: DescriptorJson): { value: number; percent: boolean } {
  const d = desc.delta;
  if (typeof d === "number") return { value: d, percent: false };
  if (d && d.kind === "percent") return { value: d.value, percent: true };
  if (d) return { value: d.value, percent: false };
  return { value: desc.threshold_percent ?? desc.threshold ?? 5, percent: desc.threshold_percent !== undefined };
}

function withDelta(desc: DescriptorJson, value: number, percent: boolean): DescriptorJson {
  const next = { ...desc };
  if (desc.kind === "global-threshold") {
    delete next.delta;
    if (percent) {
      next.threshold_percent = value;
      delete next.threshold;
    } else {
      next.threshold = value;
      delete next.threshold_percent;
    }
  } else {
    delete next.threshold;
    delete next.threshold_percent;
    next.delta = percent ? ({ kind: "percent", value } as DeltaJson) : value;
  }
  return next;
}

function panelControls(prefix: "a" | "b"): {
  read: () => DescriptorJson;
  write: (d: DescriptorJson) => void;
  setError: (msg: string | null) => void;
} {
  const kind = $<HTMLSelectElement>(`${prefix}-kind`);
  const slider = $<HTMLInputElement>(`${prefix}-delta`);
  const percent = $<HTMLInputElement>(`${prefix}-percent`);
  const roi = $<HTMLInputElement>(`${prefix}-roi`);
  const label = $(`${prefix}-delta-label`);
  const error = $(`${prefix}-error`);
  const read = (): DescriptorJson => {
    let desc: DescriptorJson = { kind: kind.value as DescriptorJson["kind"] };
    desc = withDelta(desc, Number(slider.value), percent.checked);
    const boxes = roi.value
      .split(";")
      .map((s) => s.trim())
      .filter(Boolean)
      .map((s) => {
        const [x0, x1, y0, y1] = s.split(",").map(Number);
        return { x0, x1, y0, y1 };
      });
    if (boxes.length > 0) desc.roi = boxes;
    label.textContent = `${slider.value}${percent.checked ? "%" : ""}`;
    return desc;
  };
  const write = (d: DescriptorJson): void => {
    kind.value = d.kind;
    const dv = deltaOf(d);
    slider.value = String(dv.value);
    percent.checked = dv.percent;
    roi.value = (d.roi ?? []).map((b) => `${b.x0},${b.x1},${b.y0},${b.y1}`).join("; ");
    label.textContent = `${dv.value}${dv.percent ? "%" : ""}`;
  };
  const setError = (msg: string | null): void => {
    error.textContent = msg ?? "";
    error.style.display = msg ? "block" : "none";
  };
  return { read, write, setError };
}

function repaintMap(): void {
  const canvas = $<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d");
  if (!ctx || !meta) return;
  const vp: Viewport = {
    width: canvas.width,
    height: canvas.height,
    gridW: meta.grid.width,
    gridH: meta.grid.height,
  };
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const layers = buildLayerStack({
    meta,
    cursor: state.cursor,
    field,
    graph,
    features: resultA?.features ?? null,
    tracks: resultA?.tracks ?? null,
    selection: state.selection,
    selectionTrack,
    offline,
  });
  paintLayers(ctx, layers, vp);
}

let timelineLayout: TimelineLayout | null = null;

function repaintTimeline(): void {
  const canvas = $<HTMLCanvasElement>("timeline");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!resultA) return;
  timelineLayout = layoutTimeline(resultA.tracks);
  canvas.height = Math.max(80, timelineHeight(timelineLayout));
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  paintTimeline(ctx, timelineLayout, canvas.width, state.cursor);
}

function repaintReadouts(): void {
  const countA = resultA ? featureCountAt(resultA.features, state.cursor) : "-";
  $("readout-a").textContent = `A: ${countA} features at t=${state.cursor}`;
  if (resultB && resultA) {
    const d = diffSummary(resultA, resultB);
    const countB = featureCountAt(resultB.features, state.cursor);
    $("readout-b").textContent = d.allZero
      ? `B: ${countB} features, no differences`
      : `B: ${countB} features, diff ${d.rows
          .filter((r) => r.dFeatures !== 0 || r.dEvents !== 0)
          .map((r) => `t${r.timestep}: ${r.dFeatures >= 0 ? "+" : ""}${r.dFeatures}f/${r.dEvents >= 0 ? "+" : ""}${r.dEvents}e`)
          .join(" ")}`;
  } else {
    $("readout-b").textContent = "";
  }
}

function repaintAll(): void {
  repaintMap();
  repaintTimeline();
  repaintReadouts();
  $<HTMLInputElement>("time-slider").value = String(state.cursor);
  $("time-label").textContent = `t = ${state.cursor}${meta ? " / " + (meta.num_timesteps - 1) : ""}`;
}

async function refreshCursorData(): Promise<void> {
  if (!client || !meta) return;
  try {
    const stride = Math.max(1, Math.floor(meta.grid.width / 200));
    field = await client.field(state.cursor, stride);
    offline = false;
  } catch {
    offline = true;
  }
  repaintAll();
}

async function refreshSelectionTrack(): Promise<void> {
  selectionTrack = null;
  if (client && state.selection?.kind === "minimum") {
    try {
      selectionTrack = await client.extremumTrack(state.selection.timestep, state.selection.id, {
        filter: state.filter ?? undefined,
      });
      offline = false;
    } catch {
      selectionTrack = null;
    }
  }
  repaintAll();
}

function setCursor(t: number): void {
  if (!meta) return;
  state.cursor = Math.max(0, Math.min(meta.num_timesteps - 1, t));
  pushState();
  void refreshCursorData();
}

function startPlayback(): void {
  stopPlayback();
  state.playing = true;
  playTimer = window.setInterval(() => {
    if (!meta) return;
    setCursor(state.cursor + 1 >= meta.num_timesteps ? 0 : state.cursor + 1);
  }, 1000 / state.fps);
  $("play").textContent = "pause";
  pushState();
}

function stopPlayback(): void {
  state.playing = false;
  if (playTimer !== null) {
    clearInterval(playTimer);
    playTimer = null;
  }
  $("play").textContent = "play";
}

function bootstrap(): void {
  const panelA = panelControls("a");
  const panelB = panelControls("b");
  panelA.write(state.panelA);
  if (state.panelB) {
    $<HTMLInputElement>("b-enabled").checked = true;
    $("panel-b-body").style.display = "block";
    panelB.write(state.panelB);
  }

  let evalA: PanelEvaluator | null = null;
  let evalB: PanelEvaluator | null = null;

  const submitA = (debounced: boolean): void => {
    if (!evalA) return;
    state.panelA = panelA.read();
    pushState();
    panelA.setError(null);
    const spec = { descriptor: state.panelA, weights: { kind: state.weights }, withGeometry: true };
    if (debounced) evalA.submit(spec);
    else evalA.evaluateNow(spec);
  };
  const submitB = (debounced: boolean): void => {
    if (!evalB || !$<HTMLInputElement>("b-enabled").checked) return;
    state.panelB = panelB.read();
    pushState();
    panelB.setError(null);
    const spec = { descriptor: state.panelB, weights: { kind: state.weights }, withGeometry: true };
    if (debounced) evalB.submit(spec);
    else evalB.evaluateNow(spec);
  };

  $<HTMLButtonElement>("connect").addEventListener("click", () => {
    void (async () => {
      state.server = $<HTMLInputElement>("server").value;
      pushState();
      client = new ApiClient(state.server);
      evalA = new PanelEvaluator(
        client,
        (r) => {
          resultA = r;
          repaintAll();
        },
        { onError: (e) => panelA.setError(String(e)) },
      );
      evalB = new PanelEvaluator(
        client,
        (r) => {
          resultB = r;
          repaintAll();
        },
        { onError: (e) => panelB.setError(String(e)) },
      );
      try {
        meta = await client.meta();
        graph = await client.graph({ filter: state.filter ?? undefined });
        offline = false;
      } catch (e) {
        offline = true;
        panelA.setError(String(e));
        repaintAll();
        return;
      }
      const slider = $<HTMLInputElement>("time-slider");
      slider.max = String(meta.num_timesteps - 1);
      submitA(false);
      submitB(false);
      void refreshCursorData();
      if (state.playing) startPlayback();
    })();
  });

  for (const id of ["a-kind", "a-percent", "a-roi"]) {
    $(id).addEventListener("change", () => submitA(true));
  }
  $<HTMLInputElement>("a-delta").addEventListener("input", () => submitA(true));
  for (const id of ["b-kind", "b-percent", "b-roi"]) {
    $(id).addEventListener("change", () => submitB(true));
  }
  $<HTMLInputElement>("b-delta").addEventListener("input", () => submitB(true));

  $<HTMLInputElement>("b-enabled").addEventListener("change", (ev) => {
    const on = (ev.target as HTMLInputElement).checked;
    $("panel-b-body").style.display = on ? "block" : "none";
    if (on) {
      submitB(false);
    } else {
      state.panelB = null;
      resultB = null;
      pushState();
      repaintAll();
    }
  });

  $<HTMLSelectElement>("weights").addEventListener("change", (ev) => {
    state.weights = (ev.target as HTMLSelectElement).value as WeightKind;
    pushState();
    submitA(false);
    submitB(false);
  });

  $<HTMLInputElement>("time-slider").addEventListener("input", (ev) => {
    stopPlayback();
    setCursor(Number((ev.target as HTMLInputElement).value));
  });

  $<HTMLButtonElement>("play").addEventListener("click", () => {
    if (state.playing) stopPlayback();
    else startPlayback();
    pushState();
  });

  // Click a timeline marker: move the cursor there and focus the event.
  $<HTMLCanvasElement>("timeline").addEventListener("click", (ev) => {
    if (!timelineLayout) return;
    const canvas = ev.target as HTMLCanvasElement;
    const rect = canvas.getBoundingClientRect();
    const mx = ev.clientX - rect.left;
    const my = ev.clientY - rect.top;
    for (const m of timelineLayout.markers) {
      const x = timestepToX(timelineLayout, canvas.width, m.timestep);
      for (const lane of m.lanes) {
        if (Math.hypot(mx - x, my - laneToY(lane)) <= 7) {
          const focus = markerFocus(m);
          const ref = focus.featureRefs[0];
          state.selection = { kind: "feature", timestep: ref[0], id: ref[1] };
          stopPlayback();
          setCursor(focus.cursor);
          return;
        }
      }
    }
  });

  // Click a minima glyph on the map: select it and fetch its raw track.
  $<HTMLCanvasElement>("map").addEventListener("click", (ev) => {
    if (!meta || !graph) return;
    const canvas = ev.target as HTMLCanvasElement;
    const rect = canvas.getBoundingClientRect();
    const mx = ((ev.clientX - rect.left) / canvas.clientWidth) * canvas.width;
    const my = ((ev.clientY - rect.top) / canvas.clientHeight) * canvas.height;
    const sx = canvas.width / (meta.grid.width - 1);
    const sy = canvas.height / (meta.grid.height - 1);
    const ts = graph.nodes.timestep;
    let local = -1;
    let best = 12;
    let hit = -1;
    for (let i = 0, l = 0; i < ts.length; i++) {
      if (ts[i] !== state.cursor) continue;
      const d = Math.hypot(graph.nodes.x[i] * sx - mx, graph.nodes.y[i] * sy - my);
      if (d < best) {
        best = d;
        hit = i;
        local = l;
      }
      l++;
    }
    if (hit >= 0) {
      state.selection = { kind: "minimum", timestep: state.cursor, id: local };
    } else {
      state.selection = null;
      selectionTrack = null;
    }
    pushState();
    void refreshSelectionTrack();
  });

  window.addEventListener("hashchange", () => {
    state = decodeState(location.hash);
    panelA.write(state.panelA);
    if (state.panelB) panelB.write(state.panelB);
    repaintAll();
  });

  $<HTMLInputElement>("server").value = state.server || `${location.protocol}//${location.hostname}:8765`;
  repaintAll();
}

bootstrap();
