// Canvas painters for the map layer stack and the timeline ribbon.
// They draw against a small context interface so tests can record calls
// without a real canvas.

import type { MapLayer } from "./mapview.js";
import type { TimelineLayout } from "./timeline.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
}

export interface Viewport {
  width: number; // pixels
  height: number;
  gridW: number; // grid coordinate extent (columns)
  gridH: number;
}

export function toPx(vp: Viewport, x: number, y: number): [number, number] {
  const sx = vp.gridW > 1 ? vp.width / (vp.gridW - 1) : vp.width;
  const sy = vp.gridH > 1 ? vp.height / (vp.gridH - 1) : vp.height;
  return [x * sx, y * sy];
}

// Dark-blue low to off-white high.
export function valueColor(v: number, lo: number, hi: number): string {
  const t = hi > lo ? Math.min(1, Math.max(0, (v - lo) / (hi - lo))) : 0.5;
  const r = Math.round(30 + 225 * t);
  const g = Math.round(60 + 190 * t);
  const b = Math.round(120 + 130 * t);
  return `rgb(${r},${g},${b})`;
}

const EVENT_COLORS: Record<string, string> = {
  birth: "#2a9d2a",
  death: "#666666",
  merge: "#d4762c",
  split: "#7a4fd0",
};

export const CONTOUR_COLOR = "#d62718";

function paintBackdrop(
  ctx: Ctx2D,
  vp: Viewport,
  field: { width: number; height: number; stride: number; values: number[][] },
  range: [number, number],
): void {
  const cw = (vp.width / Math.max(1, vp.gridW - 1)) * field.stride;
  const ch = (vp.height / Math.max(1, vp.gridH - 1)) * field.stride;
  for (let r = 0; r < field.height; r++) {
    for (let c = 0; c < field.width; c++) {
      const [px, py] = toPx(vp, c * field.stride, r * field.stride);
      ctx.fillStyle = valueColor(field.values[r][c], range[0], range[1]);
      ctx.fillRect(px - cw / 2, py - ch / 2, cw + 1, ch + 1);
    }
  }
}

// Level lines of the displayed raster (display smoothing only; feature
// outlines come from the server as geometry and are drawn in red below).
function paintIsolines(
  ctx: Ctx2D,
  vp: Viewport,
  field: { width: number; height: number; stride: number; values: number[][] },
  levels: number[],
): void {
  const v = field.values;
  ctx.strokeStyle = "rgba(40,40,60,0.25)";
  ctx.lineWidth = 1;
  const lerp = (a: number, b: number, level: number) => (level - a) / (b - a);
  for (const level of levels) {
    ctx.beginPath();
    for (let r = 0; r < field.height - 1; r++) {
      for (let c = 0; c < field.width - 1; c++) {
        const corners = [v[r][c], v[r][c + 1], v[r + 1][c + 1], v[r + 1][c]];
        const above = corners.map((x) => x >= level);
        if (above.every(Boolean) || !above.some(Boolean)) continue;
        // edge order: top, right, bottom, left
        const pts: [number, number][] = [];
        const gx = c * field.stride;
        const gy = r * field.stride;
        const s = field.stride;
        if (above[0] !== above[1]) pts.push([gx + s * lerp(corners[0], corners[1], level), gy]);
        if (above[1] !== above[2]) pts.push([gx + s, gy + s * lerp(corners[1], corners[2], level)]);
        if (above[3] !== above[2]) pts.push([gx + s * lerp(corners[3], corners[2], level), gy + s]);
        if (above[0] !== above[3]) pts.push([gx, gy + s * lerp(corners[0], corners[3], level)]);
        for (let i = 0; i + 1 < pts.length; i += 2) {
          const [ax, ay] = toPx(vp, pts[i][0], pts[i][1]);
          const [bx, by] = toPx(vp, pts[i + 1][0], pts[i + 1][1]);
          ctx.moveTo(ax, ay);
          ctx.lineTo(bx, by);
        }
      }
    }
    ctx.stroke();
  }
}

export function paintLayers(ctx: Ctx2D, layers: MapLayer[], vp: Viewport): void {
  for (const layer of layers) {
    ctx.save();
    if ("stale" in layer && layer.stale) ctx.globalAlpha = 0.45;
    switch (layer.kind) {
      case "backdrop":
        paintBackdrop(ctx, vp, layer.field, layer.range);
        break;
      case "isolines":
        paintIsolines(ctx, vp, layer.field, layer.levels);
        break;
      case "glyphs":
        for (const g of layer.glyphs) {
          const [px, py] = toPx(vp, g.x, g.y);
          ctx.beginPath();
          ctx.arc(px, py, g.radius, 0, 2 * Math.PI);
          ctx.fillStyle = g.selected ? "#ffd23c" : "#1d5fd0";
          ctx.fill();
          if (g.selected) {
            ctx.strokeStyle = "#a07800";
            ctx.lineWidth = 2;
            ctx.stroke();
          }
        }
        break;
      case "contours":
        ctx.strokeStyle = CONTOUR_COLOR;
        for (const c of layer.contours) {
          ctx.lineWidth = c.selected ? 3 : 1.8;
          for (const loop of c.loops) {
            ctx.beginPath();
            loop.forEach(([x, y], i) => {
              const [px, py] = toPx(vp, x, y);
              if (i === 0) ctx.moveTo(px, py);
              else ctx.lineTo(px, py);
            });
            ctx.closePath(); // rings arrive closed, this also seals the join
            ctx.stroke();
          }
        }
        break;
      case "tracks":
        for (const line of layer.lines) {
          ctx.strokeStyle = line.highlighted ? "#ff8c1a" : "rgba(20,20,20,0.55)";
          ctx.lineWidth = line.highlighted ? 3 : 1.5;
          ctx.beginPath();
          line.points.forEach((p, i) => {
            const [px, py] = toPx(vp, p.x, p.y);
            if (i === 0) ctx.moveTo(px, py);
            else ctx.lineTo(px, py);
          });
          ctx.stroke();
        }
        break;
      case "events":
        for (const g of layer.glyphs) {
          const [px, py] = toPx(vp, g.x, g.y);
          if (!g.atCursor) ctx.globalAlpha = 0.4;
          ctx.fillStyle = EVENT_COLORS[g.kind] ?? "#333";
          ctx.beginPath();
          ctx.moveTo(px, py - 7);
          ctx.lineTo(px + 7, py);
          ctx.lineTo(px, py + 7);
          ctx.lineTo(px - 7, py);
          ctx.closePath();
          ctx.fill();
          ctx.globalAlpha = 1;
        }
        break;
      case "banner":
        ctx.fillStyle = "rgba(180,30,30,0.9)";
        ctx.fillRect(0, 0, vp.width, 26);
        ctx.fillStyle = "#fff";
        ctx.font = "13px sans-serif";
        ctx.fillText(layer.text, 10, 17);
        break;
    }
    ctx.restore();
  }
}

const LANE_HEIGHT = 22;
const LANE_PAD = 6;
const AXIS_PAD = 24;

export function timestepToX(layout: TimelineLayout, width: number, t: number): number {
  const span = Math.max(1, layout.t1 - layout.t0);
  return AXIS_PAD + ((t - layout.t0) / span) * (width - 2 * AXIS_PAD);
}

export function laneToY(lane: number): number {
  return LANE_PAD + lane * LANE_HEIGHT + LANE_HEIGHT / 2;
}

export function timelineHeight(layout: TimelineLayout): number {
  return 2 * LANE_PAD + Math.max(1, layout.laneCount) * LANE_HEIGHT + AXIS_PAD;
}

export function paintTimeline(
  ctx: Ctx2D,
  layout: TimelineLayout,
  width: number,
  cursor: number,
): void {
  for (const seg of layout.segments) {
    const y = laneToY(seg.lane);
    ctx.strokeStyle = "#2b6cb0";
    ctx.lineWidth = 4;
    ctx.beginPath();
    ctx.moveTo(timestepToX(layout, width, seg.t0), y);
    ctx.lineTo(timestepToX(layout, width, seg.t1), y);
    ctx.stroke();
  }
  for (const m of layout.markers) {
    const x = timestepToX(layout, width, m.timestep);
    ctx.fillStyle = EVENT_COLORS[m.kind] ?? "#333";
    for (const lane of m.lanes) {
      ctx.beginPath();
      ctx.arc(x, laneToY(lane), 5, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  // time cursor
  const cx = timestepToX(layout, width, cursor);
  ctx.strokeStyle = "rgba(200,30,30,0.8)";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(cx, 0);
  ctx.lineTo(cx, timelineHeight(layout) - AXIS_PAD / 2);
  ctx.stroke();
}
