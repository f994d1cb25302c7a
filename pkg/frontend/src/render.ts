/** Deterministic rendering of a PanelSpec to PNG bytes. */

import { textWidth } from "./font.js";
import { PanelSpec, Series } from "./panels.js";
import { encodePng } from "./png.js";
import { Canvas, RGB } from "./raster.js";

const PALETTE: RGB[] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
  [227, 119, 194],
  [127, 127, 127],
];
const AXIS: RGB = [40, 40, 40];
const GRID: RGB = [225, 225, 225];

const FACET_W = 440;
const FACET_H = 420;
const MARGIN_L = 78;
const MARGIN_R = 16;
const MARGIN_T = 46;
const MARGIN_B = 58;
const GAP = 26;

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    const e = Math.floor(Math.log10(a));
    const mant = v / Math.pow(10, e);
    const m = Math.round(mant * 10) / 10;
    return `${m}e${e}`;
  }
  const s = v.toPrecision(3);
  return String(Number(s));
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((c) => c * mag);
  let step = candidates[candidates.length - 1];
  for (const c of candidates) {
    if (c >= step0) {
      step = c;
      break;
    }
  }
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); Math.pow(10, e) <= hi * (1 + 1e-12); e++) {
    out.push(Math.pow(10, e));
  }
  return out.length > 0 ? out : [lo];
}

interface Extent {
  xLo: number;
  xHi: number;
  yLo: number;
  yHi: number;
}

function seriesExtent(series: Series[], logY: boolean): Extent {
  let xLo = Infinity, xHi = -Infinity, yLo = Infinity, yHi = -Infinity;
  for (const s of series) {
    for (const p of s.points) {
      xLo = Math.min(xLo, p.x);
      xHi = Math.max(xHi, p.x);
      const lo = logY ? Math.max(p.lo, 0) : p.lo;
      if (!logY || lo > 0) yLo = Math.min(yLo, logY ? lo : p.lo);
      if (logY && p.y > 0) yLo = Math.min(yLo, p.y);
      yHi = Math.max(yHi, p.hi);
    }
  }
  if (logY) {
    yLo = yLo === Infinity || yLo <= 0 ? 1e-12 : yLo;
    yHi = Math.max(yHi, yLo * 10);
    return { xLo, xHi, yLo: yLo / 1.5, yHi: yHi * 1.5 };
  }
  const pad = 0.06 * (yHi - yLo || 1);
  return { xLo, xHi, yLo: yLo - pad, yHi: yHi + pad };
}

export function renderPanel(spec: PanelSpec): Buffer {
  const n = spec.facets.length;
  const width = MARGIN_L + n * FACET_W + (n - 1) * GAP + MARGIN_R;
  const height = MARGIN_T + FACET_H + MARGIN_B;
  const cv = new Canvas(width, height);

  spec.facets.forEach((facet, fi) => {
    const x0 = MARGIN_L + fi * (FACET_W + GAP);
    const y0 = MARGIN_T;
    const ext = seriesExtent(facet.series, spec.logY);
    const toX = (v: number) =>
      x0 + ((v - ext.xLo) / (ext.xHi - ext.xLo || 1)) * (FACET_W - 1);
    const toY = (v: number) => {
      let f: number;
      if (spec.logY) {
        const vv = Math.max(v, ext.yLo);
        f = (Math.log(vv) - Math.log(ext.yLo)) / (Math.log(ext.yHi) - Math.log(ext.yLo));
      } else {
        f = (v - ext.yLo) / (ext.yHi - ext.yLo || 1);
      }
      return y0 + (1 - f) * (FACET_H - 1);
    };

    // frame + grid + ticks
    const yTicks = spec.logY ? logTicks(ext.yLo, ext.yHi) : niceTicks(ext.yLo, ext.yHi);
    for (const v of yTicks) {
      const y = Math.round(toY(v));
      cv.line(x0, y, x0 + FACET_W - 1, y, GRID, 1);
      cv.textRight(x0 - 6, y - 5, fmtTick(v), AXIS, 1.5 as unknown as number);
    }
    const xTicks = niceTicks(ext.xLo, ext.xHi, 6);
    for (const v of xTicks) {
      const x = Math.round(toX(v));
      cv.line(x, y0, x, y0 + FACET_H - 1, GRID, 1);
      cv.text(x - 8, y0 + FACET_H + 8, fmtTick(v), AXIS, 1.5 as unknown as number);
    }
    cv.line(x0, y0, x0, y0 + FACET_H - 1, AXIS, 1);
    cv.line(x0, y0 + FACET_H - 1, x0 + FACET_W - 1, y0 + FACET_H - 1, AXIS, 1);

    // bands then lines so every curve stays visible
    facet.series.forEach((s, si) => {
      const color = PALETTE[si % PALETTE.length];
      const xs = s.points.map((p) => toX(p.x));
      const lo = s.points.map((p) => toY(p.lo));
      const hi = s.points.map((p) => toY(p.hi));
      cv.band(xs, lo, hi, color, 0.18);
    });
    facet.series.forEach((s, si) => {
      const color = PALETTE[si % PALETTE.length];
      for (let i = 0; i + 1 < s.points.length; i++) {
        cv.line(
          toX(s.points[i].x), toY(s.points[i].y),
          toX(s.points[i + 1].x), toY(s.points[i + 1].y),
          color, 2,
        );
      }
    });

    // facet title and legend
    cv.text(x0, y0 - 26, facet.title, AXIS, 2);
    const legendX = x0 + FACET_W - 10;
    facet.series.forEach((s, si) => {
      const color = PALETTE[si % PALETTE.length];
      const ly = y0 + 10 + si * 20;
      cv.textRight(legendX, ly, s.label, AXIS, 2);
      const lx = legendX - textWidth(s.label, 2) - 28;
      cv.line(lx, ly + 6, lx + 22, ly + 6, color, 3);
    });

    // x label per facet
    cv.text(x0 + Math.floor(FACET_W / 2) - 8, y0 + FACET_H + 30, spec.xLabel, AXIS, 2);
  });

  // y label along the left edge (horizontal text, top-left)
  cv.text(6, 8, spec.yLabel + (spec.logY ? " (log)" : ""), AXIS, 2);

  return encodePng(width, height, cv.data);
}
