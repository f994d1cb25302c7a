/** Software rasterizer: lines, filled bands, bitmap text on an RGBA canvas. */

import { GLYPH_H, GLYPH_W, glyph, textWidth } from "./font.js";

export type RGB = [number, number, number];

export class Canvas {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, background: RGB = [255, 255, 255]) {
    this.width = width;
    this.height = height;
    this.data = new Uint8Array(width * height * 4);
    for (let i = 0; i < width * height; i++) {
      this.data[i * 4] = background[0];
      this.data[i * 4 + 1] = background[1];
      this.data[i * 4 + 2] = background[2];
      this.data[i * 4 + 3] = 255;
    }
  }

  blend(x: number, y: number, color: RGB, alpha: number): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 4;
    this.data[i] = Math.round(color[0] * alpha + this.data[i] * (1 - alpha));
    this.data[i + 1] = Math.round(color[1] * alpha + this.data[i + 1] * (1 - alpha));
    this.data[i + 2] = Math.round(color[2] * alpha + this.data[i + 2] * (1 - alpha));
  }

  set(x: number, y: number, color: RGB): void {
    this.blend(x, y, color, 1);
  }

  fillRect(x0: number, y0: number, w: number, h: number, color: RGB, alpha = 1): void {
    for (let y = y0; y < y0 + h; y++) {
      for (let x = x0; x < x0 + w; x++) {
        this.blend(x, y, color, alpha);
      }
    }
  }

  /** Bresenham segment with a square pen of the given thickness. */
  line(x0: number, y0: number, x1: number, y1: number, color: RGB, thickness = 1): void {
    let xa = Math.round(x0);
    let ya = Math.round(y0);
    const xb = Math.round(x1);
    const yb = Math.round(y1);
    const dx = Math.abs(xb - xa);
    const dy = -Math.abs(yb - ya);
    const sx = xa < xb ? 1 : -1;
    const sy = ya < yb ? 1 : -1;
    let err = dx + dy;
    const r = Math.floor(thickness / 2);
    for (;;) {
      for (let oy = -r; oy <= r; oy++) {
        for (let ox = -r; ox <= r; ox++) {
          this.set(xa + ox, ya + oy, color);
        }
      }
      if (xa === xb && ya === yb) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        xa += sx;
      }
      if (e2 <= dx) {
        err += dx;
        ya += sy;
      }
    }
  }

  /** Vertical span fill between two piecewise-linear curves (CI band). */
  band(xs: number[], yLo: number[], yHi: number[], color: RGB, alpha: number): void {
    for (let i = 0; i + 1 < xs.length; i++) {
      const xa = Math.round(xs[i]);
      const xb = Math.round(xs[i + 1]);
      for (let x = Math.min(xa, xb); x <= Math.max(xa, xb); x++) {
        const f = xa === xb ? 0 : (x - xa) / (xb - xa);
        const lo = yLo[i] + f * (yLo[i + 1] - yLo[i]);
        const hi = yHi[i] + f * (yHi[i + 1] - yHi[i]);
        const yTop = Math.round(Math.min(lo, hi));
        const yBot = Math.round(Math.max(lo, hi));
        for (let y = yTop; y <= yBot; y++) {
          this.blend(x, y, color, alpha);
        }
      }
    }
  }

  text(x: number, y: number, s: string, color: RGB, scale = 2): void {
    let cx = x;
    for (const ch of s) {
      const rows = glyph(ch);
      for (let gy = 0; gy < GLYPH_H; gy++) {
        for (let gx = 0; gx < GLYPH_W; gx++) {
          if (rows[gy][gx] === "X") {
            this.fillRect(cx + gx * scale, y + gy * scale, scale, scale, color);
          }
        }
      }
      cx += (GLYPH_W + 1) * scale;
    }
  }

  textRight(x: number, y: number, s: string, color: RGB, scale = 2): void {
    this.text(x - textWidth(s, scale), y, s, color, scale);
  }
}
