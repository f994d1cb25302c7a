/** Grouping and the confidence-band convention (mean +- 1.96 * stderr). */

export function groupBy<T>(items: T[], key: (x: T) => string): Map<string, T[]> {
  const out = new Map<string, T[]>();
  for (const it of items) {
    const k = key(it);
    const arr = out.get(k);
    if (arr) {
      arr.push(it);
    } else {
      out.set(k, [it]);
    }
  }
  return out;
}

export function mean(xs: number[]): number {
  let s = 0;
  for (const x of xs) s += x;
  return s / xs.length;
}

export function sampleStd(xs: number[]): number {
  if (xs.length < 2) return 0;
  const m = mean(xs);
  let s = 0;
  for (const x of xs) s += (x - m) * (x - m);
  return Math.sqrt(s / (xs.length - 1));
}

export interface BandPoint {
  x: number;
  y: number;   // mean over seeds
  lo: number;  // y - 1.96 * std/sqrt(n)
  hi: number;  // y + 1.96 * std/sqrt(n)
}

/** Mean curve with the 95% CI band over per-seed values at each x. */
export function bandCurve(points: { x: number; value: number }[]): BandPoint[] {
  const byX = groupBy(points, (p) => String(p.x));
  const out: BandPoint[] = [];
  for (const [, pts] of byX) {
    const vals = pts.map((p) => p.value);
    const m = mean(vals);
    const half = 1.96 * (sampleStd(vals) / Math.sqrt(vals.length));
    out.push({ x: pts[0].x, y: m, lo: m - half, hi: m + half });
  }
  out.sort((a, b) => a.x - b.x);
  return out;
}
