import { describe, expect, it } from "vitest";
import { bandCurve, mean, sampleStd } from "../src/stats.js";

describe("bandCurve", () => {
  it("computes mean +- 1.96 stderr per x", () => {
    const pts = [
      { x: 1, value: 1.0 },
      { x: 1, value: 2.0 },
      { x: 1, value: 3.0 },
      { x: 2, value: 5.0 },
      { x: 2, value: 7.0 },
    ];
    const band = bandCurve(pts);
    expect(band).toHaveLength(2);
    expect(band[0].x).toBe(1);
    expect(band[0].y).toBeCloseTo(2.0, 12);
    const half1 = 1.96 * (sampleStd([1, 2, 3]) / Math.sqrt(3));
    expect(band[0].hi - band[0].y).toBeCloseTo(half1, 12);
    expect(band[0].y - band[0].lo).toBeCloseTo(half1, 12);
    expect(band[1].y).toBeCloseTo(6.0, 12);
  });

  it("keeps x sorted", () => {
    const band = bandCurve([
      { x: 3, value: 1 },
      { x: 1, value: 1 },
      { x: 2, value: 1 },
    ]);
    expect(band.map((p) => p.x)).toEqual([1, 2, 3]);
  });

  it("single-seed band collapses to the curve", () => {
    const band = bandCurve([{ x: 1, value: 4 }]);
    expect(band[0].lo).toBe(4);
    expect(band[0].hi).toBe(4);
  });
});

describe("mean", () => {
  it("averages", () => {
    expect(mean([1, 2, 3, 4])).toBe(2.5);
  });
});
