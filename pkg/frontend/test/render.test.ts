/** Panel structure against the fixture CSVs plus byte-determinism (A10). */

import * as fs from "fs";
import * as path from "path";
import { describe, expect, it } from "vitest";
import { readResultsCsv } from "../src/csv.js";
import { buildResultsPanel, describePanel, PanelError } from "../src/panels.js";
import { fmtTick, renderPanel } from "../src/render.js";
import { groupBy } from "../src/stats.js";

const FIXTURES = path.join(__dirname, "fixtures");

function fixture(name: string): string {
  return path.join(FIXTURES, name);
}

describe("panel structure matches the CSV group structure", () => {
  it("exp1: one facet per input family, one curve per estimator", () => {
    const rows = readResultsCsv(fixture("exp1_results.csv"));
    const spec = buildResultsPanel(rows, "exp1", false);
    const desc = describePanel(spec);
    const families = [...groupBy(rows, (r) => r.input_family).keys()].sort();
    expect(desc.facets.map((f) => f.title)).toEqual(families.map((f) => `inputs: ${f}`));
    for (const [i, family] of families.entries()) {
      const sub = rows.filter((r) => r.input_family === family);
      const estimators = new Set(sub.map((r) => r.estimator));
      expect(desc.facets[i].curveCount).toBe(estimators.size);
      expect(new Set(desc.facets[i].labels)).toEqual(estimators);
      const tCount = new Set(sub.map((r) => r.t)).size;
      for (const n of desc.facets[i].pointCounts) {
        expect(n).toBe(tCount);
      }
    }
  });

  it("exp2: three estimator curves per family", () => {
    const rows = readResultsCsv(fixture("exp2_results.csv"));
    const spec = buildResultsPanel(rows, "exp2", true);
    for (const facet of spec.facets) {
      expect(facet.series.map((s) => s.label)).toEqual(["l1", "l2", "linf"]);
    }
  });

  it("exp3: one labelled curve per (tau, rho) cell", () => {
    const rows = readResultsCsv(fixture("exp3_results.csv"));
    const spec = buildResultsPanel(rows, "exp3", true);
    expect(spec.facets).toHaveLength(1);
    const cells = new Set(rows.map((r) => `tau=${r.tau}, rho=${r.rho}`));
    expect(spec.facets[0].series).toHaveLength(cells.size);
    expect(new Set(spec.facets[0].series.map((s) => s.label))).toEqual(cells);
  });

  it("band half-width equals 1.96 stderr of the seeds at each t", () => {
    const rows = readResultsCsv(fixture("exp1_results.csv"));
    const spec = buildResultsPanel(rows, "exp1", false);
    const facet = spec.facets[0];
    const family = facet.title.replace("inputs: ", "");
    const series = facet.series[0];
    const t0 = series.points[0].x;
    const vals = rows
      .filter((r) => r.input_family === family && r.estimator === series.label && r.t === t0)
      .map((r) => r.frob_error);
    const m = vals.reduce((a, b) => a + b, 0) / vals.length;
    const sd = Math.sqrt(vals.map((v) => (v - m) ** 2).reduce((a, b) => a + b, 0) / (vals.length - 1));
    const half = 1.96 * (sd / Math.sqrt(vals.length));
    expect(series.points[0].y).toBeCloseTo(m, 9);
    expect(series.points[0].hi - series.points[0].y).toBeCloseTo(half, 9);
  });

  it("refuses an empty selection", () => {
    expect(() => buildResultsPanel([], "exp1", false)).toThrow(PanelError);
  });
});

describe("rendering", () => {
  it("produces a valid PNG with stable bytes across reruns", () => {
    const rows = readResultsCsv(fixture("exp1_results.csv"));
    const spec = buildResultsPanel(rows, "exp1", true);
    const a = renderPanel(spec);
    const b = renderPanel(buildResultsPanel(readResultsCsv(fixture("exp1_results.csv")), "exp1", true));
    expect(a.subarray(0, 8)).toEqual(Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]));
    expect(Buffer.compare(a, b)).toBe(0);
    // IHDR dimensions match the facet layout (2 facets for exp1)
    expect(a.readUInt32BE(16)).toBeGreaterThan(900);
    expect(a.readUInt32BE(20)).toBeGreaterThan(400);
  });

  it("log and linear scales differ", () => {
    const rows = readResultsCsv(fixture("exp3_results.csv"));
    const lin = renderPanel(buildResultsPanel(rows, "exp3", false));
    const log = renderPanel(buildResultsPanel(rows, "exp3", true));
    expect(Buffer.compare(lin, log)).not.toBe(0);
  });
});

describe("fmtTick", () => {
  it("formats plain and exponential ranges", () => {
    expect(fmtTick(0)).toBe("0");
    expect(fmtTick(0.5)).toBe("0.5");
    expect(fmtTick(1500)).toBe("1500");
    expect(fmtTick(0.0001)).toBe("1e-4");
    expect(fmtTick(20000)).toBe("2e4");
  });
});
