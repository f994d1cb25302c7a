/** Panel construction: CSV rows -> facets of labelled band curves. */

import { CheckRow, ResultRow } from "./csv.js";
import { BandPoint, bandCurve, groupBy } from "./stats.js";

export type PanelKind = "exp1" | "exp2" | "exp3" | "checks";

export interface Series {
  label: string;
  points: BandPoint[];
}

export interface Facet {
  title: string;
  series: Series[];
}

export interface PanelSpec {
  kind: PanelKind;
  facets: Facet[];
  xLabel: string;
  yLabel: string;
  logY: boolean;
}

export class PanelError extends Error {}

const ESTIMATOR_ORDER = ["squared_l2", "l1", "l2", "linf"];

function estimatorSeries(rows: ResultRow[]): Series[] {
  const byEst = groupBy(rows, (r) => r.estimator);
  const names = [...byEst.keys()].sort(
    (a, b) => ESTIMATOR_ORDER.indexOf(a) - ESTIMATOR_ORDER.indexOf(b),
  );
  return names.map((name) => {
    const pts = byEst.get(name)!.map((r) => ({ x: r.t, value: r.frob_error }));
    return { label: name, points: bandCurve(pts) };
  });
}

export function buildResultsPanel(rows: ResultRow[], kind: PanelKind, logY: boolean): PanelSpec {
  if (rows.length === 0) {
    throw new PanelError("no rows after filtering; refusing to render an empty panel");
  }
  const facets: Facet[] = [];
  if (kind === "exp1" || kind === "exp2") {
    const byFamily = groupBy(rows, (r) => r.input_family);
    for (const family of [...byFamily.keys()].sort()) {
      const sub = byFamily.get(family)!;
      const series = estimatorSeries(sub);
      if (series.some((s) => s.points.length === 0)) {
        throw new PanelError(`empty series in family ${family}`);
      }
      facets.push({ title: `inputs: ${family}`, series });
    }
  } else if (kind === "exp3") {
    const byCell = groupBy(rows, (r) => `tau=${r.tau}, rho=${r.rho}`);
    const series = [...byCell.keys()].sort().map((label) => ({
      label,
      points: bandCurve(byCell.get(label)!.map((r) => ({ x: r.t, value: r.frob_error }))),
    }));
    facets.push({ title: "memory / contraction sweep", series });
  } else {
    throw new PanelError(`buildResultsPanel cannot build panel kind ${kind}`);
  }
  return { kind, facets, xLabel: "t", yLabel: "frob error", logY };
}

export function buildChecksPanel(rows: CheckRow[], logY: boolean): PanelSpec {
  if (rows.length === 0) {
    throw new PanelError("no check rows; refusing to render an empty panel");
  }
  const byCheck = groupBy(rows, (r) => r.check_name);
  const facets: Facet[] = [...byCheck.keys()].sort().map((name) => {
    const sub = byCheck.get(name)!.slice().sort((a, b) => a.seed - b.seed);
    const values: Series = {
      label: "value",
      points: sub.map((r) => ({ x: r.seed, y: r.value, lo: r.value, hi: r.value })),
    };
    const threshold: Series = {
      label: "threshold",
      points: sub.map((r) => ({ x: r.seed, y: r.threshold, lo: r.threshold, hi: r.threshold })),
    };
    return { title: name, series: [values, threshold] };
  });
  return { kind: "checks", facets, xLabel: "seed", yLabel: "value", logY };
}

/** Structure summary used by tests and the CLI verbose output. */
export function describePanel(spec: PanelSpec) {
  return {
    kind: spec.kind,
    facets: spec.facets.map((f) => ({
      title: f.title,
      labels: f.series.map((s) => s.label),
      curveCount: f.series.length,
      pointCounts: f.series.map((s) => s.points.length),
    })),
  };
}
