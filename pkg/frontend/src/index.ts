export { readChecksCsv, readResultsCsv, CsvError, SCHEMA_VERSION } from "./csv.js";
export type { CheckRow, ResultRow } from "./csv.js";
export { bandCurve, groupBy, mean, sampleStd } from "./stats.js";
export type { BandPoint } from "./stats.js";
export { buildChecksPanel, buildResultsPanel, describePanel, PanelError } from "./panels.js";
export type { Facet, PanelKind, PanelSpec, Series } from "./panels.js";
export { renderPanel, fmtTick } from "./render.js";
export { encodePng } from "./png.js";
export { Canvas } from "./raster.js";
export { runCli, parseArgs } from "./cli.js";
