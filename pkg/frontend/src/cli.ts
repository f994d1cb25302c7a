/** render --csv PATH --panel exp1|exp2|exp3|checks --out fig.png [--log-y] */

import * as fs from "fs";
import * as path from "path";
import { CsvError, readChecksCsv, readResultsCsv } from "./csv.js";
import { buildChecksPanel, buildResultsPanel, describePanel, PanelError, PanelKind } from "./panels.js";
import { renderPanel } from "./render.js";

interface Args {
  csv: string;
  panel: PanelKind;
  out: string;
  logY: boolean;
}

export function parseArgs(argv: string[]): Args {
  if (argv[0] !== "render") {
    throw new Error(`unknown command ${argv[0] ?? "(none)"}; expected: render`);
  }
  let csv = "", panel = "", out = "";
  let logY = false;
  for (let i = 1; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--csv") csv = argv[++i] ?? "";
    else if (a === "--panel") panel = argv[++i] ?? "";
    else if (a === "--out") out = argv[++i] ?? "";
    else if (a === "--log-y") logY = true;
    else throw new Error(`unknown flag ${a}`);
  }
  if (!csv || !panel || !out) {
    throw new Error("usage: render --csv PATH --panel exp1|exp2|exp3|checks --out fig.png [--log-y]");
  }
  if (!["exp1", "exp2", "exp3", "checks"].includes(panel)) {
    throw new Error(`unknown panel ${panel}`);
  }
  return { csv, panel: panel as PanelKind, out, logY };
}

export function runCli(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  try {
    const spec =
      args.panel === "checks"
        ? buildChecksPanel(readChecksCsv(args.csv), args.logY)
        : buildResultsPanel(readResultsCsv(args.csv), args.panel, args.logY);
    const png = renderPanel(spec);
    fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
    fs.writeFileSync(args.out, png);
    const desc = describePanel(spec);
    const summary = desc.facets
      .map((f) => `${f.title}[${f.labels.join(",")}]`)
      .join(" | ");
    console.log(`render: ${args.panel} -> ${args.out} (${png.length} bytes) ${summary}`);
    return 0;
  } catch (err) {
    if (err instanceof CsvError || err instanceof PanelError) {
      console.error(err.message);
      return 1;
    }
    if (err instanceof Error && "code" in err && (err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`file not found: ${args.csv}`);
      return 1;
    }
    throw err;
  }
}
