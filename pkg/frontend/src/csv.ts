/** Reading of robust-sysid CSV artifacts (schema_version=1). */

import * as fs from "fs";
import Papa from "papaparse";

export const SCHEMA_VERSION = 1;

export interface ResultRow {
  experiment: string;
  seed: number;
  input_family: string;
  estimator: string;
  tau: number;
  rho: number;
  t: number;
  frob_error: number;
  eps_bar: number;
  lambda_emp: number;
  nu: number;
  converged: number;
}

export const RESULT_COLUMNS: (keyof ResultRow)[] = [
  "experiment", "seed", "input_family", "estimator", "tau", "rho", "t",
  "frob_error", "eps_bar", "lambda_emp", "nu", "converged",
];

export interface CheckRow {
  check_name: string;
  seed: number;
  value: number;
  threshold: number;
  pass: number;
}

export class CsvError extends Error {}

function splitSchemaHeader(text: string): string {
  const firstBreak = text.indexOf("\n");
  const first = (firstBreak >= 0 ? text.slice(0, firstBreak) : text).trim();
  const m = first.match(/^#\s*schema_version=(\d+)$/);
  if (!m) {
    throw new CsvError(`missing "# schema_version=..." header line (got: ${first.slice(0, 60)})`);
  }
  if (Number(m[1]) !== SCHEMA_VERSION) {
    throw new CsvError(`unsupported schema_version=${m[1]} (expected ${SCHEMA_VERSION})`);
  }
  return text.slice(firstBreak + 1);
}

function parseTable(text: string): Record<string, string>[] {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new CsvError(`CSV parse error: ${parsed.errors[0].message}`);
  }
  return parsed.data;
}

function requireColumns(rows: Record<string, string>[], cols: string[]): void {
  const have = new Set(rows.length > 0 ? Object.keys(rows[0]) : []);
  for (const c of cols) {
    if (!have.has(c)) {
      throw new CsvError(`missing column: ${c}`);
    }
  }
}

export function readResultsCsv(path: string): ResultRow[] {
  const body = splitSchemaHeader(fs.readFileSync(path, "utf8"));
  const raw = parseTable(body);
  requireColumns(raw, RESULT_COLUMNS as string[]);
  return raw.map((r) => ({
    experiment: r.experiment,
    seed: Number(r.seed),
    input_family: r.input_family,
    estimator: r.estimator,
    tau: Number(r.tau),
    rho: Number(r.rho),
    t: Number(r.t),
    frob_error: Number(r.frob_error),
    eps_bar: Number(r.eps_bar),
    lambda_emp: Number(r.lambda_emp),
    nu: Number(r.nu),
    converged: Number(r.converged),
  }));
}

export function readChecksCsv(path: string): CheckRow[] {
  const body = splitSchemaHeader(fs.readFileSync(path, "utf8"));
  const raw = parseTable(body);
  requireColumns(raw, ["check_name", "seed", "value", "threshold", "pass"]);
  return raw.map((r) => ({
    check_name: r.check_name,
    seed: Number(r.seed),
    value: Number(r.value),
    threshold: Number(r.threshold),
    pass: Number(r.pass),
  }));
}
