/**
 * Parsers for the two CSV shapes the optimizer writes: per-run traces and
 * sigma-sweep variance tables. Headers are fixed; anything else is an error.
 */

export const TRACE_COLUMNS = [
  "iteration",
  "elapsed_ms",
  "elbo_estimate",
  "var_total",
  "var_mean_block",
  "var_scale_block",
  "gamma",
] as const;

export const SWEEP_COLUMNS = [
  "sigma",
  "estimator",
  "var_total",
  "var_mean_block",
  "var_scale_block",
] as const;

export interface TraceRow {
  iteration: number;
  elapsed_ms: number;
  elbo_estimate: number;
  var_total: number;
  var_mean_block: number;
  var_scale_block: number;
  gamma: number;
}

export interface SweepRow {
  sigma: number;
  estimator: string;
  var_total: number;
  var_mean_block: number;
  var_scale_block: number;
}

function splitLines(text: string): string[] {
  return text.split(/\r?\n/).filter((line) => line.length > 0);
}

function checkHeader(
  got: string[],
  want: readonly string[],
  source: string,
): void {
  for (const column of want) {
    if (!got.includes(column)) {
      throw new Error(`${source}: missing column ${column}`);
    }
  }
  if (got.length !== want.length || want.some((c, i) => got[i] !== c)) {
    throw new Error(
      `${source}: header [${got.join(",")}] does not match [${want.join(",")}]`,
    );
  }
}

function parseNumber(token: string, source: string, line: number): number {
  const value = Number(token);
  if (token.trim() === "" || Number.isNaN(value)) {
    throw new Error(`${source}: line ${line}: not a number: ${token}`);
  }
  return value;
}

export function parseTrace(text: string, source: string): TraceRow[] {
  const lines = splitLines(text);
  if (lines.length === 0) throw new Error(`${source}: empty file`);
  checkHeader(lines[0]!.split(","), TRACE_COLUMNS, source);
  const rows: TraceRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i]!.split(",");
    if (cells.length !== TRACE_COLUMNS.length) {
      throw new Error(`${source}: line ${i + 1}: expected ${TRACE_COLUMNS.length} cells`);
    }
    const num = (j: number) => parseNumber(cells[j]!, source, i + 1);
    rows.push({
      iteration: num(0),
      elapsed_ms: num(1),
      elbo_estimate: num(2),
      var_total: num(3),
      var_mean_block: num(4),
      var_scale_block: num(5),
      gamma: num(6),
    });
  }
  if (rows.length === 0) throw new Error(`${source}: no data rows`);
  for (let i = 1; i < rows.length; i++) {
    if (rows[i]!.iteration <= rows[i - 1]!.iteration) {
      throw new Error(`${source}: iteration not strictly increasing at row ${i + 1}`);
    }
  }
  return rows;
}

export function parseSweep(text: string, source: string): SweepRow[] {
  const lines = splitLines(text);
  if (lines.length === 0) throw new Error(`${source}: empty file`);
  checkHeader(lines[0]!.split(","), SWEEP_COLUMNS, source);
  const rows: SweepRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i]!.split(",");
    if (cells.length !== SWEEP_COLUMNS.length) {
      throw new Error(`${source}: line ${i + 1}: expected ${SWEEP_COLUMNS.length} cells`);
    }
    const num = (j: number) => parseNumber(cells[j]!, source, i + 1);
    rows.push({
      sigma: num(0),
      estimator: cells[1]!,
      var_total: num(2),
      var_mean_block: num(3),
      var_scale_block: num(4),
    });
  }
  if (rows.length === 0) throw new Error(`${source}: no data rows`);
  return rows;
}

/**
 * key=value pairs embedded in a filename stem, e.g.
 * "trace_cv=taylor_M=10.csv" -> { cv: "taylor", M: "10" }.
 * The sweep-stepsize runner writes "grid_alpha0.001.csv"; the bare alpha
 * prefix form is recognized too.
 */
export function filenameKeys(path: string): Record<string, string> {
  const stem = path.replace(/\\/g, "/").split("/").pop()!.replace(/\.[^.]*$/, "");
  const keys: Record<string, string> = {};
  // values may contain underscores, so each one runs until the next key= or
  // the end of the stem
  const pair = /([A-Za-z][A-Za-z0-9]*)=(.*?)(?=_[A-Za-z][A-Za-z0-9]*=|$)/g;
  for (const m of stem.matchAll(pair)) {
    keys[m[1]!] = m[2]!;
  }
  if (!("alpha" in keys)) {
    const m = /(?:^|_)alpha([0-9.eE+-]+)(?:_|$)/.exec(stem);
    if (m) keys["alpha"] = m[1]!;
  }
  return keys;
}

const ESTIMATOR_LABELS: Record<string, string> = {
  none: "Base",
  taylor: "Taylor",
  quadratic_m1: "Quadratic (M1)",
  quadratic_m2: "Quadratic (M2)",
};

/** Legend label for a trace file, derived from its embedded config keys. */
export function seriesLabel(path: string): string {
  const keys = filenameKeys(path);
  const parts: string[] = [];
  if (keys["cv"]) parts.push(ESTIMATOR_LABELS[keys["cv"]] ?? keys["cv"]);
  if (keys["M"]) parts.push(`(M=${keys["M"]})`);
  if (keys["alpha"]) parts.push(`α=${keys["alpha"]}`);
  if (parts.length === 0) {
    const stem = path.replace(/\\/g, "/").split("/").pop()!;
    return stem.replace(/\.[^.]*$/, "");
  }
  return parts.join(" ");
}

export function estimatorLabel(name: string): string {
  return ESTIMATOR_LABELS[name] ?? name;
}
