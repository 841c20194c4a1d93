import { SWEEP_COLUMNS, TRACE_COLUMNS } from "../src/csv.js";

export function traceCsv(rows: number[][]): string {
  const lines = [TRACE_COLUMNS.join(",")];
  for (const row of rows) lines.push(row.join(","));
  return lines.join("\n") + "\n";
}

export function sweepCsv(rows: (number | string)[][]): string {
  const lines = [SWEEP_COLUMNS.join(",")];
  for (const row of rows) lines.push(row.join(","));
  return lines.join("\n") + "\n";
}

/** A decaying-variance, rising-ELBO trace, deterministic in its arguments. */
export function syntheticTrace(
  iterations: number,
  step: number,
  level: number,
): string {
  const rows: number[][] = [];
  for (let k = 0; k < iterations; k += step) {
    const progress = k / iterations;
    rows.push([
      k,
      k * 3,
      -20 * level * Math.exp(-3 * progress) - 5,
      100 * level * Math.exp(-4 * progress) + 0.01,
      10 * level * Math.exp(-4 * progress) + 0.001,
      90 * level * Math.exp(-4 * progress) + 0.009,
      -0.8 * progress,
    ]);
  }
  return traceCsv(rows);
}
