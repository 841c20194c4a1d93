/**
 * The five figure kinds, each rendered from parsed CSV rows into a single
 * SVG string. File IO lives in the caller; everything here is pure.
 */

import {
  SweepRow,
  TraceRow,
  estimatorLabel,
  filenameKeys,
  parseSweep,
  parseTrace,
  seriesLabel,
} from "./csv.js";
import {
  Frame,
  LegendEntry,
  Scale,
  axes,
  color,
  document,
  legend,
  linearScale,
  logScale,
  markers,
  polyline,
} from "./svg.js";

export const FIGURE_KINDS = [
  "elbo_iter",
  "elbo_time",
  "final_vs_stepsize",
  "variance_trace",
  "sigma_sweep",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  /** Input CSV paths; the sweep kind takes the runner's variance table,
   * everything else takes per-run traces. */
  inputs: string[];
  output: string;
  logX?: boolean;
  logY?: boolean;
}

export interface NamedInput {
  path: string;
  text: string;
}

const WIDTH = 640;
const HEIGHT = 400;
const FRAME: Frame = { x: 70, y: 40, width: WIDTH - 100, height: HEIGHT - 95 };

interface Series {
  label: string;
  xs: number[];
  ys: number[];
  dashed?: boolean;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

function padded(domain: [number, number], log: boolean): [number, number] {
  const [lo, hi] = domain;
  if (log) return [lo / 1.3, hi * 1.3];
  const pad = (hi - lo || Math.abs(hi) || 1) * 0.05;
  return [lo - pad, hi + pad];
}

function makeScale(
  domain: [number, number],
  range: [number, number],
  log: boolean,
): Scale {
  return log ? logScale(domain, range) : linearScale(domain, range);
}

function lineChart(
  series: Series[],
  xLabel: string,
  yLabel: string,
  title: string,
  logX: boolean,
  logY: boolean,
  withMarkers = false,
): string {
  if (series.length === 0) throw new Error("no series to plot");
  let xs: number[] = [];
  let ys: number[] = [];
  for (const s of series) {
    xs = xs.concat(s.xs);
    ys = ys.concat(s.ys);
  }
  if (logY) ys = ys.filter((v) => v > 0);
  if (ys.length === 0) throw new Error("no positive values for log axis");
  const xScale = makeScale(
    logX ? padded(extent(xs), true) : extent(xs),
    [FRAME.x, FRAME.x + FRAME.width],
    logX,
  );
  const yScale = makeScale(padded(extent(ys), logY), [
    FRAME.y + FRAME.height,
    FRAME.y,
  ], logY);
  const parts: string[] = [axes(FRAME, xScale, yScale, xLabel, yLabel)];
  const entries: LegendEntry[] = [];
  series.forEach((s, i) => {
    let sx = s.xs;
    let sy = s.ys;
    if (logY) {
      const keep = sy.map((v) => v > 0);
      sx = sx.filter((_, j) => keep[j]);
      sy = sy.filter((_, j) => keep[j]);
    }
    parts.push(polyline(sx, sy, xScale, yScale, color(i), s.dashed));
    if (withMarkers) parts.push(markers(sx, sy, xScale, yScale, color(i)));
    entries.push({ label: s.label, stroke: color(i), dashed: s.dashed });
  });
  parts.push(legend(entries, FRAME.x + 8, FRAME.y + 12));
  return document(WIDTH, HEIGHT, parts.join("\n"), title);
}

function traceSeries(
  inputs: NamedInput[],
  x: (r: TraceRow) => number,
  y: (r: TraceRow) => number,
): Series[] {
  return inputs.map((input) => {
    const rows = parseTrace(input.text, input.path);
    return {
      label: seriesLabel(input.path),
      xs: rows.map(x),
      ys: rows.map(y),
    };
  });
}

/** Per-iteration max over a grid of step-size traces: the objective an
 * oracle that picked the best step size in hindsight would report. */
function retrospectiveBest(series: Series[]): Series | null {
  const withAlpha = series.filter((s) => s.label.includes("α="));
  if (withAlpha.length < 2) return null;
  const best = new Map<number, number>();
  for (const s of withAlpha) {
    s.xs.forEach((x, i) => {
      const y = s.ys[i]!;
      const prev = best.get(x);
      if (prev === undefined || y > prev) best.set(x, y);
    });
  }
  const xs = [...best.keys()].sort((a, b) => a - b);
  return {
    label: "best step size (retrospective)",
    xs,
    ys: xs.map((x) => best.get(x)!),
    dashed: true,
  };
}

function elboChart(
  inputs: NamedInput[],
  byTime: boolean,
  logX: boolean,
  logY: boolean,
): string {
  const series = traceSeries(
    inputs,
    byTime ? (r) => r.elapsed_ms / 1000 : (r) => r.iteration,
    (r) => r.elbo_estimate,
  );
  const retro = retrospectiveBest(series);
  if (retro && !byTime) series.push(retro);
  return lineChart(
    series,
    byTime ? "wall-clock time (s)" : "iteration",
    "ELBO estimate",
    byTime ? "ELBO vs time" : "ELBO vs iteration",
    logX,
    logY,
  );
}

function finalVsStepsize(
  inputs: NamedInput[],
  logX: boolean,
  logY: boolean,
): string {
  const points: { alpha: number; final: number }[] = [];
  for (const input of inputs) {
    const alpha = filenameKeys(input.path)["alpha"];
    if (alpha === undefined) {
      throw new Error(
        `${input.path}: no step size in filename (expected alpha<value> or alpha=<value>)`,
      );
    }
    const rows = parseTrace(input.text, input.path);
    points.push({
      alpha: Number(alpha),
      final: rows[rows.length - 1]!.elbo_estimate,
    });
  }
  points.sort((a, b) => a.alpha - b.alpha);
  return lineChart(
    [
      {
        label: "final ELBO",
        xs: points.map((p) => p.alpha),
        ys: points.map((p) => p.final),
      },
    ],
    "step size",
    "final ELBO estimate",
    "Final ELBO vs step size",
    logX,
    logY,
    true,
  );
}

function varianceTrace(
  inputs: NamedInput[],
  logX: boolean,
  logY: boolean,
): string {
  const series = traceSeries(
    inputs,
    (r) => r.iteration,
    (r) => r.var_total,
  );
  return lineChart(
    series,
    "iteration",
    "gradient variance",
    "Gradient variance vs iteration",
    logX,
    logY,
  );
}

const PANEL_WIDTH = 380;
const SWEEP_WIDTH = 2 * PANEL_WIDTH + 60;

function sweepPanel(
  rows: SweepRow[],
  field: "var_mean_block" | "var_scale_block",
  frame: Frame,
  heading: string,
  withLegend: boolean,
): string {
  const estimators = [...new Set(rows.map((r) => r.estimator))];
  const sigmas = [...new Set(rows.map((r) => r.sigma))].sort((a, b) => a - b);
  const values = rows.map((r) => r[field]).filter((v) => v > 0);
  if (values.length === 0) throw new Error("no positive variances to plot");
  const xScale = logScale(padded(extent(sigmas), true), [
    frame.x,
    frame.x + frame.width,
  ]);
  const yScale = logScale(padded(extent(values), true), [
    frame.y + frame.height,
    frame.y,
  ]);
  const parts: string[] = [
    axes(frame, xScale, yScale, "initial scale σ", "variance"),
    `<text x="${frame.x + frame.width / 2}" y="${frame.y - 6}" ` +
      `font-size="11" text-anchor="middle">${heading}</text>`,
  ];
  const entries: LegendEntry[] = [];
  estimators.forEach((name, i) => {
    const byName = rows.filter((r) => r.estimator === name);
    const xs = sigmas.filter((s) => byName.some((r) => r.sigma === s));
    const ys = xs.map((s) => byName.find((r) => r.sigma === s)![field]);
    parts.push(
      polyline(xs, ys, xScale, yScale, color(i)),
      markers(xs, ys, xScale, yScale, color(i)),
    );
    entries.push({ label: estimatorLabel(name), stroke: color(i) });
  });
  if (withLegend) parts.push(legend(entries, frame.x + 8, frame.y + 12));
  return parts.join("\n");
}

function sigmaSweep(inputs: NamedInput[]): string {
  const rows = inputs.flatMap((input) => parseSweep(input.text, input.path));
  const frameHeight = HEIGHT - 95;
  const left: Frame = { x: 70, y: 40, width: PANEL_WIDTH - 100, height: frameHeight };
  const right: Frame = {
    x: 70 + PANEL_WIDTH,
    y: 40,
    width: PANEL_WIDTH - 100,
    height: frameHeight,
  };
  const body =
    sweepPanel(rows, "var_mean_block", left, "mean block", true) +
    "\n" +
    sweepPanel(rows, "var_scale_block", right, "scale block", false);
  return document(SWEEP_WIDTH, HEIGHT, body, "Estimator variance vs initial scale");
}

/** Render one figure to an SVG string. Inputs must already be read; their
 * paths are used for legend labels and error messages. */
export function renderToString(
  kind: FigureKind,
  inputs: NamedInput[],
  logX?: boolean,
  logY?: boolean,
): string {
  if (inputs.length === 0) throw new Error("no input files");
  switch (kind) {
    case "elbo_iter":
      return elboChart(inputs, false, logX ?? false, logY ?? false);
    case "elbo_time":
      return elboChart(inputs, true, logX ?? false, logY ?? false);
    case "final_vs_stepsize":
      return finalVsStepsize(inputs, logX ?? true, logY ?? false);
    case "variance_trace":
      return varianceTrace(inputs, logX ?? false, logY ?? true);
    case "sigma_sweep":
      return sigmaSweep(inputs);
    default: {
      const never: never = kind;
      throw new Error(`unknown figure kind ${String(never)}`);
    }
  }
}
