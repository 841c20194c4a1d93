import { describe, expect, it } from "vitest";

import {
  filenameKeys,
  parseSweep,
  parseTrace,
  seriesLabel,
} from "../src/csv.js";
import { traceCsv, sweepCsv } from "./fixtures.js";

describe("parseTrace", () => {
  it("round-trips rows", () => {
    const rows = parseTrace(
      traceCsv([
        [0, 0, -10.5, 4.0, 1.0, 3.0, 0.0],
        [5, 12, -9.25, 2.0, 0.5, 1.5, -0.9],
      ]),
      "t.csv",
    );
    expect(rows).toHaveLength(2);
    expect(rows[1]).toEqual({
      iteration: 5,
      elapsed_ms: 12,
      elbo_estimate: -9.25,
      var_total: 2.0,
      var_mean_block: 0.5,
      var_scale_block: 1.5,
      gamma: -0.9,
    });
  });

  it("rejects a header missing a column by name", () => {
    const text = "iteration,elapsed_ms,elbo_estimate\n0,0,-1\n";
    expect(() => parseTrace(text, "t.csv")).toThrow(/missing column var_total/);
  });

  it("rejects an empty trace", () => {
    expect(() => parseTrace(traceCsv([]), "t.csv")).toThrow(/no data rows/);
  });

  it("rejects non-increasing iterations", () => {
    const text = traceCsv([
      [3, 0, -1, 1, 1, 1, 0],
      [3, 0, -1, 1, 1, 1, 0],
    ]);
    expect(() => parseTrace(text, "t.csv")).toThrow(/strictly increasing/);
  });

  it("rejects malformed numbers with a line number", () => {
    const text = traceCsv([[0, 0, -1, 1, 1, 1, 0]]).replace("-1", "oops");
    expect(() => parseTrace(text, "t.csv")).toThrow(/line 2.*oops/);
  });
});

describe("parseSweep", () => {
  it("parses estimator rows", () => {
    const rows = parseSweep(
      sweepCsv([
        [0.1, "none", 100, 10, 90],
        [0.1, "taylor", 50, 5, 45],
      ]),
      "s.csv",
    );
    expect(rows[1]!.estimator).toBe("taylor");
    expect(rows[1]!.var_scale_block).toBe(45);
  });

  it("rejects the trace header", () => {
    expect(() => parseSweep(traceCsv([[0, 0, -1, 1, 1, 1, 0]]), "s.csv"))
      .toThrow(/missing column sigma/);
  });
});

describe("filename metadata", () => {
  it("extracts key=value pairs from the stem", () => {
    expect(filenameKeys("/runs/trace_cv=taylor_M=10.csv")).toEqual({
      cv: "taylor",
      M: "10",
    });
  });

  it("recognizes the step-size grid naming", () => {
    expect(filenameKeys("out/grid_alpha0.001.csv")).toEqual({
      alpha: "0.001",
    });
  });

  it("labels estimators for the legend", () => {
    expect(seriesLabel("a/cv=none_M=10.csv")).toBe("Base (M=10)");
    expect(seriesLabel("a/cv=quadratic_m2.csv")).toBe("Quadratic (M2)");
    expect(seriesLabel("a/mystery.csv")).toBe("mystery");
  });
});
