#!/usr/bin/env node
/**
 * Figure rendering CLI.
 *
 * Usage: quadcv-plot plot --kind KIND --in GLOB --out PATH [--log-x] [--log-y]
 *
 * KIND is one of elbo_iter, elbo_time, final_vs_stepsize, variance_trace,
 * sigma_sweep. GLOB supports * and ? in the final path component.
 */

import { readFileSync, readdirSync, writeFileSync } from "node:fs";
import { basename, dirname, join } from "node:path";

import { FIGURE_KINDS, FigureKind, FigureSpec, renderToString } from "./figures.js";

export function expandGlob(pattern: string): string[] {
  const dir = dirname(pattern);
  const base = basename(pattern);
  if (!/[*?]/.test(base)) return [pattern];
  const regex = new RegExp(
    "^" +
      base
        .replace(/[.+^${}()|[\]\\]/g, "\\$&")
        .replace(/\*/g, ".*")
        .replace(/\?/g, ".") +
      "$",
  );
  return readdirSync(dir)
    .filter((name) => regex.test(name))
    .sort()
    .map((name) => join(dir, name));
}

export function render(spec: FigureSpec): void {
  const inputs = spec.inputs.map((path) => ({
    path,
    text: readFileSync(path, "utf8"),
  }));
  const svg = renderToString(spec.kind, inputs, spec.logX, spec.logY);
  writeFileSync(spec.output, svg);
}

interface ParsedArgs {
  kind: FigureKind;
  pattern: string;
  output: string;
  logX?: boolean;
  logY?: boolean;
}

export function parseArgs(argv: string[]): ParsedArgs {
  if (argv[0] !== "plot") {
    throw new Error(`unknown subcommand ${argv[0] ?? "(none)"}; expected plot`);
  }
  let kind: string | undefined;
  let pattern: string | undefined;
  let output: string | undefined;
  let logX: boolean | undefined;
  let logY: boolean | undefined;
  for (let i = 1; i < argv.length; i++) {
    const flag = argv[i]!;
    const next = () => {
      const value = argv[++i];
      if (value === undefined) throw new Error(`${flag} needs a value`);
      return value;
    };
    if (flag === "--kind") kind = next();
    else if (flag === "--in") pattern = next();
    else if (flag === "--out") output = next();
    else if (flag === "--log-x") logX = true;
    else if (flag === "--log-y") logY = true;
    else throw new Error(`unknown flag ${flag}`);
  }
  if (!kind || !pattern || !output) {
    throw new Error("plot requires --kind, --in and --out");
  }
  if (!(FIGURE_KINDS as readonly string[]).includes(kind)) {
    throw new Error(
      `unknown kind ${kind}; expected one of ${FIGURE_KINDS.join(", ")}`,
    );
  }
  return { kind: kind as FigureKind, pattern, output, logX, logY };
}

export function main(argv: string[]): number {
  let args: ParsedArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const inputs = expandGlob(args.pattern);
    if (inputs.length === 0) {
      throw new Error(`no files match ${args.pattern}`);
    }
    render({
      kind: args.kind,
      inputs,
      output: args.output,
      logX: args.logX,
      logY: args.logY,
    });
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
  return 0;
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
