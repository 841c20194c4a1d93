/**
 * Minimal deterministic SVG emission: linear/log scales, tick generation,
 * axes, polylines, and legends. No timestamps or random ids anywhere, so a
 * rerun on identical inputs produces identical bytes.
 */

export interface Scale {
  (value: number): number;
  ticks(): number[];
  domain: [number, number];
}

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];

export function color(index: number): string {
  return PALETTE[index % PALETTE.length]!;
}

function niceLinearTicks(lo: number, hi: number, count = 6): number[] {
  if (hi === lo) return [lo];
  const rawStep = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const candidates = [1, 2, 5, 10].map((m) => m * mag);
  const step = candidates.find((s) => (hi - lo) / s <= count) ?? candidates[3]!;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * step ? 0 : v);
  }
  return ticks;
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.ticks = () => niceLinearTicks(d0, d1);
  fn.domain = domain;
  return fn;
}

export function logScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  if (d0 <= 0 || d1 <= 0) {
    throw new Error(`log scale needs positive domain, got [${d0}, ${d1}]`);
  }
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const [r0, r1] = range;
  const span = l1 - l0 || 1;
  const fn = ((v: number) =>
    r0 + ((Math.log10(v) - l0) / span) * (r1 - r0)) as Scale;
  fn.ticks = () => {
    const ticks: number[] = [];
    for (let e = Math.ceil(l0 - 1e-9); e <= Math.floor(l1 + 1e-9); e++) {
      ticks.push(Math.pow(10, e));
    }
    return ticks.length >= 2 ? ticks : [d0, d1];
  };
  fn.domain = domain;
  return fn;
}

export function formatTick(value: number): string {
  if (value === 0) return "0";
  const abs = Math.abs(value);
  if (abs >= 1e4 || abs < 1e-3) return value.toExponential(0).replace("+", "");
  return String(Number(value.toPrecision(6)));
}

export interface Frame {
  x: number;
  y: number;
  width: number;
  height: number;
}

export function axes(
  frame: Frame,
  xScale: Scale,
  yScale: Scale,
  xLabel: string,
  yLabel: string,
): string {
  const parts: string[] = [];
  const bottom = frame.y + frame.height;
  parts.push(
    `<rect x="${frame.x}" y="${frame.y}" width="${frame.width}" ` +
      `height="${frame.height}" fill="none" stroke="#333"/>`,
  );
  for (const t of xScale.ticks()) {
    const px = xScale(t);
    if (px < frame.x - 0.5 || px > frame.x + frame.width + 0.5) continue;
    parts.push(
      `<line x1="${px.toFixed(2)}" y1="${bottom}" x2="${px.toFixed(2)}" ` +
        `y2="${bottom + 4}" stroke="#333"/>`,
      `<text x="${px.toFixed(2)}" y="${bottom + 16}" font-size="10" ` +
        `text-anchor="middle">${formatTick(t)}</text>`,
    );
  }
  for (const t of yScale.ticks()) {
    const py = yScale(t);
    if (py < frame.y - 0.5 || py > bottom + 0.5) continue;
    parts.push(
      `<line x1="${frame.x - 4}" y1="${py.toFixed(2)}" x2="${frame.x}" ` +
        `y2="${py.toFixed(2)}" stroke="#333"/>`,
      `<text x="${frame.x - 6}" y="${(py + 3).toFixed(2)}" font-size="10" ` +
        `text-anchor="end">${formatTick(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${frame.x + frame.width / 2}" y="${bottom + 32}" ` +
      `font-size="11" text-anchor="middle">${escapeXml(xLabel)}</text>`,
    `<text x="${frame.x - 44}" y="${frame.y + frame.height / 2}" ` +
      `font-size="11" text-anchor="middle" transform="rotate(-90 ` +
      `${frame.x - 44} ${frame.y + frame.height / 2})">${escapeXml(yLabel)}</text>`,
  );
  return parts.join("\n");
}

export function polyline(
  xs: number[],
  ys: number[],
  xScale: Scale,
  yScale: Scale,
  stroke: string,
  dashed = false,
): string {
  const points = xs
    .map((x, i) => `${xScale(x).toFixed(2)},${yScale(ys[i]!).toFixed(2)}`)
    .join(" ");
  const dash = dashed ? ` stroke-dasharray="5,3"` : "";
  return `<polyline points="${points}" fill="none" stroke="${stroke}" stroke-width="1.5"${dash}/>`;
}

export function markers(
  xs: number[],
  ys: number[],
  xScale: Scale,
  yScale: Scale,
  fill: string,
): string {
  return xs
    .map(
      (x, i) =>
        `<circle cx="${xScale(x).toFixed(2)}" cy="${yScale(ys[i]!).toFixed(2)}" r="2.5" fill="${fill}"/>`,
    )
    .join("\n");
}

export interface LegendEntry {
  label: string;
  stroke: string;
  dashed?: boolean;
}

export function legend(entries: LegendEntry[], x: number, y: number): string {
  const parts: string[] = [];
  entries.forEach((entry, i) => {
    const ly = y + 14 * i;
    const dash = entry.dashed ? ` stroke-dasharray="5,3"` : "";
    parts.push(
      `<line x1="${x}" y1="${ly}" x2="${x + 18}" y2="${ly}" ` +
        `stroke="${entry.stroke}" stroke-width="1.5"${dash}/>`,
      `<text x="${x + 23}" y="${ly + 3.5}" font-size="10">${escapeXml(entry.label)}</text>`,
    );
  });
  return parts.join("\n");
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function document(
  width: number,
  height: number,
  body: string,
  title: string,
): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}" ` +
    `font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    `<text x="${width / 2}" y="18" font-size="13" text-anchor="middle" ` +
    `font-weight="bold">${escapeXml(title)}</text>\n` +
    body +
    `\n</svg>\n`
  );
}
