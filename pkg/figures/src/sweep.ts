/**
 * Sweep curve charts: one SVG per swept parameter, one line per metric,
 * x = parameter value, y in [0, 1]. N/A points are skipped; a
 * single-value sweep degenerates to markers without a path.
 */

import { Metric, METRICS, SweepRow, checkMetricSubset } from "./csv.js";
import { document, el, escapeText } from "./svg.js";

export interface SweepSpec {
  metrics?: string[];
  format?: string;
}

const WIDTH = 560;
const HEIGHT = 360;
const MARGIN = { left: 56, right: 140, top: 36, bottom: 48 };

const COLORS: Record<Metric, string> = {
  accuracy: "#1f77b4",
  recall: "#ff7f0e",
  precision: "#2ca02c",
  specificity: "#d62728",
  f1: "#9467bd",
  ap: "#8c564b",
};

export function groupByParam(rows: SweepRow[]): Map<string, SweepRow[]> {
  const groups = new Map<string, SweepRow[]>();
  for (const row of rows) {
    const group = groups.get(row.param) ?? [];
    group.push(row);
    groups.set(row.param, group);
  }
  for (const group of groups.values()) {
    group.sort((a, b) => a.value - b.value);
  }
  return groups;
}

function xScale(values: number[]): (v: number) => number {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo;
  const inner = WIDTH - MARGIN.left - MARGIN.right;
  if (span === 0) return () => MARGIN.left + inner / 2;
  return (v) => MARGIN.left + ((v - lo) / span) * inner;
}

function yScale(v: number): number {
  const inner = HEIGHT - MARGIN.top - MARGIN.bottom;
  return MARGIN.top + (1 - v) * inner;
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : String(Number(v.toPrecision(6)));
}

export function renderSweepChart(param: string, rows: SweepRow[], spec: SweepSpec = {}): string {
  const metrics = spec.metrics ? checkMetricSubset(spec.metrics) : [...METRICS];
  const task = rows[0]?.task ?? "";
  const method = rows[0]?.method ?? "";
  const values = rows.map((r) => r.value);
  const x = xScale(values);
  const body: string[] = [];
  body.push(el("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "white" }));
  body.push(
    el(
      "text",
      { x: WIDTH / 2, y: 20, "text-anchor": "middle", "font-size": 14, "font-family": "sans-serif" },
      escapeText(`${task} ${method}: sweep over ${param}`),
    ),
  );
  // axes
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = yScale(0);
  const y1 = yScale(1);
  body.push(el("line", { x1: x0, y1: y0, x2: x1, y2: y0, stroke: "black" }));
  body.push(el("line", { x1: x0, y1: y0, x2: x0, y2: y1, stroke: "black" }));
  for (const tick of [0, 0.25, 0.5, 0.75, 1]) {
    const y = yScale(tick);
    body.push(el("line", { x1: x0 - 4, y1: y, x2: x0, y2: y, stroke: "black" }));
    body.push(
      el(
        "text",
        { x: x0 - 8, y: y + 4, "text-anchor": "end", "font-size": 10, "font-family": "sans-serif" },
        tick.toFixed(2),
      ),
    );
  }
  for (const value of [...new Set(values)]) {
    const vx = x(value);
    body.push(el("line", { x1: vx, y1: y0, x2: vx, y2: y0 + 4, stroke: "black" }));
    body.push(
      el(
        "text",
        { x: vx, y: y0 + 16, "text-anchor": "middle", "font-size": 10, "font-family": "sans-serif" },
        fmt(value),
      ),
    );
  }
  body.push(
    el(
      "text",
      { x: (x0 + x1) / 2, y: HEIGHT - 10, "text-anchor": "middle", "font-size": 12, "font-family": "sans-serif" },
      escapeText(param),
    ),
  );
  body.push(
    el(
      "text",
      {
        x: 14,
        y: (y0 + y1) / 2,
        "text-anchor": "middle",
        "font-size": 12,
        "font-family": "sans-serif",
        transform: `rotate(-90 14 ${(y0 + y1) / 2})`,
      },
      "metric value",
    ),
  );
  metrics.forEach((metric, mi) => {
    const points = rows
      .filter((r) => r.metrics[metric] !== null)
      .map((r) => [x(r.value), yScale(r.metrics[metric] as number)] as const);
    const color = COLORS[metric];
    if (points.length > 1) {
      const path = points.map(([px, py]) => `${px.toFixed(2)},${py.toFixed(2)}`).join(" ");
      body.push(el("polyline", { points: path, fill: "none", stroke: color, "stroke-width": 1.5 }));
    }
    for (const [px, py] of points) {
      body.push(el("circle", { cx: px.toFixed(2), cy: py.toFixed(2), r: 2.5, fill: color }));
    }
    // legend
    const ly = MARGIN.top + 14 * mi;
    body.push(el("line", { x1: x1 + 12, y1: ly, x2: x1 + 30, y2: ly, stroke: color, "stroke-width": 2 }));
    body.push(
      el(
        "text",
        { x: x1 + 34, y: ly + 4, "font-size": 11, "font-family": "sans-serif" },
        metric,
      ),
    );
  });
  return document(WIDTH, HEIGHT, body);
}

/** Render every parameter group; returns filename -> svg text. */
export function renderSweeps(rows: SweepRow[], spec: SweepSpec = {}): Map<string, string> {
  const format = spec.format ?? "svg";
  if (format !== "svg") {
    throw new Error(`unsupported image format: ${format} (svg available)`);
  }
  const out = new Map<string, string>();
  for (const [param, group] of groupByParam(rows)) {
    out.set(`sweep_${param}.svg`, renderSweepChart(param, group, spec));
  }
  return out;
}
