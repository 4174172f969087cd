/**
 * Markdown comparison table: one group of rows per task, methods as
 * sub-rows, best value per (task, column) in bold. Ties are all bolded
 * and N/A cells render literally.
 */

import { Cell, Metric, METRICS, SuiteRow, checkMetricSubset } from "./csv.js";

export interface TableSpec {
  metrics?: string[];
}

const HEADINGS: Record<Metric, string> = {
  accuracy: "Accuracy",
  recall: "Recall",
  precision: "Precision",
  specificity: "Specificity",
  f1: "F1 Score",
  ap: "AP",
};

function formatCell(value: Cell, best: boolean): string {
  if (value === null) return "N/A";
  const text = value.toFixed(3);
  return best ? `**${text}**` : text;
}

function groupByTask(rows: SuiteRow[]): Map<string, SuiteRow[]> {
  const groups = new Map<string, SuiteRow[]>();
  for (const row of rows) {
    const group = groups.get(row.task) ?? [];
    group.push(row);
    groups.set(row.task, group);
  }
  return groups;
}

export function renderTable(rows: SuiteRow[], spec: TableSpec = {}): string {
  const metrics = spec.metrics ? checkMetricSubset(spec.metrics) : [...METRICS];
  const lines: string[] = [];
  lines.push(`| Task | Method | ${metrics.map((m) => HEADINGS[m]).join(" | ")} |`);
  lines.push(`|---|---|${metrics.map(() => "---:").join("|")}|`);
  for (const [task, group] of groupByTask(rows)) {
    // Best per column within the task group; N/A never wins.
    const best = new Map<Metric, number>();
    for (const metric of metrics) {
      const defined = group.map((r) => r.metrics[metric]).filter((v): v is number => v !== null);
      if (defined.length) best.set(metric, Math.max(...defined));
    }
    group.forEach((row, i) => {
      const cells = metrics.map((metric) => {
        const value = row.metrics[metric];
        return formatCell(value, value !== null && value === best.get(metric));
      });
      lines.push(`| ${i === 0 ? task : ""} | ${row.method} | ${cells.join(" | ")} |`);
    });
  }
  return lines.join("\n") + "\n";
}
