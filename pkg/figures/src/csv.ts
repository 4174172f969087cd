/**
 * CSV loading and schema validation for the harness output files.
 *
 * Two schemas exist:
 *   suite: task,method,rounds,<metrics...>
 *   sweep: task,method,param,value,rounds,<metrics...>
 * Metric cells are fixed-point numbers or the literal "N/A".
 */

import { readFileSync } from "fs";

export const METRICS = ["accuracy", "recall", "precision", "specificity", "f1", "ap"] as const;
export type Metric = (typeof METRICS)[number];

export const SUITE_COLUMNS = ["task", "method", "rounds", ...METRICS];
export const SWEEP_COLUMNS = ["task", "method", "param", "value", "rounds", ...METRICS];

/** A metric cell: a number, or null for a literal N/A. */
export type Cell = number | null;

export interface SuiteRow {
  task: string;
  method: string;
  rounds: number;
  metrics: Record<Metric, Cell>;
}

export interface SweepRow {
  task: string;
  method: string;
  param: string;
  value: number;
  rounds: number;
  metrics: Record<Metric, Cell>;
}

export class SchemaError extends Error {}

function diffColumns(expected: string[], actual: string[]): string {
  const missing = expected.filter((c) => !actual.includes(c));
  const unexpected = actual.filter((c) => !expected.includes(c));
  const parts = [];
  if (missing.length) parts.push(`missing columns: ${missing.join(", ")}`);
  if (unexpected.length) parts.push(`unexpected columns: ${unexpected.join(", ")}`);
  if (expected.join() !== actual.join() && !parts.length) {
    parts.push(`column order must be: ${expected.join(",")}`);
  }
  return parts.join("; ");
}

function parseLines(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.trim().length > 0)
    .map((line) => line.split(","));
}

function checkHeader(header: string[], expected: string[], path: string): void {
  if (header.join() !== expected.join()) {
    throw new SchemaError(`${path}: ${diffColumns(expected, header)}`);
  }
}

function parseCell(raw: string, path: string, line: number): Cell {
  if (raw === "N/A") return null;
  const value = Number(raw);
  if (Number.isNaN(value)) {
    throw new SchemaError(`${path}:${line}: metric cell ${JSON.stringify(raw)} is not a number or N/A`);
  }
  return value;
}

function parseMetrics(fields: string[], offset: number, path: string, line: number) {
  const metrics = {} as Record<Metric, Cell>;
  METRICS.forEach((name, i) => {
    metrics[name] = parseCell(fields[offset + i], path, line);
  });
  return metrics;
}

export function readSuiteCsv(path: string): SuiteRow[] {
  const rows = parseLines(readFileSync(path, "utf8"));
  if (!rows.length) throw new SchemaError(`${path}: empty file`);
  checkHeader(rows[0], SUITE_COLUMNS, path);
  return rows.slice(1).map((fields, i) => {
    if (fields.length !== SUITE_COLUMNS.length) {
      throw new SchemaError(`${path}:${i + 2}: expected ${SUITE_COLUMNS.length} fields, got ${fields.length}`);
    }
    return {
      task: fields[0],
      method: fields[1],
      rounds: Number(fields[2]),
      metrics: parseMetrics(fields, 3, path, i + 2),
    };
  });
}

export function readSweepCsv(path: string): SweepRow[] {
  const rows = parseLines(readFileSync(path, "utf8"));
  if (!rows.length) throw new SchemaError(`${path}: empty file`);
  checkHeader(rows[0], SWEEP_COLUMNS, path);
  return rows.slice(1).map((fields, i) => {
    if (fields.length !== SWEEP_COLUMNS.length) {
      throw new SchemaError(`${path}:${i + 2}: expected ${SWEEP_COLUMNS.length} fields, got ${fields.length}`);
    }
    return {
      task: fields[0],
      method: fields[1],
      param: fields[2],
      value: Number(fields[3]),
      rounds: Number(fields[4]),
      metrics: parseMetrics(fields, 5, path, i + 2),
    };
  });
}

/** Validate a requested metric subset, naming any unknown column. */
export function checkMetricSubset(requested: string[]): Metric[] {
  for (const name of requested) {
    if (!METRICS.includes(name as Metric)) {
      throw new SchemaError(`unknown metric column: ${name} (expected among ${METRICS.join(", ")})`);
    }
  }
  return requested as Metric[];
}
