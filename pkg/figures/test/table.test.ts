import { join } from "path";
import { describe, expect, it } from "vitest";

import { readSuiteCsv, SuiteRow } from "../dist/csv.js";
import { renderTable } from "../dist/table.js";

const FIXTURES = join(__dirname, "fixtures");

function row(task: string, method: string, metrics: Partial<SuiteRow["metrics"]>): SuiteRow {
  return {
    task,
    method,
    rounds: 10,
    metrics: {
      accuracy: 0.5,
      recall: 0.5,
      precision: 0.5,
      specificity: 0.5,
      f1: 0.5,
      ap: 0.5,
      ...metrics,
    },
  };
}

describe("renderTable", () => {
  it("groups the 45-row fixture into 9 tasks of 5 methods", () => {
    const rows = readSuiteCsv(join(FIXTURES, "suite45.csv"));
    const text = renderTable(rows);
    const lines = text.trim().split("\n");
    expect(lines).toHaveLength(2 + 45);
    const taskCells = lines.slice(2).map((l) => l.split("|")[1].trim());
    const labels = taskCells.filter((c) => c.length > 0);
    expect(labels).toEqual(["T0", "T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8"]);
  });

  it("bolds the best value per column within each task group", () => {
    const rows = [
      row("T0", "a", { accuracy: 0.9, recall: 0.2 }),
      row("T0", "b", { accuracy: 0.8, recall: 0.7 }),
      row("T1", "a", { accuracy: 0.1, recall: 0.1 }),
    ];
    const lines = renderTable(rows).trim().split("\n");
    expect(lines[2]).toContain("**0.900**");
    expect(lines[2]).not.toContain("**0.200**");
    expect(lines[3]).toContain("**0.700**");
    // T1's only row is its own best even with low values
    expect(lines[4]).toContain("**0.100**");
  });

  it("bolds every member of a tie", () => {
    const rows = [
      row("T0", "a", { f1: 0.75 }),
      row("T0", "b", { f1: 0.75 }),
      row("T0", "c", { f1: 0.2 }),
    ];
    const text = renderTable(rows, { metrics: ["f1"] });
    expect(text.match(/\*\*0\.750\*\*/g)).toHaveLength(2);
  });

  it("renders N/A literally and never as the best", () => {
    const rows = [
      row("T1", "baseline", { precision: null, f1: null }),
      row("T1", "frt", { precision: 0.4, f1: 0.3 }),
    ];
    const text = renderTable(rows, { metrics: ["precision", "f1"] });
    expect(text).toContain("N/A");
    expect(text).toContain("**0.400**");
    expect(text).not.toContain("**N/A**");
  });

  it("is deterministic", () => {
    const rows = readSuiteCsv(join(FIXTURES, "suite45.csv"));
    expect(renderTable(rows)).toBe(renderTable(rows));
  });

  it("rejects unknown metric subsets by name", () => {
    expect(() => renderTable([], { metrics: ["bogus"] })).toThrowError(
      /unknown metric column: bogus/,
    );
  });
});
