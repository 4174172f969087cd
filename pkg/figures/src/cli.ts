#!/usr/bin/env node
/**
 * figures table <suite.csv> --out <file> [--metrics a,b,...]
 * figures sweep <sweep.csv> --out <dir> [--metrics a,b,...] [--format svg]
 */

import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import { SchemaError, readSuiteCsv, readSweepCsv } from "./csv.js";
import { renderSweeps } from "./sweep.js";
import { renderTable } from "./table.js";

interface Args {
  input: string;
  out: string;
  metrics?: string[];
  format?: string;
}

function parseArgs(argv: string[], command: string): Args {
  let input: string | undefined;
  let out: string | undefined;
  let metrics: string[] | undefined;
  let format: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--out") out = argv[++i];
    else if (arg === "--metrics") metrics = argv[++i].split(",").map((s) => s.trim());
    else if (arg === "--format") format = argv[++i];
    else if (!arg.startsWith("--") && input === undefined) input = arg;
    else throw new Error(`unknown argument ${arg} for ${command}`);
  }
  if (!input) throw new Error(`${command} needs an input CSV path`);
  if (!out) throw new Error(`${command} needs --out`);
  return { input, out, metrics, format };
}

function cmdTable(argv: string[]): number {
  const args = parseArgs(argv, "table");
  const rows = readSuiteCsv(args.input);
  writeFileSync(args.out, renderTable(rows, { metrics: args.metrics }));
  console.log(`wrote ${args.out}`);
  return 0;
}

function cmdSweep(argv: string[]): number {
  const args = parseArgs(argv, "sweep");
  const rows = readSweepCsv(args.input);
  const charts = renderSweeps(rows, { metrics: args.metrics, format: args.format });
  mkdirSync(args.out, { recursive: true });
  for (const [name, svg] of charts) {
    writeFileSync(join(args.out, name), svg);
  }
  console.log(`wrote ${charts.size} chart(s) to ${args.out}`);
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "table") return cmdTable(rest);
    if (command === "sweep") return cmdSweep(rest);
    console.error("usage: figures <table|sweep> <csv> --out <path> [--metrics m1,m2] [--format svg]");
    return 2;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof Error) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && import.meta.url === new URL(`file://${process.argv[1]}`).href) {
  process.exit(main(process.argv.slice(2)));
}
