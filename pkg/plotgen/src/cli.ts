#!/usr/bin/env node
// plotgen <curves|hist|stages>: pufadv CSVs in, deterministic SVG out.

import { readFileSync, realpathSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";
import { Band, FigureOptions, renderAdvantageCurves, renderBiasHistogram, renderStageSweep } from "./charts.js";
import { DataError, SchemaError, parseHistCsv, parseSweepCsv } from "./csv.js";
import { loadStyle } from "./style.js";

const USAGE = `usage: plotgen <curves|hist|stages> --in data.csv [--in more.csv] --out figure.svg

figure kinds
  curves   advantage vs observed CRPs, one line per architecture (sweep CSV)
  stages   advantage vs stage count k (sweep CSV); --log-x for a log2 axis
  hist     per-challenge bias histogram, overlaid series (hist CSV)

options
  --in PATH        input CSV, repeatable for curves/stages (rows concatenate)
  --out PATH       output SVG path (required)
  --title TEXT     figure title
  --x-label TEXT   x axis label override
  --y-label TEXT   y axis label override
  --band LO,HI     shaded overlay range, repeatable (y range for line
                   figures, x range for hist)
  --log-x          log2 x axis (stages only)
  --style PATH     JSON file overriding the fixed default style
  --help           this text
`;

function fail(message: string, code: number): number {
  process.stderr.write(`plotgen: ${message}\n`);
  return code;
}

function parseBand(raw: string): Band {
  const parts = raw.split(",");
  const lo = Number(parts[0]);
  const hi = Number(parts[1]);
  if (parts.length !== 2 || !Number.isFinite(lo) || !Number.isFinite(hi) || lo >= hi) {
    throw new RangeError(`--band wants LO,HI with LO < HI, got ${JSON.stringify(raw)}`);
  }
  return { lo, hi };
}

export function run(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        in: { type: "string", multiple: true },
        out: { type: "string" },
        title: { type: "string" },
        "x-label": { type: "string" },
        "y-label": { type: "string" },
        band: { type: "string", multiple: true },
        "log-x": { type: "boolean" },
        style: { type: "string" },
        help: { type: "boolean" },
      },
    });
  } catch (err) {
    return fail((err as Error).message, 2);
  }
  const { values, positionals } = parsed;
  if (values.help) {
    process.stdout.write(USAGE);
    return 0;
  }
  const kind = positionals[0];
  if (positionals.length !== 1 || !["curves", "hist", "stages"].includes(kind!)) {
    return fail(`expected one figure kind (curves | hist | stages)\n\n${USAGE}`, 2);
  }
  const inputs = values.in ?? [];
  if (inputs.length === 0) return fail("--in is required", 2);
  if (!values.out) return fail("--out is required", 2);
  if (values["log-x"] && kind !== "stages") {
    return fail("--log-x only applies to the stages figure", 2);
  }
  if (kind === "hist" && inputs.length > 1) {
    return fail("hist takes exactly one --in (series names would collide)", 2);
  }

  let bands: Band[];
  try {
    bands = (values.band ?? []).map(parseBand);
  } catch (err) {
    return fail((err as Error).message, 2);
  }

  const opts: FigureOptions = { bands, logX: values["log-x"] ?? false };
  if (values.title !== undefined) opts.title = values.title;
  if (values["x-label"] !== undefined) opts.xLabel = values["x-label"];
  if (values["y-label"] !== undefined) opts.yLabel = values["y-label"];

  let style;
  try {
    style = loadStyle(values.style);
  } catch (err) {
    return fail(`--style: ${(err as Error).message}`, 2);
  }

  try {
    let svg: string;
    if (kind === "hist") {
      svg = renderBiasHistogram(parseHistCsv(readFileSync(inputs[0]!, "utf8"), inputs[0]!), opts, style);
    } else {
      const rows = inputs.flatMap((p) => parseSweepCsv(readFileSync(p, "utf8"), p));
      svg = kind === "curves"
        ? renderAdvantageCurves(rows, opts, style)
        : renderStageSweep(rows, opts, style);
    }
    // the full figure is rendered before the file opens: no partial output
    writeFileSync(values.out, svg);
  } catch (err) {
    if (err instanceof SchemaError || err instanceof DataError) {
      return fail((err as Error).message, 1);
    }
    if ((err as NodeJS.ErrnoException).code !== undefined) {
      return fail((err as Error).message, 1);
    }
    throw err;
  }
  return 0;
}

const entry = process.argv[1];
if (entry !== undefined && import.meta.url === pathToFileURL(realpathSync(entry)).href) {
  process.exit(run(process.argv.slice(2)));
}
