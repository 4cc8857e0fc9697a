/**
 * Strict readers for the two pufadv CSV formats.
 *
 * Both files open with a `# schema=` line that is checked verbatim; any
 * drift in the version tag or the column set aborts instead of guessing.
 */

export const SWEEP_SCHEMA = "pufadv.sweep.v1";
export const HIST_SCHEMA = "pufadv.hist.v1";

const SWEEP_COLUMNS = [
  "arch", "k", "n", "f1", "f2", "N", "N_PUF", "M_eval", "seed",
  "advantage", "bias", "stderr", "groups", "retained_instances",
  "weighting", "wall_time_s",
] as const;

const HIST_COLUMNS = [
  "row_kind", "series", "index", "value", "bin_lo", "bin_hi", "count",
] as const;

/** Input does not match the documented schema (version line or columns). */
export class SchemaError extends Error {}

/** Input parsed fine but cannot support the requested figure. */
export class DataError extends Error {}

export interface SweepRow {
  arch: string;
  k: number;
  n: number;
  f1: number | null;
  f2: number | null;
  N: number;
  nPuf: number;
  mEval: number;
  seed: string; // uint64, wider than a JS safe integer
  advantage: number;
  bias: number;
  stderr: number;
  groups: number;
  retained: number;
  weighting: string;
  wallTimeS: number;
}

export interface HistBin {
  lo: number;
  hi: number;
  count: number;
}

export interface HistSeries {
  name: string;
  means: number[];
  bins: HistBin[];
}

function splitLines(text: string): string[] {
  const lines = text.split("\n");
  if (lines.length && lines[lines.length - 1] === "") lines.pop();
  return lines;
}

function checkHeader(lines: string[], schema: string, columns: readonly string[], path: string): string[] {
  if (lines.length < 2) {
    throw new SchemaError(`${path}: missing schema line or header`);
  }
  if (lines[0] !== `# schema=${schema}`) {
    throw new SchemaError(`${path}: expected "# schema=${schema}", got ${JSON.stringify(lines[0])}`);
  }
  const header = lines[1]!.split(",");
  if (header.length !== columns.length || columns.some((c, i) => header[i] !== c)) {
    throw new SchemaError(`${path}: column set does not match ${schema} (got: ${lines[1]})`);
  }
  return lines.slice(2);
}

function num(field: string, column: string, line: number, path: string): number {
  const v = Number(field);
  if (field === "" || !Number.isFinite(v)) {
    throw new SchemaError(`${path}:${line}: bad numeric value ${JSON.stringify(field)} in column ${column}`);
  }
  return v;
}

function optNum(field: string, column: string, line: number, path: string): number | null {
  return field === "" ? null : num(field, column, line, path);
}

/** Parse a sweep CSV. `path` is used in error messages only. */
export function parseSweepCsv(text: string, path = "<sweep>"): SweepRow[] {
  const body = checkHeader(splitLines(text), SWEEP_SCHEMA, SWEEP_COLUMNS, path);
  const rows: SweepRow[] = [];
  for (let i = 0; i < body.length; i++) {
    const lineNo = i + 3; // schema + header + 1-based
    const f = body[i]!.split(",");
    if (f.length !== SWEEP_COLUMNS.length) {
      throw new SchemaError(`${path}:${lineNo}: expected ${SWEEP_COLUMNS.length} fields, got ${f.length}`);
    }
    rows.push({
      arch: f[0]!,
      k: num(f[1]!, "k", lineNo, path),
      n: num(f[2]!, "n", lineNo, path),
      f1: optNum(f[3]!, "f1", lineNo, path),
      f2: optNum(f[4]!, "f2", lineNo, path),
      N: num(f[5]!, "N", lineNo, path),
      nPuf: num(f[6]!, "N_PUF", lineNo, path),
      mEval: num(f[7]!, "M_eval", lineNo, path),
      seed: f[8]!,
      advantage: num(f[9]!, "advantage", lineNo, path),
      bias: num(f[10]!, "bias", lineNo, path),
      stderr: num(f[11]!, "stderr", lineNo, path),
      groups: num(f[12]!, "groups", lineNo, path),
      retained: num(f[13]!, "retained_instances", lineNo, path),
      weighting: f[14]!,
      wallTimeS: num(f[15]!, "wall_time_s", lineNo, path),
    });
  }
  return rows;
}

/** Parse a histogram CSV into its named series, preserving file order. */
export function parseHistCsv(text: string, path = "<hist>"): HistSeries[] {
  const body = checkHeader(splitLines(text), HIST_SCHEMA, HIST_COLUMNS, path);
  const byName = new Map<string, HistSeries>();
  const expectIndex = new Map<string, { mean: number; bin: number }>();
  for (let i = 0; i < body.length; i++) {
    const lineNo = i + 3;
    const f = body[i]!.split(",");
    if (f.length !== HIST_COLUMNS.length) {
      throw new SchemaError(`${path}:${lineNo}: expected ${HIST_COLUMNS.length} fields, got ${f.length}`);
    }
    const [kind, name] = [f[0]!, f[1]!];
    let series = byName.get(name);
    if (!series) {
      series = { name, means: [], bins: [] };
      byName.set(name, series);
      expectIndex.set(name, { mean: 0, bin: 0 });
    }
    const counters = expectIndex.get(name)!;
    const index = num(f[2]!, "index", lineNo, path);
    if (kind === "mean") {
      if (index !== counters.mean++) {
        throw new SchemaError(`${path}:${lineNo}: mean rows for ${name} out of order`);
      }
      series.means.push(num(f[3]!, "value", lineNo, path));
    } else if (kind === "bin") {
      if (index !== counters.bin++) {
        throw new SchemaError(`${path}:${lineNo}: bin rows for ${name} out of order`);
      }
      series.bins.push({
        lo: num(f[4]!, "bin_lo", lineNo, path),
        hi: num(f[5]!, "bin_hi", lineNo, path),
        count: num(f[6]!, "count", lineNo, path),
      });
    } else {
      throw new SchemaError(`${path}:${lineNo}: unknown row_kind ${JSON.stringify(kind)}`);
    }
  }
  const series = [...byName.values()];
  for (const s of series) {
    if (s.bins.length === 0) {
      throw new SchemaError(`${path}: series ${s.name} has no bin rows`);
    }
  }
  return series;
}

/**
 * Series label in the same TAG[:n[:f1:f2]] form the generating CLI accepts,
 * so a legend entry can be fed straight back into a new run.
 */
export function archLabel(row: SweepRow): string {
  let label = row.arch;
  if (row.n > 1 || row.f1 !== null) label += `:${row.n}`;
  if (row.f1 !== null && row.f2 !== null) label += `:${row.f1}:${row.f2}`;
  return label;
}
