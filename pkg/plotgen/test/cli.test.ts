// End-to-end runs of the built dist/cli.js, the same entry the bin exposes.

import { spawnSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";

const CLI = fileURLToPath(new URL("../dist/cli.js", import.meta.url));
const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));

let work: string;
beforeAll(() => {
  work = mkdtempSync(join(tmpdir(), "plotgen-"));
});

function plotgen(...args: string[]) {
  const res = spawnSync("node", [CLI, ...args], { encoding: "utf8" });
  return { code: res.status, out: res.stdout, err: res.stderr };
}

describe("plotgen CLI", () => {
  it("renders all three figure kinds from real sweep output", () => {
    const jobs: Array<[string, string[]]> = [
      ["curves.svg", ["curves", "--in", join(FIXTURES, "curves.csv")]],
      ["stages.svg", ["stages", "--in", join(FIXTURES, "stages.csv"), "--log-x"]],
      ["hist.svg", ["hist", "--in", join(FIXTURES, "hist.csv")]],
    ];
    for (const [name, args] of jobs) {
      const out = join(work, name);
      const res = plotgen(...args, "--out", out);
      expect(res.err).toBe("");
      expect(res.code).toBe(0);
      expect(readFileSync(out, "utf8")).toContain("<svg");
    }
  });

  it("regenerates byte-identical files from the same CSV", () => {
    const first = join(work, "det1.svg");
    const second = join(work, "det2.svg");
    for (const out of [first, second]) {
      expect(plotgen("curves", "--in", join(FIXTURES, "curves.csv"), "--out", out).code).toBe(0);
    }
    expect(readFileSync(first)).toEqual(readFileSync(second));
  });

  it("applies bands, labels, and a title", () => {
    const out = join(work, "banded.svg");
    const res = plotgen(
      "curves", "--in", join(FIXTURES, "curves.csv"), "--out", out,
      "--band", "0.1,0.2", "--title", "conditioned advantage",
      "--x-label", "CRPs shown", "--y-label", "adversary advantage",
    );
    expect(res.code).toBe(0);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain(">conditioned advantage<");
    expect(svg).toContain(">CRPs shown<");
    expect(svg).toContain(">adversary advantage<");
    expect(svg).toContain('fill-opacity="0.35"');
  });

  it("concatenates repeated --in for line figures", () => {
    // split the fixture into two files by architecture
    const text = readFileSync(join(FIXTURES, "curves.csv"), "utf8").trimEnd().split("\n");
    const head = text.slice(0, 2);
    const a = join(work, "a.csv");
    const b = join(work, "b.csv");
    writeFileSync(a, [...head, ...text.filter((l) => l.startsWith("apuf,"))].join("\n") + "\n");
    writeFileSync(b, [...head, ...text.filter((l) => l.startsWith("xor,"))].join("\n") + "\n");
    const out = join(work, "merged.svg");
    expect(plotgen("curves", "--in", a, "--in", b, "--out", out).code).toBe(0);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain(">apuf<");
    expect(svg).toContain(">xor:2<");
  });

  it("rejects a schema mismatch without writing anything", () => {
    const bad = join(work, "bad.csv");
    writeFileSync(
      bad,
      readFileSync(join(FIXTURES, "curves.csv"), "utf8").replace("sweep.v1", "sweep.v9"),
    );
    const out = join(work, "never.svg");
    const res = plotgen("curves", "--in", bad, "--out", out);
    expect(res.code).toBe(1);
    expect(res.err).toContain("schema");
    expect(existsSync(out)).toBe(false);
  });

  it("rejects an empty sweep with a nonzero exit", () => {
    const empty = join(work, "empty.csv");
    const head = readFileSync(join(FIXTURES, "stages.csv"), "utf8").split("\n").slice(0, 2);
    writeFileSync(empty, head.join("\n") + "\n");
    const res = plotgen("stages", "--in", empty, "--out", join(work, "never2.svg"));
    expect(res.code).toBe(1);
    expect(res.err).toContain("empty selection");
    expect(existsSync(join(work, "never2.svg"))).toBe(false);
  });

  it("usage errors exit 2", () => {
    expect(plotgen("curves", "--in", "x.csv").code).toBe(2); // no --out
    expect(plotgen("sparkline", "--in", "x.csv", "--out", "y.svg").code).toBe(2);
    expect(plotgen("curves", "--in", "x.csv", "--out", "y.svg", "--wat").code).toBe(2);
    expect(plotgen("curves", "--in", "x.csv", "--out", "y.svg", "--band", "0.2,0.1").code).toBe(2);
    expect(plotgen("hist", "--in", "x.csv", "--in", "z.csv", "--out", "y.svg").code).toBe(2);
    expect(plotgen("curves", "--in", join(FIXTURES, "curves.csv"), "--out", "y.svg", "--log-x").code).toBe(2);
  });

  it("a missing input file exits 1", () => {
    const res = plotgen("curves", "--in", join(work, "ghost.csv"), "--out", join(work, "g.svg"));
    expect(res.code).toBe(1);
    expect(res.err).toContain("ghost.csv");
  });

  it("--help prints usage and exits 0", () => {
    const res = plotgen("--help");
    expect(res.code).toBe(0);
    expect(res.out).toContain("usage: plotgen");
  });

  it("a style file reshapes the output", () => {
    const styleFile = join(work, "style.json");
    writeFileSync(styleFile, JSON.stringify({ width: 800, background: "#f5f5f0" }));
    const out = join(work, "styled.svg");
    const res = plotgen("hist", "--in", join(FIXTURES, "hist.csv"), "--out", out, "--style", styleFile);
    expect(res.code).toBe(0);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain('width="800"');
    expect(svg).toContain("#f5f5f0");
  });

  it("an unknown style key is refused", () => {
    const styleFile = join(work, "bad-style.json");
    writeFileSync(styleFile, JSON.stringify({ widht: 800 }));
    const res = plotgen("hist", "--in", join(FIXTURES, "hist.csv"), "--out", join(work, "s.svg"), "--style", styleFile);
    expect(res.code).not.toBe(0);
    expect(res.err).toContain("widht");
  });
});
