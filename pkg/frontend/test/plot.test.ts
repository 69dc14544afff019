import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { parseCsv, requireColumn } from "../src/csv";
import { render } from "../src/plot";

const FIXTURES = path.join(__dirname, "fixtures");
const summaryA = fs.readFileSync(path.join(FIXTURES, "summary_panel_a.csv"), "utf8");
const exactA = fs.readFileSync(path.join(FIXTURES, "exact_panel_a.csv"), "utf8");
const summaryApp2 = fs.readFileSync(path.join(FIXTURES, "summary_app2.csv"), "utf8");

function seriesIds(svg: string, role: string): string[] {
  const re = new RegExp(`data-role="${role}" data-series="([^"]+)"`, "g");
  return [...svg.matchAll(re)].map((m) => m[1]);
}

describe("csv parsing", () => {
  it("reads the golden summary", () => {
    const table = parseCsv(summaryA);
    expect(table.rows).toBe(151);
    expect(requireColumn(table, "t")[0]).toBe(0);
    expect(requireColumn(table, "mean_exp_neg_stot")[0]).toBeCloseTo(1, 12);
  });

  it("rejects ragged rows and missing columns", () => {
    expect(() => parseCsv("a,b\n1\n")).toThrow(/cells/);
    expect(() => requireColumn(parseCsv("a\n1\n"), "b")).toThrow(/missing column: b/);
  });
});

describe("render", () => {
  it("draws both estimator curves, bands and the unity reference", () => {
    const { svg, warnings } = render({ summaryCsv: summaryA, panel: "a" });
    expect(warnings).toEqual([]);
    expect(seriesIds(svg, "curve")).toEqual(expect.arrayContaining(["stot", "sb"]));
    expect(seriesIds(svg, "band")).toEqual(expect.arrayContaining(["stot", "sb"]));
    expect(svg).toContain('data-role="reference"');
    expect(svg).toContain("stroke-dasharray");
  });

  it("adds exact overlays when the exact series is given", () => {
    const { svg } = render({ summaryCsv: summaryA, exactCsv: exactA, panel: "a" });
    const ids = seriesIds(svg, "curve");
    expect(ids).toEqual(expect.arrayContaining(["exact_ft", "exact_sb"]));
  });

  it("legend distinguishes the two entropy variants in an app2 summary", () => {
    const { svg } = render({ summaryCsv: summaryApp2, panel: "app2" });
    const ids = seriesIds(svg, "curve");
    expect(ids).toEqual(expect.arrayContaining(["stot", "stot_logexp", "sb"]));
    const legends = seriesIds(svg, "legend");
    expect(new Set(legends).size).toBe(legends.length);
    expect(svg).toContain("log-expectation");
  });

  it("omits bands with a warning when se columns are absent", () => {
    const table = parseCsv(summaryA);
    const keep = ["t", "mean_exp_neg_stot", "mean_exp_neg_sb"];
    const rows: string[] = [keep.join(",")];
    for (let i = 0; i < table.rows; i++) {
      rows.push(keep.map((c) => String(table.columns.get(c)![i])).join(","));
    }
    const { svg, warnings } = render({ summaryCsv: rows.join("\n") + "\n", panel: "a" });
    expect(warnings.length).toBe(2);
    expect(warnings[0]).toMatch(/se_stot/);
    expect(seriesIds(svg, "band")).toEqual([]);
    expect(seriesIds(svg, "curve")).toEqual(expect.arrayContaining(["stot", "sb"]));
  });

  it("fails naming the column when an estimator is missing", () => {
    expect(() => render({ summaryCsv: "t,mean_exp_neg_sb\n0,1\n1,1\n", panel: "x" }))
      .toThrow(/mean_exp_neg_stot/);
  });

  it("is a pure function of its inputs", () => {
    const a = render({ summaryCsv: summaryA, panel: "a" }).svg;
    const b = render({ summaryCsv: summaryA, panel: "a" }).svg;
    expect(a).toBe(b);
  });
});

describe("cli", () => {
  const cliJs = path.join(__dirname, "..", "dist", "cli.js");

  it("writes svg and png with exit 0 from the golden summary", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "plot-"));
    const out = path.join(dir, "panel_a");
    execFileSync("node", [cliJs, "--summary", path.join(FIXTURES, "summary_panel_a.csv"),
      "--exact", path.join(FIXTURES, "exact_panel_a.csv"),
      "--panel", "a", "--out", out]);
    const svg = fs.readFileSync(`${out}.svg`, "utf8");
    expect(seriesIds(svg, "curve")).toEqual(expect.arrayContaining(["stot", "sb"]));
    expect(svg).toContain('data-role="reference"');
    const png = fs.readFileSync(`${out}.png`);
    expect(png.length).toBeGreaterThan(1000);
    expect(png[0]).toBe(0x89);   // PNG signature
    expect(png.subarray(1, 4).toString("ascii")).toBe("PNG");
  });

  it("exits nonzero naming the missing column", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "plot-"));
    const bad = path.join(dir, "bad.csv");
    fs.writeFileSync(bad, "t,mean_exp_neg_stot\n0,1\n1,1\n");
    let code = 0;
    let stderr = "";
    try {
      execFileSync("node", [cliJs, "--summary", bad, "--panel", "x",
        "--out", path.join(dir, "o")], { stdio: "pipe" });
    } catch (err: any) {
      code = err.status;
      stderr = String(err.stderr);
    }
    expect(code).toBe(1);
    expect(stderr).toContain("mean_exp_neg_sb");
  });

  it("rejects unknown flags", () => {
    let code = 0;
    try {
      execFileSync("node", [cliJs, "--nope"], { stdio: "pipe" });
    } catch (err: any) {
      code = err.status;
    }
    expect(code).toBe(2);
  });
});
