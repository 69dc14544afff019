#!/usr/bin/env node
/** plot --summary <csv> [--exact <csv>] --panel <label> --out <path>
 *
 * Writes <out>.svg and <out>.png (the extension on --out, if any, is
 * replaced).  Exits nonzero with the offending column name when the CSV
 * lacks a required column.
 */
import * as fs from "fs";
import * as path from "path";

import { render, PlotSpec } from "./plot";

interface Args {
  summary: string;
  exact?: string;
  panel: string;
  out: string;
  ymin?: number;
  ymax?: number;
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = {};
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const need = () => {
      const v = argv[++i];
      if (v === undefined) throw new Error(`${flag} needs a value`);
      return v;
    };
    switch (flag) {
      case "--summary": args.summary = need(); break;
      case "--exact": args.exact = need(); break;
      case "--panel": args.panel = need(); break;
      case "--out": args.out = need(); break;
      case "--ymin": args.ymin = Number(need()); break;
      case "--ymax": args.ymax = Number(need()); break;
      case "--help":
      case "-h":
        console.log("usage: plot --summary <csv> [--exact <csv>] --panel <label> " +
          "--out <path> [--ymin Y --ymax Y]");
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag: ${flag}`);
    }
  }
  for (const key of ["summary", "panel", "out"] as const) {
    if (args[key] === undefined) throw new Error(`--${key} is required`);
  }
  return args as Args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const spec: PlotSpec = {
      summaryCsv: fs.readFileSync(args.summary, "utf8"),
      exactCsv: args.exact !== undefined ? fs.readFileSync(args.exact, "utf8") : undefined,
      panel: args.panel,
      yRange: args.ymin !== undefined && args.ymax !== undefined
        ? [args.ymin, args.ymax] : undefined,
    };
    const { svg, warnings } = render(spec);
    for (const w of warnings) console.warn(`warning: ${w}`);

    const base = args.out.replace(/\.(svg|png)$/i, "");
    fs.mkdirSync(path.dirname(path.resolve(base)), { recursive: true });
    fs.writeFileSync(`${base}.svg`, svg);

    // PNG via rasterising the same SVG
    // eslint-disable-next-line @typescript-eslint/no-var-requires
    const { Resvg } = require("@resvg/resvg-js");
    const png = new Resvg(svg, { font: { loadSystemFonts: true } }).render().asPng();
    fs.writeFileSync(`${base}.png`, png);

    console.log(`wrote ${base}.svg and ${base}.png`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
