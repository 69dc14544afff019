/** Panel figures from the simulator's summary/exact CSVs.
 *
 * Renders the trajectory estimators exp(-dS_tot) and exp(-dS_B) against
 * time, each with a shaded +-1 sigma band when the standard-error columns
 * are present, a dashed reference line at 1, and (when an exact-series CSV
 * is supplied) the deterministic tilted-evolution overlays.
 */
import { parseCsv, requireColumn, Table } from "./csv";
import { renderChart, Series } from "./chart";

export interface PlotSpec {
  summaryCsv: string;            // file contents
  exactCsv?: string;
  panel: string;
  yRange?: [number, number];
  width?: number;
  height?: number;
}

export interface RenderResult {
  svg: string;
  warnings: string[];
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

interface CurveSpec {
  id: string;
  meanCol: string;
  seCol: string;
  label: string;
}

function estimatorCurves(table: Table): CurveSpec[] {
  const out: CurveSpec[] = [];
  for (const name of table.header) {
    let m = name.match(/^mean_exp_neg_stot(_.+)?$/);
    if (m) {
      const suffix = m[1] ?? "";
      out.push({
        id: `stot${suffix}`,
        meanCol: name,
        seCol: `se_stot${suffix}`,
        label: `exp(-dS_tot)${describe(suffix)}`,
      });
      continue;
    }
    m = name.match(/^mean_exp_neg_sb(_.+)?$/);
    if (m) {
      const suffix = m[1] ?? "";
      out.push({
        id: `sb${suffix}`,
        meanCol: name,
        seCol: `se_sb${suffix}`,
        label: `exp(-dS_B)${describe(suffix)}`,
      });
    }
  }
  return out;
}

function describe(suffix: string): string {
  if (suffix === "") return "";
  if (suffix === "_logexp") return " [log-expectation entropy]";
  if (suffix === "_jumpbasis") return " [jump-basis projection]";
  return ` [${suffix.slice(1)}]`;
}

export function render(spec: PlotSpec): RenderResult {
  const warnings: string[] = [];
  const table = parseCsv(spec.summaryCsv);
  const t = requireColumn(table, "t");

  const curveSpecs = estimatorCurves(table);
  if (!curveSpecs.some((c) => c.id === "stot")) {
    throw new Error("missing column: mean_exp_neg_stot");
  }
  if (!curveSpecs.some((c) => c.id === "sb")) {
    throw new Error("missing column: mean_exp_neg_sb");
  }

  const series: Series[] = [];
  curveSpecs.forEach((c, i) => {
    const mean = requireColumn(table, c.meanCol);
    const se = table.columns.get(c.seCol);
    let band;
    if (se === undefined) {
      warnings.push(`missing column ${c.seCol}; band omitted for ${c.meanCol}`);
    } else {
      band = { lo: mean.map((v, k) => v - se[k]), hi: mean.map((v, k) => v + se[k]) };
    }
    series.push({
      id: c.id, label: c.label, x: t, y: mean,
      color: PALETTE[i % PALETTE.length], band,
    });
  });

  if (spec.exactCsv !== undefined) {
    const exact = parseCsv(spec.exactCsv);
    const te = requireColumn(exact, "t");
    const overlays: Array<[string, string, string]> = [
      ["ft_value", "exact_ft", "Tr[Psi-bar rho(t)] (exact)"],
      ["tr_psi_xi_1", "exact_sb", "Tr Psi(1,t|rho0) (exact)"],
    ];
    let k = 0;
    for (const [col, id, label] of overlays) {
      const y = exact.columns.get(col);
      if (y === undefined) {
        warnings.push(`exact series has no ${col} column; overlay omitted`);
        continue;
      }
      series.push({
        id, label, x: te, y,
        color: ["#000000", "#666600"][k % 2], dash: "2 3",
      });
      k += 1;
    }
  }

  const svg = renderChart(series, {
    title: `panel ${spec.panel}`,
    xLabel: "t",
    yLabel: "trajectory averages",
    yRange: spec.yRange,
    referenceY: 1.0,
    width: spec.width,
    height: spec.height,
  });
  return { svg, warnings };
}
