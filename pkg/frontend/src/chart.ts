/** Minimal deterministic SVG line chart: polylines, shaded bands, legend. */

export interface Series {
  id: string;
  label: string;
  x: number[];
  y: number[];
  color: string;
  dash?: string;          // stroke-dasharray, solid when absent
  band?: { lo: number[]; hi: number[] };
}

export interface ChartOptions {
  title: string;
  width?: number;
  height?: number;
  xLabel?: string;
  yLabel?: string;
  yRange?: [number, number];
  referenceY?: number;    // dashed horizontal guide
}

const MARGIN = { top: 40, right: 24, bottom: 48, left: 64 };

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

function ticks(lo: number, hi: number, count: number): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += s) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(Number(v.toPrecision(6)));
}

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export function renderChart(series: Series[], opts: ChartOptions): string {
  const width = opts.width ?? 720;
  const height = opts.height ?? 480;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const allX = series.flatMap((s) => s.x);
  const allY = series.flatMap((s) =>
    s.band ? [...s.y, ...s.band.lo, ...s.band.hi] : s.y);
  const [x0, x1] = extent(allX);
  let [y0, y1] = opts.yRange ?? extent(allY);
  if (opts.yRange === undefined) {
    if (opts.referenceY !== undefined) {
      y0 = Math.min(y0, opts.referenceY);
      y1 = Math.max(y1, opts.referenceY);
    }
    const pad = (y1 - y0 || 1) * 0.08;
    y0 -= pad;
    y1 += pad;
  }
  const sx = (v: number) => MARGIN.left + ((v - x0) / (x1 - x0 || 1)) * plotW;
  const sy = (v: number) => MARGIN.top + plotH - ((v - y0) / (y1 - y0 || 1)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`);
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(`<text x="${width / 2}" y="24" text-anchor="middle" font-size="16">` +
    `${esc(opts.title)}</text>`);

  // frame and ticks
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" ` +
    `height="${plotH}" fill="none" stroke="#333" stroke-width="1"/>`);
  for (const t of ticks(x0, x1, 6)) {
    const px = sx(t);
    parts.push(`<line x1="${px.toFixed(2)}" y1="${MARGIN.top + plotH}" ` +
      `x2="${px.toFixed(2)}" y2="${MARGIN.top + plotH + 5}" stroke="#333"/>`);
    parts.push(`<text x="${px.toFixed(2)}" y="${MARGIN.top + plotH + 20}" ` +
      `text-anchor="middle" font-size="11">${fmt(t)}</text>`);
  }
  for (const t of ticks(y0, y1, 6)) {
    const py = sy(t);
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${py.toFixed(2)}" ` +
      `x2="${MARGIN.left}" y2="${py.toFixed(2)}" stroke="#333"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${(py + 4).toFixed(2)}" ` +
      `text-anchor="end" font-size="11">${fmt(t)}</text>`);
  }
  if (opts.xLabel) {
    parts.push(`<text x="${MARGIN.left + plotW / 2}" y="${height - 10}" ` +
      `text-anchor="middle" font-size="13">${esc(opts.xLabel)}</text>`);
  }
  if (opts.yLabel) {
    const cx = 18;
    const cy = MARGIN.top + plotH / 2;
    parts.push(`<text x="${cx}" y="${cy}" text-anchor="middle" font-size="13" ` +
      `transform="rotate(-90 ${cx} ${cy})">${esc(opts.yLabel)}</text>`);
  }

  // reference guide
  if (opts.referenceY !== undefined &&
      opts.referenceY >= y0 && opts.referenceY <= y1) {
    const py = sy(opts.referenceY).toFixed(2);
    parts.push(`<line data-role="reference" x1="${MARGIN.left}" y1="${py}" ` +
      `x2="${MARGIN.left + plotW}" y2="${py}" stroke="#555" stroke-width="1" ` +
      `stroke-dasharray="6 4"/>`);
  }

  // bands first so curves draw on top
  for (const s of series) {
    if (!s.band) continue;
    const fwd = s.x.map((v, i) => `${sx(v).toFixed(2)},${sy(s.band!.hi[i]).toFixed(2)}`);
    const bwd = [...s.x.keys()].reverse()
      .map((i) => `${sx(s.x[i]).toFixed(2)},${sy(s.band!.lo[i]).toFixed(2)}`);
    parts.push(`<polygon data-role="band" data-series="${s.id}" ` +
      `points="${fwd.join(" ")} ${bwd.join(" ")}" fill="${s.color}" ` +
      `fill-opacity="0.18" stroke="none"/>`);
  }
  for (const s of series) {
    const pts = s.x.map((v, i) => `${sx(v).toFixed(2)},${sy(s.y[i]).toFixed(2)}`);
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(`<polyline data-role="curve" data-series="${s.id}" ` +
      `points="${pts.join(" ")}" fill="none" stroke="${s.color}" ` +
      `stroke-width="1.8"${dash}/>`);
  }

  // legend
  let ly = MARGIN.top + 14;
  for (const s of series) {
    const lx = MARGIN.left + 12;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" ` +
      `stroke="${s.color}" stroke-width="2"${dash}/>`);
    parts.push(`<text data-role="legend" data-series="${s.id}" x="${lx + 32}" ` +
      `y="${ly}" font-size="12">${esc(s.label)}</text>`);
    ly += 17;
  }

  parts.push("</svg>");
  return parts.join("\n");
}
