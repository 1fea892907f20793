/**
 * Hand-rolled SVG construction: line charts with linear or log axes, and
 * cellwise field rasters (piecewise-constant rectangles, no interpolation).
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#17becf", "#7f7f7f"];

const W = 760;
const H = 480;
const ML = 78;
const MR = 20;
const MT = 34;
const MB = 56;

function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const steps = [1, 2, 5, 10].map((s) => s * mag);
  const step = steps.find((s) => span / s <= n) ?? steps[3];
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) out.push(v);
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(Math.round(v * 1e6) / 1e6);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function lineChart(
  series: Series[],
  opts: { title: string; xlabel: string; ylabel: string; logY?: boolean },
): string {
  const finite = (v: number) => Number.isFinite(v) && (!opts.logY || v > 0);
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.x.length; i++) {
      if (!finite(s.y[i])) continue;
      xmin = Math.min(xmin, s.x[i]);
      xmax = Math.max(xmax, s.x[i]);
      ymin = Math.min(ymin, s.y[i]);
      ymax = Math.max(ymax, s.y[i]);
    }
  }
  if (!Number.isFinite(xmin)) { xmin = 0; xmax = 1; ymin = opts.logY ? 0.1 : 0; ymax = 1; }
  if (xmax === xmin) xmax = xmin + 1;
  if (ymax === ymin) {
    if (opts.logY) { ymax = ymin * 2; ymin = ymin / 2; }
    else { ymax = ymin + (Math.abs(ymin) || 1) * 0.1; ymin -= (Math.abs(ymin) || 1) * 0.1; }
  }
  const ty = (v: number) => (opts.logY ? Math.log10(v) : v);
  const tymin = ty(ymin), tymax = ty(ymax);
  const sx = (v: number) => ML + ((v - xmin) / (xmax - xmin)) * (W - ML - MR);
  const sy = (v: number) => H - MB - ((ty(v) - tymin) / (tymax - tymin || 1)) * (H - MT - MB);

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="20" text-anchor="middle" font-size="15" font-family="sans-serif">${esc(opts.title)}</text>`);
  // axes
  parts.push(`<line x1="${ML}" y1="${H - MB}" x2="${W - MR}" y2="${H - MB}" stroke="black"/>`);
  parts.push(`<line x1="${ML}" y1="${MT}" x2="${ML}" y2="${H - MB}" stroke="black"/>`);
  for (const t of niceTicks(xmin, xmax)) {
    const x = sx(t);
    parts.push(`<line x1="${x}" y1="${H - MB}" x2="${x}" y2="${H - MB + 5}" stroke="black"/>`);
    parts.push(`<text x="${x}" y="${H - MB + 20}" text-anchor="middle" font-size="11" font-family="sans-serif">${fmt(t)}</text>`);
  }
  const nlog = Math.max(0, Math.floor(tymax) - Math.ceil(tymin) + 1);
  const yticks = opts.logY
    ? (nlog > 0
        ? Array.from({ length: nlog }, (_, i) => Math.pow(10, Math.ceil(tymin) + i))
        : [ymin, ymax])
    : niceTicks(ymin, ymax);
  for (const t of yticks) {
    const y = sy(t);
    parts.push(`<line x1="${ML - 5}" y1="${y}" x2="${ML}" y2="${y}" stroke="black"/>`);
    parts.push(`<text x="${ML - 8}" y="${y + 4}" text-anchor="end" font-size="11" font-family="sans-serif">${fmt(t)}</text>`);
    parts.push(`<line x1="${ML}" y1="${y}" x2="${W - MR}" y2="${y}" stroke="#dddddd" stroke-dasharray="3,3"/>`);
  }
  parts.push(`<text x="${(W + ML) / 2}" y="${H - 14}" text-anchor="middle" font-size="13" font-family="sans-serif">${esc(opts.xlabel)}</text>`);
  parts.push(`<text x="20" y="${(H - MB + MT) / 2}" text-anchor="middle" font-size="13" font-family="sans-serif" transform="rotate(-90 20 ${(H - MB + MT) / 2})">${esc(opts.ylabel)}</text>`);
  series.forEach((s, si) => {
    const pts: string[] = [];
    for (let i = 0; i < s.x.length; i++) {
      if (!finite(s.y[i])) continue;
      pts.push(`${sx(s.x[i]).toFixed(2)},${sy(s.y[i]).toFixed(2)}`);
    }
    const color = PALETTE[si % PALETTE.length];
    parts.push(`<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" stroke-width="1.6"/>`);
    parts.push(`<text x="${W - MR - 8}" y="${MT + 16 + 16 * si}" text-anchor="end" font-size="12" font-family="sans-serif" fill="${color}">${esc(s.label)}</text>`);
  });
  parts.push("</svg>");
  return parts.join("\n");
}

/** Blue-white-red diverging colormap on [0, 1]. */
export function diverging(t: number): string {
  const c = Math.max(0, Math.min(1, t));
  const lerp = (a: number, b: number, u: number) => Math.round(a + (b - a) * u);
  let r: number, g: number, b: number;
  if (c < 0.5) {
    const u = c / 0.5;
    r = lerp(33, 247, u); g = lerp(102, 247, u); b = lerp(172, 247, u);
  } else {
    const u = (c - 0.5) / 0.5;
    r = lerp(247, 178, u); g = lerp(247, 24, u); b = lerp(247, 43, u);
  }
  return `rgb(${r},${g},${b})`;
}

export interface FieldRenderOpts {
  title: string;
  vmin: number;
  vmax: number;
  /** physical subdomain [x0, x1, z0, z1]; defaults to the whole domain */
  subdomain?: [number, number, number, number];
  /** vertical exaggeration of the aspect ratio */
  zScale?: number;
}

/**
 * Cellwise raster of a W3 field (cells x-major as (nx, nz)) or a vertex
 * field when nxv/nzv are the vertex counts. No interpolation: one rectangle
 * per value.
 */
export function fieldRender(
  values: Float64Array | number[],
  nx: number,
  nz: number,
  xExtent: number,
  zExtent: number,
  opts: FieldRenderOpts,
): string {
  const sub = opts.subdomain ?? [0, xExtent, 0, zExtent];
  const zscale = opts.zScale ?? 1.0;
  const dx = xExtent / nx;
  const dz = zExtent / nz;
  const [x0, x1, z0, z1] = sub;
  const wpx = 900;
  const aspect = ((z1 - z0) * zscale) / (x1 - x0);
  const hpx = Math.max(60, Math.round(wpx * aspect));
  const head = 26;
  const bar = 46;
  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${wpx}" height="${hpx + head + bar}" viewBox="0 0 ${wpx} ${hpx + head + bar}">`);
  parts.push(`<rect width="${wpx}" height="${hpx + head + bar}" fill="white"/>`);
  parts.push(`<text x="${wpx / 2}" y="17" text-anchor="middle" font-size="14" font-family="sans-serif">${esc(opts.title)}</text>`);
  const sx = (x: number) => ((x - x0) / (x1 - x0)) * wpx;
  const sz = (z: number) => head + hpx - ((z - z0) / (z1 - z0)) * hpx;
  const span = opts.vmax - opts.vmin || 1;
  let cells = 0;
  for (let ix = 0; ix < nx; ix++) {
    const xl = ix * dx;
    const xr = xl + dx;
    if (xr <= x0 || xl >= x1) continue;
    for (let iz = 0; iz < nz; iz++) {
      const zb = iz * dz;
      const zt = zb + dz;
      if (zt <= z0 || zb >= z1) continue;
      const v = Number(values[ix * nz + iz]);
      const col = diverging((v - opts.vmin) / span);
      const px = sx(Math.max(xl, x0));
      const pw = sx(Math.min(xr, x1)) - px;
      const pzt = sz(Math.min(zt, z1));
      const ph = sz(Math.max(zb, z0)) - pzt;
      parts.push(`<rect x="${px.toFixed(2)}" y="${pzt.toFixed(2)}" width="${(pw + 0.5).toFixed(2)}" height="${(ph + 0.5).toFixed(2)}" fill="${col}"/>`);
      cells++;
    }
  }
  // colorbar
  const cby = head + hpx + 14;
  for (let i = 0; i < 128; i++) {
    const px = (i / 128) * (wpx - 160) + 80;
    parts.push(`<rect x="${px.toFixed(1)}" y="${cby}" width="${((wpx - 160) / 128 + 0.5).toFixed(2)}" height="12" fill="${diverging(i / 127)}"/>`);
  }
  parts.push(`<text x="76" y="${cby + 11}" text-anchor="end" font-size="11" font-family="sans-serif">${fmt(opts.vmin)}</text>`);
  parts.push(`<text x="${wpx - 76}" y="${cby + 11}" text-anchor="start" font-size="11" font-family="sans-serif">${fmt(opts.vmax)}</text>`);
  parts.push(`<!-- cells=${cells} -->`);
  parts.push("</svg>");
  return parts.join("\n");
}
