/**
 * Figure production from run bundles: energy-error, condition-number and
 * residual time series (multi-run overlays), cellwise field renders of the
 * stored potential-temperature perturbation, and the 1D initial-profile
 * panel. Inputs are opened read-only; outputs are SVG files in outDir.
 */

import * as fs from "fs";
import * as path from "path";

import { RunBundle, openBundle, readSnapshot, snapshotPath } from "./bundle.js";
import { Series, fieldRender, lineChart } from "./svg.js";

export interface RenderOptions {
  w0: boolean;
  range?: [number, number];
  subdomain?: [number, number, number, number];
  zScale?: number;
}

function seriesOf(bundles: RunBundle[], column: string,
                  map?: (v: number) => number): Series[] {
  return bundles.map((b) => ({
    label: b.name,
    x: b.diagnostics.data["time"],
    y: b.diagnostics.data[column].map(map ?? ((v) => v)),
  }));
}

function writeFig(outDir: string, name: string, svg: string, written: string[]) {
  const p = path.join(outDir, name);
  fs.writeFileSync(p, svg);
  written.push(p);
}

export function renderReport(runDirs: string[], outDir: string,
                             opts: RenderOptions): string[] {
  const bundles = runDirs.map(openBundle);
  for (const b of bundles) {
    for (const col of ["time", "energy_rel_err", "cond_number", "res_u",
                       "res_rho", "res_thermo", "res_pi"]) {
      if (!b.diagnostics.columns.includes(col)) {
        throw new Error(`${b.dir}: diagnostics.csv lacks column '${col}'`);
      }
    }
  }
  fs.mkdirSync(outDir, { recursive: true });
  const written: string[] = [];

  writeFig(outDir, "energy_error.svg", lineChart(
    seriesOf(bundles, "energy_rel_err", Math.abs),
    { title: "Energy conservation error", xlabel: "time [s]",
      ylabel: "|H(t) - H(0)| / H(0)", logY: true }), written);

  writeFig(outDir, "condition_number.svg", lineChart(
    seriesOf(bundles, "cond_number"),
    { title: "Helmholtz operator condition number", xlabel: "time [s]",
      ylabel: "cond", logY: true }), written);

  const resSeries: Series[] = [];
  for (const b of bundles) {
    for (const col of ["res_u", "res_rho", "res_thermo", "res_pi"]) {
      resSeries.push({
        label: bundles.length > 1 ? `${b.name}:${col}` : col,
        x: b.diagnostics.data["time"],
        y: b.diagnostics.data[col],
      });
    }
  }
  writeFig(outDir, "residuals.svg", lineChart(resSeries,
    { title: "Residual norms at the final Newton iteration",
      xlabel: "time [s]", ylabel: "residual norm", logY: true }), written);

  for (const b of bundles) {
    if (b.snapshotSteps.length === 0) continue;
    const step = b.snapshotSteps[b.snapshotSteps.length - 1];
    const g = b.geometry;
    if (g.nx > 1) {
      const field = opts.w0 ? "theta_p_w0" : "theta_p";
      const file = snapshotPath(b, step, field);
      if (!fs.existsSync(file)) continue;
      const snap = readSnapshot(file);
      let values = snap.coeffs;
      let nx = g.nx, nz = g.nz;
      if (snap.kind === "W0" || snap.kind === "Wtheta") {
        nz = g.nz + 1;           // vertex/facet rows rendered cellwise
      }
      const lo = opts.range ? opts.range[0] : min(values);
      const hi = opts.range ? opts.range[1] : max(values);
      writeFig(outDir, `${b.name}_theta_p_step${step}.svg`, fieldRender(
        values, nx, nz, g.xExtent, g.zExtent, {
          title: `${b.name}: theta perturbation at step ${step} [K]`,
          vmin: lo, vmax: hi,
          subdomain: opts.subdomain, zScale: opts.zScale,
        }), written);
    } else {
      // 1D: initial-profile panel from the step-0 snapshot set
      const s0 = b.snapshotSteps[0];
      const panels: Series[] = [];
      const dz = g.zExtent / g.nz;
      for (const f of ["rho", "pi", "thermo", "theta_p"]) {
        const file = snapshotPath(b, s0, f);
        if (!fs.existsSync(file)) continue;
        const snap = readSnapshot(file);
        const n = snap.coeffs.length;
        const zs = Array.from({ length: n },
          (_, i) => (n === g.nz ? (i + 0.5) * dz : i * dz));
        const vmax = Math.max(...Array.from(snap.coeffs, Math.abs), 1e-300);
        panels.push({ label: `${f} / ${fmtScale(vmax)}`, x: zs,
                      y: Array.from(snap.coeffs, (v) => v / vmax) });
      }
      writeFig(outDir, `${b.name}_initial_profiles.svg`, lineChart(panels,
        { title: `${b.name}: initial vertical profiles (normalised)`,
          xlabel: "z [m]", ylabel: "value / max|value|" }), written);
    }
  }
  return written;
}

function fmtScale(v: number): string {
  return v.toExponential(2);
}

function min(a: Float64Array): number {
  let m = Infinity;
  for (const v of a) m = Math.min(m, v);
  return m;
}

function max(a: Float64Array): number {
  let m = -Infinity;
  for (const v of a) m = Math.max(m, v);
  return m;
}
