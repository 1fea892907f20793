#!/usr/bin/env node
/**
 * eulerslice-plot --runs <dir...> --out <dir> [--w0] [--range vmin,vmax]
 *                 [--subdomain x0,x1,z0,z1] [--zscale f]
 *
 * Renders the standard report figures (energy error, condition number,
 * residuals, field/prof_panel renders) from one or more run bundles.
 */

import { renderReport, RenderOptions } from "./render.js";

function parseArgs(argv: string[]) {
  const runs: string[] = [];
  let out = "";
  const opts: RenderOptions = { w0: false };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--runs") {
      while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
        runs.push(argv[++i]);
      }
    } else if (a === "--out") {
      out = argv[++i];
    } else if (a === "--w0") {
      opts.w0 = true;
    } else if (a === "--range") {
      const [lo, hi] = argv[++i].split(",").map(Number);
      opts.range = [lo, hi];
    } else if (a === "--subdomain") {
      const v = argv[++i].split(",").map(Number);
      opts.subdomain = [v[0], v[1], v[2], v[3]];
    } else if (a === "--zscale") {
      opts.zScale = Number(argv[++i]);
    } else {
      throw new Error(`unknown argument ${a}`);
    }
  }
  if (runs.length === 0 || !out) {
    throw new Error("usage: eulerslice-plot --runs <dirs...> --out <dir>");
  }
  return { runs, out, opts };
}

try {
  const { runs, out, opts } = parseArgs(process.argv.slice(2));
  const written = renderReport(runs, out, opts);
  for (const f of written) console.log(f);
} catch (e) {
  console.error(String(e instanceof Error ? e.message : e));
  process.exit(2);
}
