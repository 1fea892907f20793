import { createHash } from "crypto";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { openBundle, readDiagnostics, readSnapshot } from "../src/bundle.js";
import { renderReport } from "../src/render.js";
import { diverging, fieldRender, lineChart } from "../src/svg.js";

let tmp: string;

function writeSnapshot(file: string, kind: string, values: number[]) {
  const kindB = Buffer.from(kind, "ascii");
  const buf = Buffer.alloc(8 + 1 + kindB.length + 8 + 8 * values.length);
  buf.write("EULSNAP1", 0, "ascii");
  buf.writeUInt8(kindB.length, 8);
  kindB.copy(buf, 9);
  buf.writeBigUInt64LE(BigInt(values.length), 9 + kindB.length);
  values.forEach((v, i) => buf.writeDoubleLE(v, 9 + kindB.length + 8 + 8 * i));
  fs.writeFileSync(file, buf);
}

const CSV_HEADER =
  "step,time,energy,energy_rel_err,mass,theta_variance,newton_iters," +
  "gmres_iters_avg,cond_number,res_u,res_rho,res_thermo,res_pi,max_w";

function makeBundle(dir: string, nx: number, nz: number) {
  fs.mkdirSync(path.join(dir, "snapshots"), { recursive: true });
  const rows = [CSV_HEADER];
  for (let s = 1; s <= 5; s++) {
    rows.push(
      [s, 20 * s, 1e9 - s, -1e-12 * s, 42.0, 7.0, 4, 30 + s, 0,
       1e-3 / s, 1e-4 / s, 1e-5 / s, 1e-6 / s, 0.01].join(","),
    );
  }
  fs.writeFileSync(path.join(dir, "diagnostics.csv"), rows.join("\n") + "\n");
  fs.writeFileSync(
    path.join(dir, "config_resolved.toml"),
    `[run]\nformulation = "flux_lorenz_new"\ncase = "gravity_wave"\n` +
    `[case]\nnx = ${nx}\nnz = ${nz}\nx_extent = 3000.0\nz_extent = 1000.0\n`,
  );
  const field = Array.from({ length: nx * nz }, (_, i) => Math.sin(i));
  writeSnapshot(path.join(dir, "snapshots", "step000000_theta_p.snap"), "W3",
    field);
  writeSnapshot(path.join(dir, "snapshots", "step000005_theta_p.snap"), "W3",
    field);
  writeSnapshot(
    path.join(dir, "snapshots", "step000005_theta_p_w0.snap"), "W0",
    Array.from({ length: nx * (nz + 1) }, (_, i) => Math.cos(i)),
  );
}

beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "eulplot-"));
  makeBundle(path.join(tmp, "runA"), 6, 4);
  makeBundle(path.join(tmp, "runB"), 6, 4);
});

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

describe("snapshot reader", () => {
  it("round-trips values and kind", () => {
    const p = path.join(tmp, "one.snap");
    const values = [1.5, -2.25, 3.125, 0.0, 1e-300];
    writeSnapshot(p, "Wtheta", values);
    const snap = readSnapshot(p);
    expect(snap.kind).toBe("Wtheta");
    expect([...snap.coeffs]).toEqual(values);
  });

  it("rejects non-snapshot files", () => {
    const p = path.join(tmp, "bogus.snap");
    fs.writeFileSync(p, "not a snapshot");
    expect(() => readSnapshot(p)).toThrow(/not a snapshot/);
  });
});

describe("diagnostics reader", () => {
  it("parses all columns as numbers", () => {
    const d = readDiagnostics(path.join(tmp, "runA", "diagnostics.csv"));
    expect(d.rows).toBe(5);
    expect(d.columns[0]).toBe("step");
    expect(d.data["time"]).toEqual([20, 40, 60, 80, 100]);
    expect(d.data["gmres_iters_avg"][4]).toBe(35);
  });
});

describe("svg primitives", () => {
  it("line chart emits one polyline per series", () => {
    const svg = lineChart(
      [{ label: "a", x: [0, 1, 2], y: [1, 2, 4] },
       { label: "b", x: [0, 1, 2], y: [4, 2, 1] }],
      { title: "t", xlabel: "x", ylabel: "y", logY: true },
    );
    expect(svg.match(/<polyline/g)?.length).toBe(2);
    expect(svg).toContain("</svg>");
  });

  it("field render draws one rect per visible cell, no interpolation", () => {
    const svg = fieldRender(new Float64Array([1, 2, 3, 4]), 2, 2, 10, 10,
      { title: "f", vmin: 0, vmax: 4 });
    expect(svg).toContain("cells=4");
    const sub = fieldRender(new Float64Array([1, 2, 3, 4]), 2, 2, 10, 10,
      { title: "f", vmin: 0, vmax: 4, subdomain: [0, 5, 0, 10] });
    expect(sub).toContain("cells=2");
  });

  it("diverging colormap hits the anchors", () => {
    expect(diverging(0.5)).toBe("rgb(247,247,247)");
    expect(diverging(-1)).toBe(diverging(0));
    expect(diverging(2)).toBe(diverging(1));
  });
});

describe("renderReport", () => {
  it("produces the time-series figures and field renders, read-only", () => {
    const dirs = [path.join(tmp, "runA"), path.join(tmp, "runB")];
    const hashBefore = hashTree(dirs[0]);
    const out = path.join(tmp, "figs");
    const written = renderReport(dirs, out, {
      w0: false, range: [-0.00146, 0.00252],
    });
    const names = written.map((w) => path.basename(w));
    expect(names).toContain("energy_error.svg");
    expect(names).toContain("condition_number.svg");
    expect(names).toContain("residuals.svg");
    expect(names.some((n) => n.includes("theta_p_step5"))).toBe(true);
    for (const w of written) expect(fs.statSync(w).size).toBeGreaterThan(200);
    // exact requested color range appears on the colorbar labels
    const field = fs.readFileSync(
      written.find((w) => w.includes("theta_p_step5"))!, "utf8");
    expect(field).toContain("-0.00146");
    expect(field).toContain("0.00252");
    expect(hashTree(dirs[0])).toBe(hashBefore);
  });

  it("uses the stored W0 projection with --w0", () => {
    const out = path.join(tmp, "figs-w0");
    const written = renderReport([path.join(tmp, "runA")], out, { w0: true });
    const field = written.find((w) => w.includes("theta_p_step5"));
    expect(field).toBeDefined();
  });

  it("names missing columns", () => {
    const broken = path.join(tmp, "broken");
    fs.mkdirSync(broken, { recursive: true });
    fs.writeFileSync(path.join(broken, "diagnostics.csv"),
      "step,time\n1,20\n");
    fs.writeFileSync(path.join(broken, "config_resolved.toml"),
      `[case]\nnx = 2\nnz = 2\nx_extent = 1.0\nz_extent = 1.0\n`);
    expect(() => renderReport([broken], path.join(tmp, "x"), { w0: false }))
      .toThrow(/energy_rel_err/);
  });
});

function hashTree(dir: string): string {
  const h = createHash("sha256");
  const walk = (d: string) => {
    for (const f of fs.readdirSync(d).sort()) {
      const p = path.join(d, f);
      const st = fs.statSync(p);
      if (st.isDirectory()) walk(p);
      else h.update(f).update(fs.readFileSync(p));
    }
  };
  walk(dir);
  return h.digest("hex");
}
