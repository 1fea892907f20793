/**
 * Readers for eulerslice run bundles: diagnostics.csv, binary snapshots and
 * the resolved-config echo. Reading never modifies the bundle.
 */

import * as fs from "fs";
import * as path from "path";

export interface Diagnostics {
  columns: string[];
  data: Record<string, number[]>;
  rows: number;
}

export function readDiagnostics(file: string): Diagnostics {
  const text = fs.readFileSync(file, "utf8");
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  const columns = lines[0].split(",");
  const data: Record<string, number[]> = {};
  for (const c of columns) data[c] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(",");
    columns.forEach((c, i) => data[c].push(Number(parts[i])));
  }
  return { columns, data, rows: lines.length - 1 };
}

const SNAP_MAGIC = Buffer.from("EULSNAP1", "ascii");

export interface Snapshot {
  kind: string;
  coeffs: Float64Array;
}

export function readSnapshot(file: string): Snapshot {
  const buf = fs.readFileSync(file);
  if (!buf.subarray(0, 8).equals(SNAP_MAGIC)) {
    throw new Error(`${file}: not a snapshot file`);
  }
  const klen = buf.readUInt8(8);
  const kind = buf.subarray(9, 9 + klen).toString("ascii");
  const off = 9 + klen;
  const n = Number(buf.readBigUInt64LE(off));
  const coeffs = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    coeffs[i] = buf.readDoubleLE(off + 8 + 8 * i);
  }
  return { kind, coeffs };
}

export interface CaseGeometry {
  nx: number;
  nz: number;
  xExtent: number;
  zExtent: number;
  caseName: string;
  formulation: string;
}

/** Minimal TOML-subset reader for the resolved-config echo. */
export function readResolvedConfig(file: string): CaseGeometry {
  const text = fs.readFileSync(file, "utf8");
  let section = "";
  const val: Record<string, string> = {};
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line || line.startsWith("#")) continue;
    const m = line.match(/^\[(.+)\]$/);
    if (m) {
      section = m[1];
      continue;
    }
    const kv = line.match(/^([A-Za-z0-9_]+)\s*=\s*(.+)$/);
    if (kv) val[`${section}.${kv[1]}`] = kv[2].replace(/^"|"$/g, "");
  }
  return {
    nx: Number(val["case.nx"]),
    nz: Number(val["case.nz"]),
    xExtent: Number(val["case.x_extent"]),
    zExtent: Number(val["case.z_extent"]),
    caseName: val["run.case"] ?? "",
    formulation: val["run.formulation"] ?? "",
  };
}

export interface RunBundle {
  dir: string;
  name: string;
  diagnostics: Diagnostics;
  geometry: CaseGeometry;
  snapshotSteps: number[];
}

export function openBundle(dir: string): RunBundle {
  const diagnostics = readDiagnostics(path.join(dir, "diagnostics.csv"));
  const geometry = readResolvedConfig(path.join(dir, "config_resolved.toml"));
  const snapDir = path.join(dir, "snapshots");
  const steps = new Set<number>();
  if (fs.existsSync(snapDir)) {
    for (const f of fs.readdirSync(snapDir)) {
      const m = f.match(/^step(\d+)_/);
      if (m) steps.add(Number(m[1]));
    }
  }
  return {
    dir,
    name: path.basename(path.resolve(dir)),
    diagnostics,
    geometry,
    snapshotSteps: [...steps].sort((a, b) => a - b),
  };
}

export function snapshotPath(bundle: RunBundle, step: number, field: string): string {
  return path.join(
    bundle.dir,
    "snapshots",
    `step${String(step).padStart(6, "0")}_${field}.snap`,
  );
}
