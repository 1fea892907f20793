"""On-disk run bundles: diagnostics CSV, binary field snapshots, the resolved
config echo, and the single-writer lock.

The snapshot container is self-describing and bit-exact under round-trips:
magic, space kind, dof count, then little-endian float64 coefficients.  CSV
numbers are written with repr-faithful %.17g so identical runs produce
byte-identical files.
"""

import os
import struct

import numpy as np

SNAP_MAGIC = b"EULSNAP1"
CSV_COLUMNS = ("step", "time", "energy", "energy_rel_err", "mass",
               "theta_variance", "newton_iters", "gmres_iters_avg",
               "cond_number", "res_u", "res_rho", "res_thermo", "res_pi",
               "max_w")


class RunDirLocked(RuntimeError):
    pass


class RunWriter:
    """Owns one run directory; refuses to share it (lock file)."""

    def __init__(self, out_dir):
        self.dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self._lock = os.path.join(out_dir, ".lock")
        try:
            fd = os.open(self._lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunDirLocked(
                f"run directory {out_dir} is locked by another writer")
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        self._csv = None
        self.snap_dir = os.path.join(out_dir, "snapshots")
        os.makedirs(self.snap_dir, exist_ok=True)

    def write_config(self, text):
        with open(os.path.join(self.dir, "config_resolved.toml"), "w") as f:
            f.write(text)

    def append_diag(self, diag):
        if self._csv is None:
            self._csv = open(os.path.join(self.dir, "diagnostics.csv"), "w")
            self._csv.write(",".join(CSV_COLUMNS) + "\n")
        vals = diag.csv_values()
        out = []
        for c, v in zip(CSV_COLUMNS, vals):
            if c in ("step", "newton_iters"):
                out.append(str(int(v)))
            else:
                out.append("%.17g" % float(v))
        self._csv.write(",".join(out) + "\n")

    def write_snapshot(self, step, name, kind, coeffs, text_export=False):
        path = os.path.join(self.snap_dir, f"step{step:06d}_{name}.snap")
        write_snapshot(path, kind, coeffs)
        if text_export:
            np.savetxt(path + ".txt", coeffs, fmt="%.17g",
                       header=f"{kind} {coeffs.size}")

    def close(self):
        if self._csv is not None:
            self._csv.close()
            self._csv = None
        if os.path.exists(self._lock):
            os.remove(self._lock)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_snapshot(path, kind, coeffs):
    coeffs = np.asarray(coeffs, dtype="<f8")
    kind_b = kind.encode("ascii")
    with open(path, "wb") as f:
        f.write(SNAP_MAGIC)
        f.write(struct.pack("<B", len(kind_b)))
        f.write(kind_b)
        f.write(struct.pack("<Q", coeffs.size))
        f.write(coeffs.tobytes())


def read_snapshot(path):
    """-> (space_kind, coeffs); bitwise inverse of write_snapshot."""
    with open(path, "rb") as f:
        magic = f.read(len(SNAP_MAGIC))
        if magic != SNAP_MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        (klen,) = struct.unpack("<B", f.read(1))
        kind = f.read(klen).decode("ascii")
        (n,) = struct.unpack("<Q", f.read(8))
        data = np.frombuffer(f.read(8 * n), dtype="<f8").copy()
        if data.size != n:
            raise ValueError(f"{path}: truncated snapshot")
    return kind, data


def read_diagnostics_csv(path):
    """-> dict of column arrays."""
    with open(path) as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    cols = {h: np.array([float(r[i]) for r in rows])
            for i, h in enumerate(header)}
    return cols
