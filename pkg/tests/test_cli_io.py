import os
import subprocess
import sys

import numpy as np
import pytest

from eulerslice.config import ConfigError, parse_config, resolved_config_text
from eulerslice.io import (CSV_COLUMNS, RunDirLocked, RunWriter,
                           read_diagnostics_csv, read_snapshot, write_snapshot)


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_config_valid(tmp_path):
    path = _write(tmp_path, """
[run]
formulation = "flux_lorenz_new"
case = "column1d_bubble"
mode = "converged"
n_steps = 10
""")
    spec, cfg, extras = parse_config(path)
    assert spec.name == "column1d_bubble"
    assert cfg.formulation == "flux_lorenz_new"
    assert cfg.dt == 600.0          # case default applied
    assert cfg.n_steps == 10


def test_parse_config_gw_default_dt(tmp_path):
    path = _write(tmp_path, """
[run]
formulation = "flux_lorenz_new"
case = "gravity_wave"
""")
    spec, cfg, _ = parse_config(path)
    assert cfg.dt == 20.0
    assert spec.stab.u_m == 0.5
    assert cfg.mode == "fixed_iters"


def test_parse_config_unknown_formulation(tmp_path):
    path = _write(tmp_path, """
[run]
formulation = "spectral"
case = "column1d_bubble"
""")
    with pytest.raises(ConfigError) as e:
        parse_config(path)
    msg = str(e.value)
    for name in ("flux_lorenz_new", "flux_lorenz_orig", "material_cp",
                 "material_lorenz"):
        assert name in msg


def test_parse_config_unknown_key(tmp_path):
    path = _write(tmp_path, """
[run]
formulation = "flux_lorenz_new"
case = "column1d_bubble"
frobnicate = 3
""")
    with pytest.raises(ConfigError, match="frobnicate"):
        parse_config(path)


def test_parse_config_malformed(tmp_path):
    path = _write(tmp_path, "[run\nbroken")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config(path)


def test_resolved_echo_contains_defaults(tmp_path):
    path = _write(tmp_path, """
[run]
formulation = "flux_lorenz_new"
case = "gravity_wave"
""")
    spec, cfg, extras = parse_config(path)
    txt = resolved_config_text(spec, cfg, extras)
    assert 'dt = 20.0' in txt
    assert 'u_m = 0.5' in txt
    assert 'newton_tol = 1e-14' in txt
    assert 'rtol' in txt
    import tomli
    doc = tomli.loads(txt)   # echo must itself be valid TOML
    assert doc["case"]["nx"] == 300


def test_snapshot_roundtrip(tmp_path, rng):
    data = rng.standard_normal(137)
    p = str(tmp_path / "f.snap")
    write_snapshot(p, "W3", data)
    kind, back = read_snapshot(p)
    assert kind == "W3"
    assert np.array_equal(back, data)
    assert back.dtype == np.float64
    with open(p, "rb") as f:
        raw1 = f.read()
    write_snapshot(p, "W3", back)
    with open(p, "rb") as f:
        raw2 = f.read()
    assert raw1 == raw2


def test_run_writer_lock(tmp_path):
    d = str(tmp_path / "out")
    w = RunWriter(d)
    with pytest.raises(RunDirLocked):
        RunWriter(d)
    w.close()
    RunWriter(d).close()


def _run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "eulerslice.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


@pytest.fixture
def tiny_config(tmp_path):
    return _write(tmp_path, """
[run]
formulation = "flux_lorenz_new"
case = "column1d_bubble"
mode = "fixed_iters"
n_steps = 4
output_every = 2

[case]
nz = 20
""")


def test_cli_run_bundle(tmp_path, tiny_config):
    out = str(tmp_path / "r1")
    res = _run_cli(["run", "--config", tiny_config, "--out", out], str(tmp_path))
    assert res.returncode == 0, res.stderr
    cols = read_diagnostics_csv(os.path.join(out, "diagnostics.csv"))
    assert tuple(cols) == CSV_COLUMNS
    assert cols["step"].size == 4
    for c in CSV_COLUMNS:
        assert np.all(np.isfinite(cols[c]))
    snaps = os.listdir(os.path.join(out, "snapshots"))
    assert any("theta_p" in s for s in snaps)
    assert os.path.exists(os.path.join(out, "config_resolved.toml"))
    # byte-identical rerun
    out2 = str(tmp_path / "r2")
    res2 = _run_cli(["run", "--config", tiny_config, "--out", out2], str(tmp_path))
    assert res2.returncode == 0
    a = open(os.path.join(out, "diagnostics.csv"), "rb").read()
    b = open(os.path.join(out2, "diagnostics.csv"), "rb").read()
    assert a == b


def test_cli_run_blowup_exit(tmp_path):
    cfgp = _write(tmp_path, """
[run]
formulation = "flux_lorenz_orig"
case = "column1d_bubble"
mode = "fixed_iters"
n_steps = 60
""", name="orig.toml")
    out = str(tmp_path / "blow")
    res = _run_cli(["run", "--config", cfgp, "--out", out], str(tmp_path))
    assert res.returncode != 0
    assert "blew up at step" in res.stderr
    cols = read_diagnostics_csv(os.path.join(out, "diagnostics.csv"))
    assert cols["step"].size < 60          # rows up to the failure only


def test_cli_verify(tmp_path):
    res = _run_cli(["verify", "--seed", "7"], str(tmp_path))
    assert res.returncode == 0, res.stdout + res.stderr
    assert "PASS" in res.stdout
    assert "FAIL " not in res.stdout


def test_cli_condnum(tmp_path, tiny_config):
    out = str(tmp_path / "cn")
    res = _run_cli(["condnum", "--config", tiny_config, "--out", out],
                   str(tmp_path))
    assert res.returncode == 0, res.stderr
    lines = open(os.path.join(out, "condition_numbers.csv")).read().splitlines()
    assert lines[0] == "step,time,cond_number"
    assert len(lines) == 5
    assert all(float(l.split(",")[2]) > 1.0 for l in lines[1:])
