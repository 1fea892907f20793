"""Run configuration files: TOML parsing with strict key checking, and the
resolved-config echo written into every run directory.

Physical defaults all come from the benchmark definitions; anything the file
does not set is echoed back so a run is reproducible from its output alone.
"""

import sys
from dataclasses import asdict

if sys.version_info >= (3, 11):
    import tomllib as toml
else:
    import tomli as toml

from .cases import CASE_NAMES, case_spec
from .linsolve import LinearSolverCfg
from .residuals import StabConfig
from .state import FORMULATIONS
from .stepper import CONVERGED, FIXED_ITERS, RunConfig

_RUN_KEYS = {
    "formulation", "case", "mode", "dt", "n_steps", "newton_tol",
    "newton_cap", "fixed_iters", "upwind", "output_every", "exact_inverse",
    "capture_cond", "seed", "au_vertical_only",
}
_CASE_KEYS = {
    "nx", "nz", "x_extent", "z_extent", "periodic_x",
    # case physical parameters
    "theta0", "N_bv", "a_c", "x_c", "z_c", "x_r", "z_r", "amp", "u_mean",
    "bubble_amp", "bubble_z", "bubble_width",
}
_STAB_KEYS = {"u_m", "nu"}
_LINEAR_KEYS = {"rtol", "atol", "restart", "max_iters", "preconditioner"}


class ConfigError(ValueError):
    pass


def _check_keys(section, keys, allowed):
    unknown = set(keys) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def parse_config(path):
    """Read a TOML run file -> (CaseSpec, RunConfig, extras dict)."""
    with open(path, "rb") as f:
        try:
            doc = toml.load(f)
        except toml.TOMLDecodeError as e:
            raise ConfigError(f"malformed config {path}: {e}") from e

    run = dict(doc.pop("run", {}))
    case_over = dict(doc.pop("case", {}))
    stab_over = dict(doc.pop("stabilization", {}))
    linear = dict(doc.pop("linear", {}))
    if doc:
        raise ConfigError(
            f"unknown section(s): {', '.join(sorted(doc.keys()))}")
    _check_keys("run", run, _RUN_KEYS)
    _check_keys("case", case_over, _CASE_KEYS)
    _check_keys("stabilization", stab_over, _STAB_KEYS)
    _check_keys("linear", linear, _LINEAR_KEYS)

    case_name = run.pop("case", None)
    if case_name is None:
        raise ConfigError("run.case is required")
    if case_name not in CASE_NAMES:
        raise ConfigError(f"unknown case {case_name!r}; valid cases are "
                          + ", ".join(CASE_NAMES))
    formulation = run.pop("formulation", None)
    if formulation is None:
        raise ConfigError("run.formulation is required")
    if formulation not in FORMULATIONS:
        raise ConfigError(
            f"unknown formulation {formulation!r}; valid names are "
            + ", ".join(FORMULATIONS))

    overrides = dict(case_over)
    for key in ("dt", "n_steps"):
        if key in run:
            overrides[key] = run[key]
    overrides.update(stab_over)
    spec = case_spec(case_name, **overrides)

    mode = run.pop("mode", FIXED_ITERS if spec.dim == 2 else CONVERGED)
    if mode not in (CONVERGED, FIXED_ITERS):
        raise ConfigError(f"unknown mode {mode!r}; use '{CONVERGED}' or "
                          f"'{FIXED_ITERS}'")
    seed = int(run.pop("seed", 0))
    run.pop("dt", None)
    run.pop("n_steps", None)
    lin_cfg = LinearSolverCfg(**linear) if linear else None
    cfg = RunConfig(formulation=formulation, mode=mode, dt=spec.dt,
                    n_steps=spec.n_steps, stab=spec.stab, linear=lin_cfg,
                    **run)
    return spec, cfg, {"seed": seed}


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return repr(v)
    return str(v)


def resolved_config_text(spec, cfg, extras=None):
    """TOML echo of every resolved setting, defaults included."""
    lin = cfg.resolved_linear()
    lines = ["[run]"]
    lines.append(f'formulation = {_fmt(cfg.formulation)}')
    lines.append(f'case = {_fmt(spec.name)}')
    lines.append(f'mode = {_fmt(cfg.mode)}')
    lines.append(f'dt = {_fmt(float(cfg.dt))}')
    lines.append(f'n_steps = {_fmt(int(cfg.n_steps))}')
    lines.append(f'newton_tol = {_fmt(float(cfg.newton_tol))}')
    lines.append(f'newton_cap = {_fmt(int(cfg.newton_cap))}')
    lines.append(f'fixed_iters = {_fmt(int(cfg.fixed_iters))}')
    lines.append(f'upwind = {_fmt(bool(cfg.upwind))}')
    lines.append(f'output_every = {_fmt(int(cfg.output_every))}')
    if extras and "seed" in extras:
        lines.append(f'seed = {_fmt(int(extras["seed"]))}')
    lines.append("")
    lines.append("[case]")
    for k in ("nx", "nz"):
        lines.append(f'{k} = {_fmt(int(getattr(spec, k)))}')
    for k in ("x_extent", "z_extent"):
        lines.append(f'{k} = {_fmt(float(getattr(spec, k)))}')
    lines.append(f'periodic_x = {_fmt(bool(spec.periodic_x))}')
    for k in sorted(spec.params):
        lines.append(f'{k} = {_fmt(spec.params[k])}')
    lines.append("")
    lines.append("[stabilization]")
    lines.append(f'u_m = {_fmt(float(spec.stab.u_m))}')
    lines.append(f'nu = {_fmt(float(spec.stab.nu))}')
    lines.append("")
    lines.append("[linear]")
    for k, v in asdict(lin).items():
        lines.append(f'{k} = {_fmt(v)}')
    return "\n".join(lines) + "\n"
