"""Implicit time loop: one frozen-Jacobian Newton solve per step, in either
converged mode (increment tolerance 1e-14, hard cap 50) or fixed-iteration
mode (exactly 4 Newton iterations with lumped inverses), with per-step
diagnostics capture and blow-up detection.

Blow-up is operationalised as any non-finite coefficient, a loss of field
positivity, solver failure/Newton-cap exhaustion, or a relative energy jump
above 10x in one step; the raised error carries the failing step index so
stability horizons are measurable.
"""

import time as _time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import assembly
from .cases import CaseSpec, background_theta, case_spec, make_initial_state
from .discretization import Discretization
from .jacobian import (assemble_jacobian_blocks, build_helmholtz,
                       helmholtz_condition_number, recover_prognostics,
                       solve_increments)
from .linsolve import LinearSolveError, LinearSolverCfg
from .residuals import (StabConfig, compute_residual, energy_and_variance)
from .state import MATERIAL_CP, check_formulation

CONVERGED, FIXED_ITERS = "converged", "fixed_iters"


@dataclass
class RunConfig:
    formulation: str
    mode: str = CONVERGED
    dt: float = 600.0
    n_steps: int = 800
    newton_tol: float = 1.0e-14
    newton_cap: int = 200
    fixed_iters: int = 4
    upwind: bool = False
    stab: StabConfig = field(default_factory=StabConfig)
    linear: Optional[LinearSolverCfg] = None
    output_every: int = 0
    exact_inverse: Optional[bool] = None    # None: converged mode on small runs
    capture_cond: Optional[bool] = None     # None: 1D only
    au_vertical_only: bool = False          # vertical-only buoyancy coupling

    def __post_init__(self):
        check_formulation(self.formulation)
        if self.mode not in (CONVERGED, FIXED_ITERS):
            raise ValueError(f"unknown mode {self.mode!r}; use "
                             f"'{CONVERGED}' or '{FIXED_ITERS}'")
        if self.dt <= 0.0 or self.n_steps < 1:
            raise ValueError("dt must be positive and n_steps at least 1")

    def resolved_linear(self):
        if self.linear is not None:
            return self.linear
        if self.mode == CONVERGED:
            return LinearSolverCfg(rtol=1.0e-10, restart=30, max_iters=2000)
        return LinearSolverCfg(rtol=1.0e-6, restart=30, max_iters=200)


@dataclass
class StepDiagnostics:
    step: int
    time: float
    energy: float
    energy_rel_err: float
    mass: float
    theta_variance: float
    newton_iters: int
    gmres_iters_avg: float
    cond_number: float
    res_u: float
    res_rho: float
    res_thermo: float
    res_pi: float
    max_w: float
    total_theta: float = 0.0    # in-memory only; not a CSV column

    CSV_COLUMNS = ("step", "time", "energy", "energy_rel_err", "mass",
                   "theta_variance", "newton_iters", "gmres_iters_avg",
                   "cond_number", "res_u", "res_rho", "res_thermo", "res_pi",
                   "max_w")

    def csv_values(self):
        return [getattr(self, k) for k in self.CSV_COLUMNS]


class BlowUpError(RuntimeError):
    def __init__(self, step, reason):
        super().__init__(f"solution blew up at step {step}: {reason}")
        self.step = step
        self.reason = reason


def _max_w(ctx, state):
    m = ctx.mesh
    if m.dim == 1:
        return float(np.max(np.abs(state.u)))
    return float(np.max(np.abs(state.u[m.n_vfacets:])))


def _increments_converged(prev, new, tol):
    for a, b in ((prev.rho, new.rho), (prev.thermo, new.thermo),
                 (prev.pi, new.pi)):
        nb = np.linalg.norm(b)
        if nb == 0.0 or np.linalg.norm(b - a) > tol * nb:
            return False
    return True


def advance_step(ctx, state_n, cfg, step_index=0, h_prev=None):
    """One implicit step: blocks frozen at state n, Newton iterations from
    iterate k = 0 = state n, per-step diagnostics on exit."""
    exact = cfg.exact_inverse
    if exact is None:
        exact = cfg.mode == CONVERGED and ctx.n_act <= 2500
    lumped = not exact
    direct = ctx.mesh.dim == 1 or ctx.n_act <= 2500
    lin = cfg.resolved_linear()

    try:
        blocks = assemble_jacobian_blocks(ctx, state_n, cfg.dt, cfg.stab,
                                          exact_inverse=exact,
                                          au_vertical_only=cfg.au_vertical_only)
        helm = build_helmholtz(ctx, blocks)
    except (ValueError, LinearSolveError, FloatingPointError) as e:
        raise BlowUpError(step_index, f"jacobian assembly failed: {e}") from e

    state_k = state_n.copy()
    gm_iters = []
    newton_iters = 0
    n_target = cfg.fixed_iters if cfg.mode == FIXED_ITERS else cfg.newton_cap
    converged = cfg.mode != CONVERGED
    try:
        for k in range(1, n_target + 1):
            res, _means = compute_residual(ctx, state_n, state_k, cfg.dt,
                                           upwind=cfg.upwind, stab=cfg.stab,
                                           lumped=lumped)
            incs, iters = solve_increments(helm, res, lin, direct=direct)
            if direct:
                gm_iters.append(0)
            else:
                gm_iters.append(iters)
            prev = state_k
            state_k = recover_prognostics(cfg.formulation, state_k, incs)
            newton_iters = k
            if not state_k.finite():
                raise BlowUpError(step_index, "non-finite field coefficients")
            if cfg.mode == CONVERGED and _increments_converged(
                    prev, state_k, cfg.newton_tol):
                converged = True
                break
        if cfg.mode == CONVERGED and not converged:
            raise BlowUpError(
                step_index,
                f"Newton did not converge within the cap of {cfg.newton_cap}")
        res_f, _ = compute_residual(ctx, state_n, state_k, cfg.dt,
                                    upwind=cfg.upwind, stab=cfg.stab,
                                    lumped=lumped)
    except (ValueError, LinearSolveError, FloatingPointError,
            OverflowError) as e:
        raise BlowUpError(step_index, str(e)) from e

    H, Z, mass, tot_theta = energy_and_variance(ctx, state_k)
    if not np.isfinite(H):
        raise BlowUpError(step_index, "non-finite energy")
    if h_prev is not None and abs(H - h_prev) > 10.0 * abs(h_prev):
        raise BlowUpError(step_index, "relative energy jump above 10x")

    cap_cond = cfg.capture_cond
    if cap_cond is None:
        cap_cond = ctx.mesh.dim == 1
    cond = helmholtz_condition_number(helm) if cap_cond else 0.0

    norms = res_f.norms()
    diag = StepDiagnostics(
        step=step_index, time=step_index * cfg.dt, energy=H,
        energy_rel_err=0.0, mass=mass, theta_variance=Z,
        newton_iters=newton_iters,
        gmres_iters_avg=float(np.mean(gm_iters)) if gm_iters else 0.0,
        cond_number=cond, res_u=norms["u"], res_rho=norms["rho"],
        res_thermo=norms["thermo"], res_pi=norms["pi"],
        max_w=_max_w(ctx, state_k), total_theta=tot_theta)
    return state_k, diag


@dataclass
class RunResult:
    spec: CaseSpec
    config: RunConfig
    diagnostics: list
    snapshots: dict
    state: object
    initial: object
    blowup_step: Optional[int] = None
    blowup_reason: str = ""
    wall_seconds: float = 0.0

    @property
    def completed(self):
        return self.blowup_step is None


def _theta_p(ctx, state, theta_bg):
    if state.formulation == MATERIAL_CP:
        return state.thermo - theta_bg
    theta = state.thermo / state.rho if state.is_flux_form else state.thermo
    return theta - theta_bg


def _w0_projection(ctx, w3_field):
    m = ctx.mesh
    lu = getattr(ctx, "_m0_lu", None)
    if lu is None:
        M0 = assembly.w0_mass(m)
        lu = ctx._m0_lu = spla.splu(M0.tocsc())
    rhs = np.zeros(m.n_vertices)
    w = 0.25 * m.cell_volume * w3_field
    for verts in (m.cell_v00, m.cell_v10, m.cell_v01, m.cell_v11):
        rhs += np.bincount(verts, w, minlength=m.n_vertices)
    return lu.solve(rhs)


def _snapshot(ctx, state, theta_bg):
    snap = {"u": state.u.copy(), "rho": state.rho.copy(),
            "thermo": state.thermo.copy(), "pi": state.pi.copy()}
    tp = _theta_p(ctx, state, theta_bg)
    snap["theta_p"] = tp
    if ctx.mesh.dim == 2 and state.formulation != MATERIAL_CP:
        snap["theta_p_w0"] = _w0_projection(ctx, tp)
    return snap


def run(spec, cfg, mesh=None, ctx=None, initial=None):
    """Drive one case: one StepDiagnostics per completed step, snapshots at
    the configured cadence, graceful blow-up capture."""
    if isinstance(spec, str):
        spec = case_spec(spec)
    if mesh is None:
        mesh = spec.build_mesh()
    if ctx is None:
        ctx = Discretization(mesh, cfg.formulation)
    if initial is None:
        initial = make_initial_state(spec, mesh, cfg.formulation, ctx=ctx)
    theta_bg = background_theta(spec, mesh, cfg.formulation)

    t0 = _time.perf_counter()
    state = initial
    H0, _, _, _ = energy_and_variance(ctx, state)
    diags = []
    snapshots = {0: _snapshot(ctx, state, theta_bg)}
    blow_step, blow_reason = None, ""
    h_prev = H0
    for n in range(1, cfg.n_steps + 1):
        try:
            state, d = advance_step(ctx, state, cfg, step_index=n,
                                    h_prev=h_prev)
        except BlowUpError as e:
            blow_step, blow_reason = e.step, e.reason
            break
        d.energy_rel_err = (d.energy - H0) / H0 if H0 != 0.0 else 0.0
        diags.append(d)
        h_prev = d.energy
        if cfg.output_every and (n % cfg.output_every == 0 or
                                 n == cfg.n_steps):
            snapshots[n] = _snapshot(ctx, state, theta_bg)
    if blow_step is None and cfg.n_steps not in snapshots:
        snapshots[cfg.n_steps] = _snapshot(ctx, state, theta_bg)
    return RunResult(spec=spec, config=cfg, diagnostics=diags,
                     snapshots=snapshots, state=state, initial=initial,
                     blowup_step=blow_step, blowup_reason=blow_reason,
                     wall_seconds=_time.perf_counter() - t0)
