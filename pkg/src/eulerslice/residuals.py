"""Nonlinear residual functionals, time-centered diagnostic means, the
entropy-residual transform, and the energy/variance/balance diagnostics.

The discrete equations advance (u, rho, thermo, Pi) from time level n to the
current Newton iterate k.  All facet pairings are written in the compact
adjoint-consistent form

    momentum pressure term : + dt (v.n) (theta_up) [[Pi_bar]]      per facet
    flux-form Theta term   : - dt (F.n) (theta_up) [[psi]]         per facet
    material theta term    : + dt (F.n) [[theta_bar]] ({{psi/rho_bar}} - c [[...]])
    material pressure term : - dt (v.n) ({{beta}} - c [[beta]]) [[theta_bar]]

with theta_up = {{theta_bar}} - c [[theta_bar]] and c = sign(F.n)/2 (0 when
upwinding is off).  Contracting the momentum rows with F_bar and the thermo
rows with their energy partners cancels exactly, which is what the energy
conservation tests pin down.

Diagnostic means use the 2-1-1-2 / 1-1-1 Simpson combinations, which
integrate the quadratic products exactly in time; all projections here use
exact mass solves (never lumped).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import assembly
from .constants import CONST
from .state import (FLUX_NEW, FLUX_ORIG, MATERIAL_CP, MATERIAL_LORENZ,
                    FLUX_FORMS, State, check_formulation)


@dataclass
class StabConfig:
    """Stabilisation switches: CIP penalty (gravity wave) and viscosity
    (density current).  u_m < 0 and nu < 0 are rejected."""
    u_m: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if self.u_m < 0.0:
            raise ValueError("u_m must be nonnegative")
        if self.nu < 0.0:
            raise ValueError("nu must be nonnegative")

    @property
    def active(self):
        return self.u_m > 0.0 or self.nu > 0.0


@dataclass
class DiagnosedFields:
    F_bar: np.ndarray
    Phi_bar: np.ndarray              # Simpson kinetic + g z (+ thermo part, material)
    theta_bar: np.ndarray            # W3 (Lorenz) or Wtheta (CP)
    Pi_bar: np.ndarray
    rho_bar: np.ndarray
    alpha_bar: np.ndarray
    u_bar: np.ndarray
    Theta_bar: Optional[np.ndarray] = None      # flux forms
    q_bar: Optional[np.ndarray] = None          # 2D only
    rhoPi_bar: Optional[np.ndarray] = None      # material-Lorenz energy partner
    Pi_star: Optional[np.ndarray] = None        # energy-exact Exner mean (flux)


def energy_exact_pi_mean(theta_n, theta_k, const=CONST):
    """Exner mean making the internal-energy exchange exact per step.

    The divided difference of F(Theta) = (c_v/c_p) Theta Pi_eos(Theta),

        Pi* = [F(Theta^k) - F(Theta^n)] / (Theta^k - Theta^n),

    so that Pi* dTheta telescopes the internal energy exactly whenever the
    states satisfy the equation of state (which the converged log-form
    residual enforces to rounding).  F' = Pi_eos, so Pi* is a second-order
    accurate Exner mean; it is evaluated through expm1/log1p, which keeps
    full precision for arbitrarily small increments, and reduces to
    Pi_eos(Theta^n) at dTheta = 0.
    """
    kappa = const.kappa
    pi_eos_n = const.c_p * (const.R * theta_n / const.p_0) ** kappa
    r = (theta_k - theta_n) / theta_n
    out = np.empty_like(pi_eos_n)
    small = r == 0.0
    big = ~small
    out[small] = pi_eos_n[small]
    g = np.expm1((1.0 + kappa) * np.log1p(r[big])) / r[big]
    out[big] = pi_eos_n[big] * g / (1.0 + kappa)
    return out


@dataclass
class ResidualSet:
    r_u: np.ndarray
    r_rho: np.ndarray
    r_thermo: np.ndarray
    r_pi: np.ndarray
    r_eta: Optional[np.ndarray] = None

    def norms(self):
        return {k: float(np.linalg.norm(getattr(self, f"r_{k}")))
                for k in ("u", "rho", "thermo", "pi")}


def _simpson(an, ak, bn, bk):
    """Exact time integral of a(t) b(t) over the step, both linear in t."""
    return (2 * an * bn + an * bk + ak * bn + 2 * ak * bk) / 6.0


def diagnose_means(ctx, state_n, state_k, lumped=False):
    """Time-centered diagnostic fields of Eq.-(5) type for one Newton iterate.

    F_bar integrates rho(t) u(t) exactly in time (2-1-1-2 weights); the
    kinetic mean uses the 1-1-1 weights; theta_bar solves the rho_bar-weighted
    projection exactly.  The Coriolis parameter is zero throughout, and the
    potential-vorticity mean is only diagnosed on 2D meshes.

    lumped=True replaces the mass solves of the W2/W0 projections by their
    row-sum diagonals, mirroring the lumped solver mode where every
    intermediate inverse is approximate; the frozen Jacobian then linearises
    the same operators the residual actually applies.
    """
    m = ctx.mesh
    form = state_n.formulation
    rho_bar = 0.5 * (state_n.rho + state_k.rho)
    if np.any(rho_bar <= 0.0):
        bad = int(np.argmin(rho_bar))
        raise ValueError(f"nonpositive mean density in cell {bad}")
    pi_bar = 0.5 * (state_n.pi + state_k.pi)
    u_bar = 0.5 * (state_n.u + state_k.u)
    alpha_bar = 1.0 / rho_bar

    # F_bar: exact W2 projection of the Simpson momentum mean
    Mr_n = assembly.w2_mass(m, state_n.rho)
    Mr_k = assembly.w2_mass(m, state_k.rho)
    rhs = (2.0 * (Mr_n @ state_n.u) + Mr_n @ state_k.u
           + Mr_k @ state_n.u + 2.0 * (Mr_k @ state_k.u)) / 6.0
    F_bar = ctx.solve_m2(rhs, lumped=lumped)

    # Phi_bar: cellwise kinetic mean plus geopotential
    kin = (ctx.w2_kinetic_cells(state_n.u, state_n.u)
           + ctx.w2_kinetic_cells(state_n.u, state_k.u)
           + ctx.w2_kinetic_cells(state_k.u, state_k.u)) / 6.0
    Phi_bar = kin / ctx.V + ctx.const.g * m.cell_zc

    Theta_bar = None
    rhoPi_bar = None
    Pi_star = None
    if form in FLUX_FORMS:
        for st in (state_n, state_k):
            if np.any(st.thermo <= 0.0):
                bad = int(np.argmin(st.thermo))
                raise ValueError(f"nonpositive Theta in cell {bad}: "
                                 f"{st.thermo[bad]!r}")
        Theta_bar = 0.5 * (state_n.thermo + state_k.thermo)
        theta_bar = Theta_bar / rho_bar
        Pi_star = energy_exact_pi_mean(state_n.thermo, state_k.thermo,
                                       const=ctx.const)
    elif form == MATERIAL_LORENZ:
        theta_bar = 0.5 * (state_n.thermo + state_k.thermo)
        rhoPi_bar = _simpson(state_n.rho, state_k.rho, state_n.pi, state_k.pi)
        Phi_bar = Phi_bar + _simpson(state_n.thermo, state_k.thermo,
                                     state_n.pi, state_k.pi)
    else:  # material_cp: theta lives in Wtheta, plain centered mean
        theta_bar = 0.5 * (state_n.thermo + state_k.thermo)

    q_bar = None
    if m.dim == 2:
        q_bar = _diagnose_q(ctx, rho_bar, u_bar, lumped=lumped)

    return DiagnosedFields(F_bar=F_bar, Phi_bar=Phi_bar, theta_bar=theta_bar,
                           Pi_bar=pi_bar, rho_bar=rho_bar,
                           alpha_bar=alpha_bar, u_bar=u_bar,
                           Theta_bar=Theta_bar, q_bar=q_bar,
                           rhoPi_bar=rhoPi_bar, Pi_star=Pi_star)


def _diagnose_q(ctx, rho_bar, u_bar, lumped=False):
    """Weak potential vorticity: rho_bar-weighted W0 projection of the
    out-of-plane curl du_x/dz - du_z/dx of u_bar, including the boundary
    tangential-wind term (f = 0).

    The handedness pairs with the momentum term q x F = q (F_z, -F_x);
    together they reproduce (u.grad)u alongside the Bernoulli gradient,
    which the mean-flow advection test pins down (the opposite sign
    anti-advects the vertical velocity).
    """
    m = ctx.mesh
    Mq = assembly.w0_mass(m, rho_bar)
    ux = ctx.w2_x_at_q(u_bar)        # (nc, nq) in xi
    uz = ctx.w2_z_at_q(u_bar)        # (nc, nq) in zeta
    # int (dbeta/dx u_z - dbeta/dz u_x) per local basis
    contr = (np.einsum("lab,cb,ab->lc", ctx.w0_gx, uz, ctx.wq2)
             - np.einsum("lab,ca,ab->lc", ctx.w0_gz, ux, ctx.wq2)) * ctx.V
    rhs = np.zeros(m.n_vertices)
    for l in range(4):
        rhs += np.bincount(ctx.cell_verts[l], contr[l], minlength=m.n_vertices)
    # boundary term: - int beta u_x on the bottom edge, + on the top edge
    bot = m.cell_iz == 0
    top = m.cell_iz == m.nz - 1
    tr0 = 1 - ctx.qp            # traces of the two x-varying locals
    tr1 = ctx.qp
    for cells, sign, locs in ((np.nonzero(bot)[0], -1.0, (0, 1)),
                              (np.nonzero(top)[0], +1.0, (2, 3))):
        uxe = ctx.w2_x_at_q(u_bar)[cells]      # constant in zeta
        w = sign * m.cell_dx * ctx.qw
        rhs_low = (uxe * (tr0 * w)[None, :]).sum(axis=1)
        rhs_high = (uxe * (tr1 * w)[None, :]).sum(axis=1)
        np.add.at(rhs, ctx.cell_verts[locs[0]][cells], rhs_low)
        np.add.at(rhs, ctx.cell_verts[locs[1]][cells], rhs_high)
    if lumped:
        return rhs / np.asarray(Mq.sum(axis=1)).ravel()
    return spla.spsolve(Mq.tocsc(), rhs)


def _vorticity_term(ctx, q_bar, F_bar):
    """Momentum rows of v . q_bar x F_bar with q x F = q (F_z, -F_x)."""
    m = ctx.mesh
    qv = ctx.w0_at_q(q_bar)                     # (nc, nq, nq)
    Fx = ctx.w2_x_at_q(F_bar)                   # (nc, nq)
    Fz = ctx.w2_z_at_q(F_bar)
    out = np.zeros(m.n_w2)
    # x-basis locals: values (1-xi), xi; integrand v_x * q * F_z
    bx = np.stack([1 - ctx.qp, ctx.qp])         # (2, nq)
    integ = np.einsum("cab,cb,ab->ca", qv, Fz, ctx.wq2) * ctx.V
    for l in range(2):
        out += np.bincount(ctx.cell_w2x[l], (integ * bx[l][None, :]).sum(axis=1),
                           minlength=m.n_w2)
    # z-basis locals: values (1-zeta), zeta; integrand -v_z * q * F_x
    integz = -np.einsum("cab,ca,ab->cb", qv, Fx, ctx.wq2) * ctx.V
    for l in range(2):
        out += np.bincount(ctx.cell_w2z[l], (integz * bx[l][None, :]).sum(axis=1),
                           minlength=m.n_w2)
    return out


def _log_field(name, v):
    if np.any(v <= 0.0):
        bad = int(np.argmin(v))
        raise ValueError(f"nonpositive {name} in cell {bad}: {v[bad]!r}")
    return np.log(v)


def compute_residual(ctx, state_n, state_k, dt, upwind=False,
                     stab=None, means=None, lumped=False):
    """Evaluate the nonlinear residual of the bound formulation.

    Returns (ResidualSet, DiagnosedFields).  The equation-of-state residual
    uses the log form, so it vanishes exactly when Pi = c_p (R Theta/p_0)^kappa
    holds cellwise.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    form = check_formulation(state_n.formulation)
    stab = stab or StabConfig()
    if means is None:
        means = diagnose_means(ctx, state_n, state_k, lumped=lumped)
    m = ctx.mesh
    fs = ctx.facets
    const = ctx.const
    kappa = const.kappa
    V = ctx.V

    F = means.F_bar
    flux = F[fs.dof] * fs.meas
    c = fs.upwind_c(F) if upwind else None

    # mass equation (same in every formulation)
    r_rho = V * (state_k.rho - state_n.rho) + dt * (ctx.D_full @ F)

    # momentum: time term, Bernoulli gradient, vorticity
    r_u = ctx.M2_full @ (state_k.u - state_n.u)
    r_u -= dt * (ctx.D_full.T @ means.Phi_bar)
    if m.dim == 2 and means.q_bar is not None:
        r_u += dt * _vorticity_term(ctx, means.q_bar, F)

    if form in FLUX_FORMS:
        theta_b = means.theta_bar
        tup = fs.upwinded(theta_b, c)
        r_u[fs.dof] += dt * fs.meas * tup * fs.jump(means.Pi_star)
        s = flux * tup
        r_th = V * (state_k.thermo - state_n.thermo)
        r_th += dt * (np.bincount(fs.cm, s, minlength=m.n_cells)
                      - np.bincount(fs.cp, s, minlength=m.n_cells))
        if stab.nu > 0.0:
            w = (stab.nu / fs.spacing) * fs.mean(means.rho_bar) \
                * fs.jump(theta_b) * fs.meas
            r_th += dt * (np.bincount(fs.cp, w, minlength=m.n_cells)
                          - np.bincount(fs.cm, w, minlength=m.n_cells))
        r_pi = V * (_log_field("Exner pressure", state_k.pi)
                    - kappa * _log_field("Theta", state_k.thermo)
                    - kappa * np.log(const.R / const.p_0) - np.log(const.c_p))
    elif form == MATERIAL_LORENZ:
        theta_b = means.theta_bar
        beta = means.rhoPi_bar / means.rho_bar
        bup = fs.upwinded(beta, c)
        jth = fs.jump(theta_b)
        r_u[fs.dof] += -dt * fs.meas * bup * jth
        base = dt * flux * jth
        cp_c = 0.5 if c is None else 0.5 - c
        cm_c = 0.5 if c is None else 0.5 + c
        r_th = V * (state_k.thermo - state_n.thermo)
        r_th += np.bincount(fs.cp, base * cp_c / means.rho_bar[fs.cp],
                            minlength=m.n_cells)
        r_th += np.bincount(fs.cm, base * cm_c / means.rho_bar[fs.cm],
                            minlength=m.n_cells)
        if stab.nu > 0.0:
            w = (stab.nu / fs.spacing) * fs.mean(means.rho_bar) \
                * fs.jump(theta_b) * fs.meas
            r_th += dt * (np.bincount(fs.cp, w, minlength=m.n_cells)
                          - np.bincount(fs.cm, w, minlength=m.n_cells))
        r_pi = V * (_log_field("Exner pressure", state_k.pi)
                    - kappa * _log_field("density", state_k.rho)
                    - kappa * _log_field("theta", state_k.thermo)
                    - kappa * np.log(const.R / const.p_0) - np.log(const.c_p))
    else:  # material_cp
        r_u, r_th, r_pi = _cp_thermo_residual(
            ctx, state_n, state_k, dt, means, stab, r_u)

    # stabilisation of the momentum equation
    if stab.u_m > 0.0:
        cip_eval, _ = assembly.assemble_cip_penalty(
            m, means.alpha_bar, stab.u_m, facets=fs)
        AF, _val = cip_eval(F)
        r_u += dt * AF
    if stab.nu > 0.0:
        r_u += dt * (_cached_visc_u(ctx, stab.nu) @ means.u_bar)

    r_u = ctx.zero_eliminated(r_u)
    res = ResidualSet(r_u=r_u, r_rho=r_rho, r_thermo=r_th, r_pi=r_pi)
    if form == FLUX_NEW:
        res.r_eta = entropy_residual(res.r_thermo, res.r_rho, ctx.M3_diag,
                                     ctx.M3_diag * state_n.thermo,
                                     ctx.M3_diag * state_n.rho)
    return res, means


def _cached_visc_u(ctx, nu):
    """Mesh-fixed momentum viscosity matrix, memoised on the context."""
    cache = getattr(ctx, "_visc_cache", None)
    if cache is None:
        cache = ctx._visc_cache = {}
    if nu not in cache:
        cache[nu] = assembly.assemble_viscosity(ctx.mesh, nu,
                                                facets=ctx.facets)
    return cache[nu][0]


def _cp_thermo_residual(ctx, state_n, state_k, dt, means, stab, r_u):
    """Charney-Phillips rows: material theta advection with strong vertical
    derivative plus centered horizontal facet means, the pointwise-evaluated
    theta grad Pi coupling, and the log equation of state with theta under
    cell quadrature."""
    m = ctx.mesh
    fs = ctx.facets
    const = ctx.const
    V = ctx.V
    nth = ctx.space_wtheta.dof_count
    theta_b = means.theta_bar
    u_bar = means.u_bar

    # theta equation
    r_th = ctx.Mtheta @ (state_k.thermo - state_n.thermo)
    dthdz = ctx.wtheta_dz(theta_b)
    if m.dim == 2:
        wB = u_bar[m.n_vfacets + m.cell_hf_bot]
        wT = u_bar[m.n_vfacets + m.cell_hf_top]
        botd, topd = m.cell_hf_bot, m.cell_hf_top
    else:
        cells = np.arange(m.n_cells)
        wB, wT = u_bar[cells], u_bar[cells + 1]
        botd, topd = cells, cells + 1
    adv_b = V * dthdz * (2 * wB + wT) / 6.0
    adv_t = V * dthdz * (wB + 2 * wT) / 6.0
    r_th += dt * np.bincount(botd, adv_b, minlength=nth)
    r_th += dt * np.bincount(topd, adv_t, minlength=nth)
    if m.dim == 2:
        # horizontal advection across vertical facets: (u.n) [[theta]] {{gamma}}
        vf = np.nonzero(fs.vertical)[0]
        un = u_bar[fs.dof[vf]]
        cmB = m.cell_hf_bot[fs.cm[vf]]
        cmT = m.cell_hf_top[fs.cm[vf]]
        cpB = m.cell_hf_bot[fs.cp[vf]]
        cpT = m.cell_hf_top[fs.cp[vf]]
        jB = theta_b[cpB] - theta_b[cmB]
        jT = theta_b[cpT] - theta_b[cmT]
        dz = m.cell_dz
        # int hat_B(z) [[theta]](z) dz and the T counterpart, halved means
        ints_b = dz * (jB / 3.0 + jT / 6.0) * 0.5 * un * dt
        ints_t = dz * (jB / 6.0 + jT / 3.0) * 0.5 * un * dt
        for dofs in (cmB, cpB):
            r_th += np.bincount(dofs, ints_b, minlength=nth)
        for dofs in (cmT, cpT):
            r_th += np.bincount(dofs, ints_t, minlength=nth)

    # momentum pressure coupling: -dt [ int div(v theta) Pi + facet term ]
    thB, thT = ctx.wtheta_pair(theta_b)
    th_avg = 0.5 * (thB + thT)
    pi_b = means.Pi_bar
    # z-pair rows collapse to -+ (V/dz) Pi_c theta(node)
    r_u += dt * np.bincount(
        np.concatenate([ctx_z_dofs(ctx, "bot"), ctx_z_dofs(ctx, "top")]),
        np.concatenate([(V / m.cell_dz) * pi_b * thB,
                        -(V / m.cell_dz) * pi_b * thT]),
        minlength=m.n_w2)
    if m.dim == 2:
        # x-pair rows: -dt (-+ dz Pi_c theta_avg)
        r_u += dt * np.bincount(
            np.concatenate([m.cell_vf_left, m.cell_vf_right]),
            np.concatenate([m.vf_measure * pi_b * th_avg,
                            -m.vf_measure * pi_b * th_avg]),
            minlength=m.n_w2)
        # vertical-facet jump: -dt (v.n) mean_z([[theta]]) {{Pi}}
        vf = np.nonzero(fs.vertical)[0]
        javg = 0.5 * (jB + jT)
        r_u += np.bincount(fs.dof[vf],
                           -dt * fs.meas[vf] * javg * fs.mean(pi_b)[vf],
                           minlength=m.n_w2)

    # log equation of state with quadrature-averaged log theta
    thq = ctx.wtheta_at_q(state_k.thermo)
    if np.any(thq <= 0.0):
        bad = int(np.argmin(thq.min(axis=1)))
        raise ValueError(f"nonpositive theta in cell {bad}")
    log_th = (np.log(thq) * ctx.qw[None, :]).sum(axis=1)
    kappa = const.kappa
    r_pi = V * (_log_field("Exner pressure", state_k.pi)
                - kappa * _log_field("density", state_k.rho)
                - kappa * log_th
                - kappa * np.log(const.R / const.p_0) - np.log(const.c_p))
    return r_u, r_th, r_pi


def ctx_z_dofs(ctx, which):
    m = ctx.mesh
    if m.dim == 2:
        hf = m.cell_hf_bot if which == "bot" else m.cell_hf_top
        return m.n_vfacets + hf
    cells = np.arange(m.n_cells)
    return cells if which == "bot" else cells + 1


def entropy_residual(r_theta, r_rho, m3_diag, m3theta_diag, m3rho_diag):
    """R_eta = M3 (M3Theta^-1 R_Theta - M3rho^-1 R_rho) with the exact
    per-cell inverses of the block-diagonal weighted masses at level n."""
    if np.any(m3theta_diag == 0.0) or np.any(m3rho_diag == 0.0):
        raise ValueError("zero weight cell in the entropy transform")
    return m3_diag * (r_theta / m3theta_diag - r_rho / m3rho_diag)


# ---------------------------------------------------------------------------
# scalar diagnostics

def energy_and_variance(ctx, state):
    """(H, Z, total_mass, total_Theta) of one state.

    H) total energy with the rho-weighted kinetic term; Z) potential
    temperature variance int Theta^2/(2 rho); in 1D both are per unit
    horizontal extent.
    """
    m = ctx.mesh
    const = ctx.const
    V = ctx.V
    kin = 0.5 * float(state.rho @ ctx.w2_kinetic_cells(state.u, state.u))
    pot = float(np.sum(state.rho * const.g * m.cell_zc) * V)
    if state.formulation in FLUX_FORMS:
        Theta = state.thermo
        internal = (const.c_v / const.c_p) * float(np.sum(Theta * state.pi) * V)
        Z = 0.5 * float(np.sum(Theta ** 2 / state.rho) * V)
        total_Theta = float(np.sum(Theta) * V)
    elif state.formulation == MATERIAL_LORENZ:
        Theta = state.rho * state.thermo
        internal = (const.c_v / const.c_p) * float(np.sum(Theta * state.pi) * V)
        Z = 0.5 * float(np.sum(state.rho * state.thermo ** 2) * V)
        total_Theta = float(np.sum(Theta) * V)
    else:
        thB, thT = ctx.wtheta_pair(state.thermo)
        th_avg = 0.5 * (thB + thT)
        th_sq = (thB ** 2 + thB * thT + thT ** 2) / 3.0
        internal = (const.c_v / const.c_p) * float(
            np.sum(state.rho * state.pi * th_avg) * V)
        Z = 0.5 * float(np.sum(state.rho * th_sq) * V)
        total_Theta = float(np.sum(state.rho * th_avg) * V)
    H = kin + pot + internal
    total_mass = float(np.sum(state.rho) * V)
    return H, Z, total_mass, total_Theta


def hydrostatic_imbalance(ctx, state):
    """W3 field g + theta dPi/dz using the lumped weak vertical gradient.

    Facet values g + theta_f * (grad~ Pi)_f are averaged onto cells over each
    cell's interior horizontal facets, so a discretely balanced column gives
    exactly zero.  The gradient is the same row-sum-lumped weak gradient as
    the Jacobian's approximate Exner gradient, on the full dof set (boundary
    elimination would bias the row sums of the facets next to the walls)."""
    m = ctx.mesh
    gp = -(ctx.D_full.T @ state.pi) / assembly.lumped_diag(ctx.M2_full)
    sel = np.nonzero(m.hf_interior)[0]
    dof = m.w2_hf_dof(sel)
    below = m.hf_minus[sel]
    above = m.hf_plus[sel]
    if state.formulation == MATERIAL_CP:
        theta_f = state.thermo[sel]
    else:
        theta = state.thermo / state.rho if state.is_flux_form else state.thermo
        theta_f = 0.5 * (theta[below] + theta[above])
    imb_f = ctx.const.g + theta_f * gp[dof]
    num = np.bincount(below, imb_f, minlength=m.n_cells) \
        + np.bincount(above, imb_f, minlength=m.n_cells)
    cnt = np.bincount(below, minlength=m.n_cells) \
        + np.bincount(above, minlength=m.n_cells)
    cnt = np.maximum(cnt, 1)
    return num / cnt
