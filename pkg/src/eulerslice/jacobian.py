"""Approximate block Jacobians, their Schur reduction to a Helmholtz system,
increment solves, back-substitution and prognostic recovery.

Blocks are frozen at time level n and reused across Newton iterations.  The
four formulations share the skeleton

    [ M_2R    0      G_T    G_Pi ] [du  ]     [ R_u  ]
    [ D_u     M_3    0      0    ] [drho]  = -[ R_rho]
    [ A_T     0      B_T    0    ] [dT  ]     [ R_T  ]
    [ 0       C_rho  C_T    C_Pi ] [dPi ]     [ R_Pi ]

(original flux form: the third row is D_T du + Q_u drho + B_T dT and the
fourth row has no density block, which flips the Schur unknown to dTheta).
Eliminating the transport rows with the exact W3 inverses and the velocity
row with the lumped (or exact) inverse of calM2 = M_2R - G_T B_T^-1 A_T
yields a Helmholtz equation for dPi (dTheta for the original flux form);
back-substitution then recovers the remaining increments.

Viscous/penalty stabilisation enters M_2R; its thermodynamic jump form adds
to B_T, whose inverse inside the reduction keeps only the diagonal (the
facet coupling is dropped, which accounts for the stiffness without
spoiling the cellwise elimination).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import assembly
from .linsolve import (ApproxInverse, LinearSolveError, LinearSolverCfg,
                       condition_number, dense_solve, gmres)
from .residuals import StabConfig
from .state import (FLUX_NEW, FLUX_ORIG, MATERIAL_CP, MATERIAL_LORENZ,
                    State, check_formulation)


def _dot(A, B):
    """Matrix product tolerant of mixed sparse/dense operands; never returns
    np.matrix."""
    out = A @ B
    if isinstance(out, np.matrix):
        out = np.asarray(out)
    return out


def _add(A, B):
    out = A + B
    if isinstance(out, np.matrix):
        out = np.asarray(out)
    return out


def _scale_rows(vec, M):
    if sp.issparse(M):
        return sp.diags(vec) @ M
    return vec[:, None] * M


@dataclass
class BlockJacobian:
    formulation: str
    dt: float
    exact_inverse: bool
    M2R: object                  # active W2 velocity block incl. stabilisation
    inv_m2: ApproxInverse        # plain W2 mass inverse (grad~Pi, D_u)
    grad_pi: np.ndarray          # lumped/exact approximate Exner gradient
    G_T: object                  # [u, thermo] block, active rows
    G_Pi: object                 # [u, Pi] block, active rows
    A_T: object                  # [thermo, u] block, active cols
    D_u: object                  # [rho, u] transport block, active cols
    C_rho_diag: Optional[np.ndarray]
    C_T: object                  # diag vector (W3 thermo) or csr (CP)
    C_Pi_diag: np.ndarray
    M3_diag: np.ndarray
    thermo_diag: Optional[np.ndarray]   # diag of B_T (W3 formulations)
    calM_inv: ApproxInverse      # inverse of the composite velocity mass
    Mtheta_inv: Optional[ApproxInverse] = None   # CP only
    M2R_inv: Optional[ApproxInverse] = None      # original flux form only
    Q_u: object = None                           # original flux form only
    D_T: object = None                           # original flux form only
    C_T_diag: Optional[np.ndarray] = None


def _check_positive_state(state):
    for name, v in (("rho", state.rho), ("thermo", state.thermo),
                    ("pi", state.pi)):
        if np.any(v <= 0.0):
            raise ValueError(f"nonpositive {name} at time level n")


def _lump_signed(rowsums, mass_rowsums, floor=0.05):
    """Signed row-sum lumping of a velocity-row composite.

    Buoyancy corrections flip the sign of the row sums wherever the state is
    convectively unstable (N^2 < 0, e.g. the upper flank of a warm bubble);
    the lumped inverse keeps that sign.  Rows whose sum nearly cancels fall
    back to the plain mass row sum, which bounds the inverse."""
    out = rowsums.copy()
    bad = np.abs(out) < floor * mass_rowsums
    out[bad] = mass_rowsums[bad]
    return ApproxInverse.from_diag_of(out)


def _velocity_inverse(ctx, base, stab_mat, dt, exact):
    """Approximate inverse of a velocity-row operator: row-sum lumping of the
    mass part plus the diagonal of the stabilisation part (whose row sums
    vanish on constants and would otherwise disappear)."""
    if stab_mat is not None:
        full = base + dt * stab_mat
    else:
        full = base
    if exact:
        return ApproxInverse.exact(full.tocsr())
    diag = np.asarray(base.sum(axis=1)).ravel()
    if stab_mat is not None:
        diag = diag + dt * stab_mat.diagonal()
    if np.any(diag <= 0.0):
        raise LinearSolveError("velocity-block lumping lost positivity")
    return ApproxInverse.from_diag_of(diag)


def assemble_jacobian_blocks(ctx, state_n, dt, stab=None, exact_inverse=False,
                             au_vertical_only=False):
    """Assemble the named blocks of one formulation's approximate Jacobian,
    frozen at state n.

    au_vertical_only restricts the transported-variable coupling block (the
    buoyancy contribution to the composite velocity operator) to vertical
    gradients and boundary integrals, a cheaper variant of the operator; off
    by default."""
    form = check_formulation(state_n.formulation)
    stab = stab or StabConfig()
    _check_positive_state(state_n)
    m = ctx.mesh
    fs = ctx.facets
    const = ctx.const
    kappa = const.kappa
    act = ctx.active
    V = ctx.M3_diag
    dt = float(dt)
    if dt <= 0.0:
        raise ValueError("dt must be positive")

    M2_act = ctx.M2
    inv_m2 = (ApproxInverse.exact(M2_act) if exact_inverse
              else ApproxInverse.lumped(M2_act))
    grad_pi = ctx.grad_pi(state_n.pi, inv_m2)

    M2rho = assembly.w2_mass(m, state_n.rho)[np.ix_(act, act)].tocsr()
    D_act = ctx.D
    D_u = 0.5 * dt * _dot(_dot(D_act, inv_m2.to_matrix()), M2rho)

    # stabilisation matrices entering the velocity block
    stab_mat = None
    if stab.u_m > 0.0:
        _, cip_jac = assembly.assemble_cip_penalty(
            m, np.ones(m.n_cells), stab.u_m, facets=fs)
        stab_mat = cip_jac[np.ix_(act, act)].tocsr()
    if stab.nu > 0.0:
        visc_u, visc_th = assembly.assemble_viscosity(m, stab.nu, facets=fs)
        vu = visc_u[np.ix_(act, act)].tocsr()
        stab_mat = vu if stab_mat is None else (stab_mat + vu).tocsr()
    else:
        visc_th = None

    C_Pi_diag = V / state_n.pi

    if form in (FLUX_NEW, MATERIAL_LORENZ, FLUX_ORIG):
        theta_n = (state_n.thermo / state_n.rho
                   if state_n.is_flux_form else state_n.thermo)
        thermo_diag = V.copy()
        if visc_th is not None:
            thermo_diag = thermo_diag + dt * visc_th.diagonal()

    au_fs = fs.horizontal_only() if (au_vertical_only and m.dim == 2) else fs

    if form == FLUX_NEW:
        eta_n = np.log(theta_n)
        G_T = (0.5 * dt) * assembly.gradpi_coupling(m, grad_pi, theta_n)[act, :]
        A_T = (0.5 * dt) * assembly.assemble_facet_form(
            m, "advection", coeff=eta_n, facets=au_fs)[:, act]
        C_rho_diag = -kappa * V / state_n.rho
        C_T_diag = -kappa * V
    elif form == MATERIAL_LORENZ:
        G_T = (0.5 * dt) * assembly.gradpi_coupling(
            m, grad_pi, np.ones(m.n_cells))[act, :]
        A_T = (0.5 * dt) * assembly.assemble_facet_form(
            m, "advection", coeff=theta_n, facets=au_fs)[:, act]
        C_rho_diag = -kappa * V / state_n.rho
        C_T_diag = -kappa * V / theta_n
    elif form == FLUX_ORIG:
        G_T = (0.5 * dt) * assembly.gradpi_coupling(
            m, grad_pi, 1.0 / state_n.rho)[act, :]
        Tdiv = assembly.assemble_facet_form(m, "theta_flux", coeff=theta_n,
                                            facets=fs)[:, act]
        D_T = 0.5 * dt * _dot(_dot(Tdiv, inv_m2.to_matrix()), M2rho)
        F_n = ctx.solve_m2(assembly.w2_mass(m, state_n.rho) @ state_n.u)
        Q_u = (0.5 * dt) * _orig_qu(ctx, theta_n, state_n.rho, F_n)
        C_rho_diag = None
        C_T_diag = -kappa * V / state_n.thermo
    else:  # material_cp
        G_T, A_T, C_T = _cp_blocks(ctx, state_n, dt, grad_pi)
        G_T = G_T[act, :]
        A_T = A_T[:, act]
        C_rho_diag = -kappa * V / state_n.rho
        C_T_diag = None
        thermo_diag = None

    G_Pi = _gpi_block(ctx, state_n, dt)[act, :]

    # composite velocity operator and its inverse
    if form == FLUX_ORIG:
        M2R_inv = _velocity_inverse(ctx, M2_act, stab_mat, dt, exact_inverse)
        calM_inv = M2R_inv
        C_T = C_T_diag
        blocks = BlockJacobian(
            formulation=form, dt=dt, exact_inverse=exact_inverse,
            M2R=(M2_act if stab_mat is None else M2_act + dt * stab_mat),
            inv_m2=inv_m2, grad_pi=grad_pi, G_T=G_T, G_Pi=G_Pi, A_T=None,
            D_u=D_u, C_rho_diag=C_rho_diag, C_T=C_T, C_Pi_diag=C_Pi_diag,
            M3_diag=V, thermo_diag=thermo_diag, calM_inv=calM_inv,
            M2R_inv=M2R_inv, Q_u=Q_u, D_T=D_T, C_T_diag=C_T_diag)
        return blocks

    if form == MATERIAL_CP:
        Mth_inv = (ApproxInverse.exact(ctx.Mtheta.tocsr()) if exact_inverse
                   else ApproxInverse.lumped(ctx.Mtheta))
        GBA = _dot(_dot(G_T, Mth_inv.to_matrix()), A_T)
        thermo_inv_repr = Mth_inv
    else:
        GBA = _dot(G_T, _scale_rows(1.0 / thermo_diag, A_T))
        thermo_inv_repr = None
        C_T = C_T_diag

    calM_base = _add(M2_act, -GBA)
    if sp.issparse(calM_base):
        calM_base = calM_base.tocsr()
    if exact_inverse:
        full = _add(calM_base, dt * stab_mat) if stab_mat is not None \
            else calM_base
        if not sp.issparse(full):
            full = sp.csr_matrix(full)
        calM_inv = ApproxInverse.exact(full.tocsr())
    else:
        diag = np.asarray(calM_base.sum(axis=1)).ravel()
        if stab_mat is not None:
            diag = diag + dt * stab_mat.diagonal()
        mass_rs = np.asarray(M2_act.sum(axis=1)).ravel()
        calM_inv = _lump_signed(diag, mass_rs)

    return BlockJacobian(
        formulation=form, dt=dt, exact_inverse=exact_inverse,
        M2R=(M2_act if stab_mat is None else M2_act + dt * stab_mat),
        inv_m2=inv_m2, grad_pi=grad_pi, G_T=G_T, G_Pi=G_Pi, A_T=A_T, D_u=D_u,
        C_rho_diag=C_rho_diag, C_T=C_T, C_Pi_diag=C_Pi_diag, M3_diag=V,
        thermo_diag=thermo_diag, calM_inv=calM_inv,
        Mtheta_inv=thermo_inv_repr, C_T_diag=C_T_diag)


def _orig_qu(ctx, theta_n, rho_n, F_n):
    """[Theta, rho] block of the original flux-form Jacobian: variation of
    the Theta facet flux through theta_bar = Theta_bar/rho_bar, transported
    by the frozen momentum F^n (scales with the velocity)."""
    m = ctx.mesh
    fs = ctx.facets
    a = theta_n / rho_n
    fn = F_n[fs.dof] * fs.meas
    rows = [fs.cp, fs.cp, fs.cm, fs.cm]
    cols = [fs.cp, fs.cm, fs.cp, fs.cm]
    vals = [0.5 * fn * a[fs.cp], 0.5 * fn * a[fs.cm],
            -0.5 * fn * a[fs.cp], -0.5 * fn * a[fs.cm]]
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m.n_cells, m.n_cells)).tocsr()


def _gpi_block(ctx, state_n, dt):
    """[u, Pi] block: the half-weighted Exner-gradient pairing at theta^n."""
    m = ctx.mesh
    if state_n.formulation == MATERIAL_CP:
        return _cp_gpi(ctx, state_n, dt)
    theta_n = (state_n.thermo / state_n.rho
               if state_n.is_flux_form else state_n.thermo)
    return (0.5 * dt) * assembly.assemble_facet_form(
        m, "exner_gradient", coeff=theta_n, facets=ctx.facets)


def _cp_gpi(ctx, state_n, dt):
    m = ctx.mesh
    fs = ctx.facets
    V = ctx.V
    thB, thT = ctx.wtheta_pair(state_n.thermo)
    th_avg = 0.5 * (thB + thT)
    rows, cols, vals = [], [], []
    cells = np.arange(m.n_cells)
    from .residuals import ctx_z_dofs
    rows += [ctx_z_dofs(ctx, "bot"), ctx_z_dofs(ctx, "top")]
    cols += [cells, cells]
    vals += [(0.5 * dt) * (V / m.cell_dz) * thB,
             -(0.5 * dt) * (V / m.cell_dz) * thT]
    if m.dim == 2:
        rows += [m.cell_vf_left, m.cell_vf_right]
        cols += [cells, cells]
        vals += [(0.5 * dt) * m.vf_measure * th_avg,
                 -(0.5 * dt) * m.vf_measure * th_avg]
        vf = np.nonzero(fs.vertical)[0]
        jB = state_n.thermo[m.cell_hf_bot[fs.cp[vf]]] \
            - state_n.thermo[m.cell_hf_bot[fs.cm[vf]]]
        jT = state_n.thermo[m.cell_hf_top[fs.cp[vf]]] \
            - state_n.thermo[m.cell_hf_top[fs.cm[vf]]]
        javg = 0.5 * (jB + jT)
        s = -(0.5 * dt) * fs.meas[vf] * javg * 0.5
        rows += [fs.dof[vf], fs.dof[vf]]
        cols += [fs.cp[vf], fs.cm[vf]]
        vals += [s, s]
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m.n_w2, m.n_cells)).tocsr()


def _cp_blocks(ctx, state_n, dt, grad_pi):
    """Charney-Phillips G_theta, A_theta_u and C_theta blocks."""
    m = ctx.mesh
    fs = ctx.facets
    V = ctx.V
    nth = ctx.space_wtheta.dof_count
    theta_n = state_n.thermo
    qp, qw = ctx.qp, ctx.qw

    # G_theta: (dt/2) int (v . grad~Pi) gamma
    gB, gT = None, None
    if m.dim == 2:
        gx0 = grad_pi[ctx.cell_w2x[0]]
        gx1 = grad_pi[ctx.cell_w2x[1]]
        gzB = grad_pi[ctx.cell_w2z[0]]
        gzT = grad_pi[ctx.cell_w2z[1]]
        botd, topd = m.cell_hf_bot, m.cell_hf_top
        xL, xR = m.cell_vf_left, m.cell_vf_right
        zB = m.n_vfacets + m.cell_hf_bot
        zT = m.n_vfacets + m.cell_hf_top
    else:
        cells = np.arange(m.n_cells)
        gzB, gzT = grad_pi[cells], grad_pi[cells + 1]
        botd, topd = cells, cells + 1
        zB, zT = cells, cells + 1
    rows, cols, vals = [], [], []
    # z-pair rows: int hat_a(z) g_z(z) hat_b(z), closed forms
    zz = {("B", "B"): (0.25, 1.0 / 12.0), ("B", "T"): (1.0 / 12.0, 1.0 / 12.0),
          ("T", "B"): (1.0 / 12.0, 1.0 / 12.0), ("T", "T"): (1.0 / 12.0, 0.25)}
    half = 0.5 * dt
    for (a, b), (cb, ct) in zz.items():
        r = zB if a == "B" else zT
        c = botd if b == "B" else topd
        rows.append(r)
        cols.append(c)
        vals.append(half * V * (cb * gzB + ct * gzT))
    if m.dim == 2:
        for r, w0, w1 in ((xL, 1.0 / 3.0, 1.0 / 6.0), (xR, 1.0 / 6.0, 1.0 / 3.0)):
            for c in (botd, topd):
                rows.append(r)
                cols.append(c)
                vals.append(half * V * 0.5 * (w0 * gx0 + w1 * gx1))
    G_T = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m.n_w2, nth)).tocsr()

    # A_theta_u: strong vertical derivative plus horizontal facet means
    dthz = ctx.wtheta_dz(theta_n)
    rows, cols, vals = [], [], []
    for r, wB, wT in ((botd, 1.0 / 3.0, 1.0 / 6.0), (topd, 1.0 / 6.0, 1.0 / 3.0)):
        for c, w in ((zB, wB), (zT, wT)):
            rows.append(r)
            cols.append(c)
            vals.append(half * V * dthz * w)
    if m.dim == 2:
        vf = np.nonzero(fs.vertical)[0]
        cmB = m.cell_hf_bot[fs.cm[vf]]
        cmT = m.cell_hf_top[fs.cm[vf]]
        cpB = m.cell_hf_bot[fs.cp[vf]]
        cpT = m.cell_hf_top[fs.cp[vf]]
        jB = theta_n[cpB] - theta_n[cmB]
        jT = theta_n[cpT] - theta_n[cmT]
        sB = half * fs.meas[vf] * (jB / 3.0 + jT / 6.0) * 0.5
        sT = half * fs.meas[vf] * (jB / 6.0 + jT / 3.0) * 0.5
        for r, s in ((cmB, sB), (cpB, sB), (cmT, sT), (cpT, sT)):
            rows.append(r)
            cols.append(fs.dof[vf])
            vals.append(s)
    A_T = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nth, m.n_w2)).tocsr()

    # C_theta: -(R/c_v) int chi gamma / theta^n by the same quadrature as the
    # equation-of-state residual
    thq = ctx.wtheta_at_q(theta_n)      # (nc, nq)
    cells = np.arange(m.n_cells)
    rows, cols, vals = [], [], []
    for b, col in ((0, botd), (1, topd)):
        hat = (1 - qp) if b == 0 else qp
        integ = ((hat / thq) * qw[None, :]).sum(axis=1)
        rows.append(cells)
        cols.append(col)
        vals.append(-ctx.const.kappa * V * integ)
    C_T = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m.n_cells, nth)).tocsr()
    return G_T, A_T, C_T


# ---------------------------------------------------------------------------
# Helmholtz systems

@dataclass
class Increments:
    d_u: np.ndarray        # full W2 layout, eliminated dofs zero
    d_rho: np.ndarray
    d_thermo: np.ndarray   # d_eta, d_Theta or d_theta per formulation
    d_pi: np.ndarray


class HelmholtzSystem:
    """Schur-reduced operator for one formulation's pressure (or Theta)
    increment: matrix-free action, lazily assembled form, right-hand-side
    builder and back-substitution closures.  Immutable once built."""

    def __init__(self, ctx, blocks):
        self.ctx = ctx
        self.blocks = blocks
        self.formulation = blocks.formulation
        self.unknown = "theta" if blocks.formulation == FLUX_ORIG else "pi"
        self._assembled = None
        b = blocks
        if self.formulation == FLUX_ORIG:
            # S = G_Theta - G_Pi C_Pi^-1 C_Theta,  W = D_Theta - Q_u M3^-1 D_u
            self._S = _add(b.G_T, -_dot(b.G_Pi,
                                        sp.diags(b.C_T_diag / b.C_Pi_diag)))
            self._W = _add(b.D_T,
                           -_dot(_dot(b.Q_u, sp.diags(1.0 / b.M3_diag)), b.D_u))
        else:
            if self.formulation == MATERIAL_CP:
                CB = _dot(b.C_T, b.Mtheta_inv.to_matrix())     # nc x ntheta
                self._K = _add(_scale_rows(b.C_rho_diag / b.M3_diag, b.D_u),
                               _dot(CB, b.A_T))
                self._CB = CB
            else:
                cb = b.C_T / b.thermo_diag                      # diag vector
                self._K = _add(_scale_rows(b.C_rho_diag / b.M3_diag, b.D_u),
                               _scale_rows(cb, b.A_T))
                self._CB = cb

    # -- operator action -----------------------------------------------------

    def apply(self, v):
        b = self.blocks
        if self.formulation == FLUX_ORIG:
            return b.thermo_diag * v - np.ravel(
                self._W @ b.calM_inv.dot(np.ravel(self._S @ v)))
        return b.C_Pi_diag * v + np.ravel(
            self._K @ b.calM_inv.dot(np.ravel(b.G_Pi @ v)))

    def assembled(self):
        if self._assembled is None:
            b = self.blocks
            Minv = b.calM_inv.to_matrix()
            if self.formulation == FLUX_ORIG:
                H = _add(sp.diags(b.thermo_diag),
                         -_dot(_dot(self._W, Minv), self._S))
            else:
                H = _add(sp.diags(b.C_Pi_diag),
                         _dot(_dot(self._K, Minv), b.G_Pi))
            self._assembled = H.tocsr() if sp.issparse(H) else np.asarray(H)
        return self._assembled

    def diag(self):
        A = self.assembled()
        return A.diagonal() if sp.issparse(A) else np.diag(A).copy()

    # -- right-hand side and back-substitution --------------------------------

    def _r_u_act(self, res):
        return res.r_u[self.ctx.active]

    def rhs(self, res):
        b = self.blocks
        if self.formulation == FLUX_ORIG:
            ru = self._r_u_act(res)
            t = ru - b.G_Pi @ (res.r_pi / b.C_Pi_diag)
            return (-res.r_thermo + b.Q_u @ (res.r_rho / b.M3_diag)
                    + self._W @ b.calM_inv.dot(t))
        r_T = res.r_eta if self.formulation == FLUX_NEW else res.r_thermo
        ru_p = self._r_u_act(res) - self._gt_binv(r_T)
        out = -res.r_pi + b.C_rho_diag * (res.r_rho / b.M3_diag)
        out = out + self._cb_dot(r_T)
        return out - self._K @ b.calM_inv.dot(ru_p)

    def _gt_binv(self, r_T):
        b = self.blocks
        if self.formulation == MATERIAL_CP:
            return b.G_T @ b.Mtheta_inv.dot(r_T)
        return b.G_T @ (r_T / b.thermo_diag)

    def _cb_dot(self, r_T):
        b = self.blocks
        if self.formulation == MATERIAL_CP:
            return self._CB @ r_T
        return self._CB * r_T

    def back_substitute(self, res, delta):
        """Remaining increments from the Helmholtz unknown."""
        ctx = self.ctx
        b = self.blocks
        if self.formulation == FLUX_ORIG:
            d_thermo = delta
            d_pi = -(res.r_pi + b.C_T_diag * d_thermo) / b.C_Pi_diag
            du_act = -b.M2R_inv.dot(self._r_u_act(res) + b.G_T @ d_thermo
                                    + b.G_Pi @ d_pi)
            d_rho = -(res.r_rho + b.D_u @ du_act) / b.M3_diag
            return Increments(ctx.extend(du_act), d_rho, d_thermo, d_pi)
        d_pi = delta
        r_T = res.r_eta if self.formulation == FLUX_NEW else res.r_thermo
        ru_p = self._r_u_act(res) - self._gt_binv(r_T)
        du_act = -b.calM_inv.dot(ru_p + b.G_Pi @ d_pi)
        if self.formulation == MATERIAL_CP:
            d_thermo = -b.Mtheta_inv.dot(res.r_thermo + b.A_T @ du_act)
        else:
            d_thermo = -(r_T + b.A_T @ du_act) / b.thermo_diag
        d_rho = -(res.r_rho + b.D_u @ du_act) / b.M3_diag
        return Increments(ctx.extend(du_act), d_rho, d_thermo, d_pi)


def build_helmholtz(ctx, blocks):
    for name in ("G_Pi", "D_u"):
        if getattr(blocks, name) is None:
            raise ValueError(f"missing block {name}")
    return HelmholtzSystem(ctx, blocks)


def solve_increments(helm, res, lin_cfg=None, direct=None):
    """Solve the Helmholtz system and back-substitute.

    direct=None picks a dense direct solve whenever the assembled operator is
    small (all 1D studies) and preconditioned matrix-free GMRES otherwise.
    Returns (Increments, iteration_count).
    """
    rhs = helm.rhs(res)
    n = rhs.size
    if direct is None:
        direct = n <= 2500
    if direct:
        A = helm.assembled()
        if sp.issparse(A):
            A = A.toarray()
        delta = dense_solve(A, rhs)
        iters = 0
    else:
        cfg = lin_cfg or LinearSolverCfg()
        delta, iters, _res = gmres(helm.apply, rhs, cfg,
                                   precond_diag=helm.diag())
    return helm.back_substitute(res, delta), iters


def recover_prognostics(formulation, state_prev, incs):
    """Advance one Newton iterate from its increments.

    The new flux form updates the density weighted potential temperature
    through the entropy: theta^(k-1) from the rho-weighted projection,
    eta^k = log theta^(k-1) + d_eta pointwise, Theta^k = rho^k exp(eta^k);
    every other formulation is a plain additive update."""
    check_formulation(formulation)
    u = state_prev.u + incs.d_u
    rho = state_prev.rho + incs.d_rho
    pi = state_prev.pi + incs.d_pi
    if formulation == FLUX_NEW:
        theta_prev = state_prev.thermo / state_prev.rho
        eta = np.log(theta_prev) + incs.d_thermo
        with np.errstate(over="raise"):
            thermo = rho * np.exp(eta)
    else:
        thermo = state_prev.thermo + incs.d_thermo
    return State(formulation, u, rho, thermo, pi)


def helmholtz_condition_number(helm, dense_limit=2000):
    return condition_number(helm.assembled(), dense_limit=dense_limit)
