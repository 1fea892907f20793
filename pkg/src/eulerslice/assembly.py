"""Sparse assembly of the lowest-order bilinear forms.

Everything here is exact for the piecewise-constant / lowest-order products
that appear in the discretisation: mass matrices use the closed-form hat
blocks [[1/3, 1/6], [1/6, 1/3]], divergence rows are signed facet measures,
and facet pairings reduce to jump/mean combinations of cell values.

Assembly is vectorised over cells and facets with a fixed ordering, so
repeated assembly of the same inputs is bitwise identical.

Sign conventions (global normals +x, +z; [[a]] = a+ - a-):
  exner_gradient  E(theta,c)[f, cell] : residual term  dt * E @ Pi_bar adds
                  (v.n) * (theta_up) * [[Pi]] per interior facet to R_u.
  theta_flux      T(theta,c)[cell, f] : residual term  dt * T @ F_bar adds
                  -(F.n) * theta_up * [[psi]] per facet to the W3 equation;
                  T(1, 0) acts like the divergence on flux-free boundaries.
  advection       A(a)[cell, f]       : (v.n) * [[a]] * {{psi}} pairing, the
                  linearised material transport of the cell field a.
  jump_jump_w3    J(w)[cell, cell']   : w_f * [[psi]][[phi]] facet penalty.
"""

import numpy as np
import scipy.sparse as sp

_HAT = np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])


def _csr(rows, cols, vals, shape):
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=shape,
    ).tocsr()
    m.sum_duplicates()
    return m


def _cell_weight(mesh, weight):
    if weight is None:
        return np.ones(mesh.n_cells)
    w = np.asarray(weight, dtype=float)
    if w.shape != (mesh.n_cells,):
        raise ValueError("weight must be a W3 coefficient vector")
    return w


# ---------------------------------------------------------------------------
# mass matrices

def w3_mass(mesh, weight=None):
    """Diagonal (weighted) W3 mass matrix."""
    w = _cell_weight(mesh, weight)
    return sp.diags(mesh.cell_volume * w).tocsr()


def w3_mass_diag(mesh, weight=None):
    return mesh.cell_volume * _cell_weight(mesh, weight)


def w2_pair_dofs(mesh):
    """(x-pair, z-pair) global W2 dofs per cell, each an (n_cells, 2) array."""
    if mesh.dim == 1:
        c = np.arange(mesh.n_cells)
        return None, np.stack([c, c + 1], axis=1)
    xp = np.stack([mesh.cell_vf_left, mesh.cell_vf_right], axis=1)
    zp = mesh.n_vfacets + np.stack([mesh.cell_hf_bot, mesh.cell_hf_top], axis=1)
    return xp, zp


def _pair_mass(pairs, scale, ndof):
    rows = [pairs[:, 0], pairs[:, 0], pairs[:, 1], pairs[:, 1]]
    cols = [pairs[:, 0], pairs[:, 1], pairs[:, 0], pairs[:, 1]]
    vals = [scale * _HAT[0, 0], scale * _HAT[0, 1],
            scale * _HAT[1, 0], scale * _HAT[1, 1]]
    return rows, cols, vals


def w2_mass(mesh, weight=None):
    """(Weighted) W2 mass matrix on the full dof set.

    The x- and z-component blocks decouple on rectangles, each reducing to
    hat-function products along its own direction.
    """
    w = _cell_weight(mesh, weight)
    scale = mesh.cell_volume * w
    xp, zp = w2_pair_dofs(mesh)
    rows, cols, vals = _pair_mass(zp, scale, mesh.n_w2)
    if xp is not None:
        r2, c2, v2 = _pair_mass(xp, scale, mesh.n_w2)
        rows += r2
        cols += c2
        vals += v2
    return _csr(rows, cols, vals, (mesh.n_w2, mesh.n_w2))


def wtheta_mass(mesh, weight=None):
    """(Weighted) Wtheta mass matrix (horizontal-facet dofs)."""
    w = _cell_weight(mesh, weight)
    scale = mesh.cell_volume * w
    zp = np.stack([mesh.cell_hf_bot, mesh.cell_hf_top], axis=1)
    n = mesh.n_hfacets if mesh.dim == 2 else mesh.nz + 1
    rows, cols, vals = _pair_mass(zp, scale, n)
    return _csr(rows, cols, vals, (n, n))


def w0_mass(mesh, weight=None):
    """(Weighted) bilinear vertex mass matrix (2D only)."""
    if mesh.dim != 2:
        raise ValueError("W0 mass requires a 2D mesh")
    w = _cell_weight(mesh, weight)
    scale = mesh.cell_volume * w
    verts = np.stack(
        [mesh.cell_v00, mesh.cell_v10, mesh.cell_v01, mesh.cell_v11], axis=1)
    # local (a, b) tensor index: a along x, b along z; order 00,10,01,11
    loc = [(0, 0), (1, 0), (0, 1), (1, 1)]
    rows, cols, vals = [], [], []
    for i, (ai, bi) in enumerate(loc):
        for j, (aj, bj) in enumerate(loc):
            rows.append(verts[:, i])
            cols.append(verts[:, j])
            vals.append(scale * (_HAT[ai, aj] * _HAT[bi, bj]))
    return _csr(rows, cols, vals, (mesh.n_vertices, mesh.n_vertices))


# ---------------------------------------------------------------------------
# divergence

def divergence(mesh):
    """D: W2 -> W3, rows are the signed facet fluxes of each cell."""
    cells = np.arange(mesh.n_cells)
    if mesh.dim == 1:
        rows = [cells, cells]
        cols = [cells, cells + 1]
        vals = [-np.ones(mesh.n_cells), np.ones(mesh.n_cells)]
        return _csr(rows, cols, vals, (mesh.n_cells, mesh.n_w2))
    dz, dx = mesh.vf_measure, mesh.hf_measure
    rows = [cells, cells, cells, cells]
    cols = [mesh.cell_vf_left, mesh.cell_vf_right,
            mesh.n_vfacets + mesh.cell_hf_bot, mesh.n_vfacets + mesh.cell_hf_top]
    vals = [np.full(mesh.n_cells, -dz), np.full(mesh.n_cells, dz),
            np.full(mesh.n_cells, -dx), np.full(mesh.n_cells, dx)]
    return _csr(rows, cols, vals, (mesh.n_cells, mesh.n_w2))


# ---------------------------------------------------------------------------
# interior facet tables

class FacetSet:
    """Flat arrays describing the interior facets (periodic ones included).

    dof      : W2 dof carrying the facet's normal flux
    cm, cp   : minus/plus adjacent cells (normal points from cm to cp)
    meas     : facet measure
    vertical : True for x-normal facets
    spacing  : cell spacing normal to the facet (dx or dz)
    """

    def __init__(self, mesh):
        dofs, cms, cps, meas, vert, spac = [], [], [], [], [], []
        if mesh.dim == 2:
            sel = np.nonzero(mesh.vf_interior)[0]
            dofs.append(sel)
            cms.append(mesh.vf_minus[sel])
            cps.append(mesh.vf_plus[sel])
            meas.append(np.full(sel.size, mesh.vf_measure))
            vert.append(np.ones(sel.size, dtype=bool))
            spac.append(np.full(sel.size, mesh.cell_dx))
        sel = np.nonzero(mesh.hf_interior)[0]
        dofs.append(mesh.w2_hf_dof(sel))
        cms.append(mesh.hf_minus[sel])
        cps.append(mesh.hf_plus[sel])
        meas.append(np.full(sel.size, mesh.hf_measure))
        vert.append(np.zeros(sel.size, dtype=bool))
        spac.append(np.full(sel.size, mesh.cell_dz))
        self.dof = np.concatenate(dofs)
        self.cm = np.concatenate(cms)
        self.cp = np.concatenate(cps)
        self.meas = np.concatenate(meas)
        self.vertical = np.concatenate(vert)
        self.spacing = np.concatenate(spac)
        self.n = self.dof.size
        self.mesh = mesh

    def mean(self, a):
        return 0.5 * (a[self.cp] + a[self.cm])

    def jump(self, a):
        return a[self.cp] - a[self.cm]

    def upwinded(self, a, c):
        """{{a}} - c [[a]] with the per-facet upwind parameter c."""
        mean = self.mean(a)
        if c is None:
            return mean
        return mean - c * self.jump(a)

    def upwind_c(self, flux):
        """c = sign(F.n)/2 per facet from a W2 flux vector (sign(0) = 0)."""
        return 0.5 * np.sign(flux[self.dof])

    def horizontal_only(self):
        """Subset containing only the z-normal facets (vertical gradients)."""
        out = object.__new__(FacetSet)
        sel = ~self.vertical
        for name in ("dof", "cm", "cp", "meas", "vertical", "spacing"):
            setattr(out, name, getattr(self, name)[sel])
        out.n = int(np.sum(sel))
        out.mesh = self.mesh
        return out


def upwind_c_from_flux(facets, F):
    return facets.upwind_c(F)


# ---------------------------------------------------------------------------
# facet pairings

def assemble_facet_form(mesh, kind, coeff=None, c=None, facets=None,
                        weight=None):
    """Assemble one of the named jump/mean facet pairings.

    kind = "exner_gradient" : W2 x W3, rows (v.n)*theta_up*[[.]]
    kind = "theta_flux"     : W3 x W2, rows -theta_up*[[psi]]*(F.n)
    kind = "advection"      : W3 x W2, rows (v.n)*[[coeff]]*{{psi}}
    kind = "jump_jump_w3"   : W3 x W3, facet penalty weight_f*[[psi]][[phi]]

    coeff is a W3 cell field where required; weight is a per-facet scalar
    array for jump_jump_w3; c is the per-facet upwind parameter (None = 0,
    only meaningful for the adjoint exner_gradient/theta_flux pair).
    """
    fs = facets if facets is not None else FacetSet(mesh)
    nc, nw2 = mesh.n_cells, mesh.n_w2
    if kind in ("exner_gradient", "theta_flux"):
        if coeff is None:
            raise ValueError(f"{kind} requires a W3 coefficient field")
        if c is not None and np.any(np.abs(c) > 0.5 + 1e-14):
            raise ValueError("upwind parameter must lie in [-1/2, 1/2]")
        tup = fs.upwinded(np.asarray(coeff, dtype=float), c)
        s = fs.meas * tup
        if kind == "exner_gradient":
            rows = [fs.dof, fs.dof]
            cols = [fs.cp, fs.cm]
            vals = [s, -s]
            return _csr(rows, cols, vals, (nw2, nc))
        rows = [fs.cp, fs.cm]
        cols = [fs.dof, fs.dof]
        vals = [-s, s]
        return _csr(rows, cols, vals, (nc, nw2))
    if kind == "advection":
        if coeff is None:
            raise ValueError("advection requires a W3 coefficient field")
        j = 0.5 * fs.meas * fs.jump(np.asarray(coeff, dtype=float))
        rows = [fs.cp, fs.cm]
        cols = [fs.dof, fs.dof]
        vals = [j, j]
        return _csr(rows, cols, vals, (nc, nw2))
    if kind == "jump_jump_w3":
        w = fs.meas if weight is None else fs.meas * np.asarray(weight)
        rows = [fs.cp, fs.cp, fs.cm, fs.cm]
        cols = [fs.cp, fs.cm, fs.cp, fs.cm]
        vals = [w, -w, -w, w]
        return _csr(rows, cols, vals, (nc, nc))
    raise ValueError(f"unknown facet form kind {kind!r}")


# ---------------------------------------------------------------------------
# lumping

def lump_inverse(M):
    """Row-sum lumped inverse as a diagonal matrix; exact on constants."""
    rs = np.asarray(M.sum(axis=1)).ravel()
    if np.any(rs <= 0.0):
        raise ValueError("lumping target has nonpositive row sums")
    return sp.diags(1.0 / rs).tocsr()


def lumped_diag(M):
    rs = np.asarray(M.sum(axis=1)).ravel()
    if np.any(rs <= 0.0):
        raise ValueError("lumping target has nonpositive row sums")
    return rs


# ---------------------------------------------------------------------------
# per-cell W2 helpers

def w2_cell_dot(mesh, a, b):
    """Per-cell integral of the dot product of two W2 coefficient vectors."""
    xp, zp = w2_pair_dofs(mesh)
    V = mesh.cell_volume

    def pair(p):
        a0, a1 = a[p[:, 0]], a[p[:, 1]]
        b0, b1 = b[p[:, 0]], b[p[:, 1]]
        return (2 * a0 * b0 + a0 * b1 + a1 * b0 + 2 * a1 * b1) / 6.0

    out = pair(zp)
    if xp is not None:
        out = out + pair(xp)
    return V * out


def gradpi_coupling(mesh, grad_pi, cell_weight):
    """W2 x W3 matrix with entries  weight_c * int_c v . grad_pi.

    grad_pi is a W2 coefficient vector (the lumped approximate Exner
    gradient); cell_weight is the W3 field multiplying the column's test
    function (theta^n, 1/rho^n or 1 depending on the formulation).
    """
    w = np.asarray(cell_weight, dtype=float)
    V = mesh.cell_volume
    xp, zp = w2_pair_dofs(mesh)
    cells = np.arange(mesh.n_cells)
    rows, cols, vals = [], [], []

    def pair(p):
        g0, g1 = grad_pi[p[:, 0]], grad_pi[p[:, 1]]
        v0 = V * w * (g0 / 3.0 + g1 / 6.0)
        v1 = V * w * (g0 / 6.0 + g1 / 3.0)
        rows.extend([p[:, 0], p[:, 1]])
        cols.extend([cells, cells])
        vals.extend([v0, v1])

    pair(zp)
    if xp is not None:
        pair(xp)
    return _csr(rows, cols, vals, (mesh.n_w2, mesh.n_cells))


# ---------------------------------------------------------------------------
# stabilisation forms

def _normal_deriv_stencils(mesh, fs):
    """Per-facet 3-dof stencil of [[grad(v).n]] (jump of the normal
    derivative of the normal component), constant along each facet."""
    if mesh.dim != 2:
        # 1D: jump of dv/dz across interior nodes; cell c spans nodes (c, c+1)
        h = mesh.cell_dz
        dofs = np.stack([fs.cm, fs.dof, fs.cp + 1], axis=1)
        coeff = np.stack([np.ones(fs.n), -2 * np.ones(fs.n), np.ones(fs.n)],
                         axis=1) / h
        return dofs, coeff
    dofs = np.empty((fs.n, 3), dtype=int)
    vert = fs.vertical
    iv = np.nonzero(vert)[0]
    ih = np.nonzero(~vert)[0]
    m = mesh
    dofs[iv, 0] = m.cell_vf_left[fs.cm[iv]]
    dofs[iv, 1] = fs.dof[iv]
    dofs[iv, 2] = m.cell_vf_right[fs.cp[iv]]
    dofs[ih, 0] = m.n_vfacets + m.cell_hf_bot[fs.cm[ih]]
    dofs[ih, 1] = fs.dof[ih]
    dofs[ih, 2] = m.n_vfacets + m.cell_hf_top[fs.cp[ih]]
    spacing = np.where(vert, m.cell_dx, m.cell_dz)
    coeff = np.stack([1.0 / spacing, -2.0 / spacing, 1.0 / spacing], axis=1)
    return dofs, coeff


def _tangential_jump_pairs(mesh, fs):
    """Per-facet (4 dofs, signs, z-locals) of the tangential trace jump."""
    if mesh.dim != 2:
        return None
    m = mesh
    vert = fs.vertical
    dofs = np.empty((fs.n, 4), dtype=int)
    iv = np.nonzero(vert)[0]
    ih = np.nonzero(~vert)[0]
    # vertical facet: tangent z, traces from the z-pair of each cell
    dofs[iv, 0] = m.n_vfacets + m.cell_hf_bot[fs.cm[iv]]
    dofs[iv, 1] = m.n_vfacets + m.cell_hf_top[fs.cm[iv]]
    dofs[iv, 2] = m.n_vfacets + m.cell_hf_bot[fs.cp[iv]]
    dofs[iv, 3] = m.n_vfacets + m.cell_hf_top[fs.cp[iv]]
    # horizontal facet: tangent x, traces from the x-pair of each cell
    dofs[ih, 0] = m.cell_vf_left[fs.cm[ih]]
    dofs[ih, 1] = m.cell_vf_right[fs.cm[ih]]
    dofs[ih, 2] = m.cell_vf_left[fs.cp[ih]]
    dofs[ih, 3] = m.cell_vf_right[fs.cp[ih]]
    return dofs


_TAN_SIGN = np.array([-1.0, -1.0, 1.0, 1.0])


def _facet_spd_form(mesh, fs, w_nrm, w_tan):
    """SPD W2 x W2 facet form  sum_f w_nrm [[grad v.n]][[grad w.n]]
    + w_tan [[v.t]][[w.t]]  with per-facet weights."""
    nw2 = mesh.n_w2
    rows, cols, vals = [], [], []
    dofs, coeff = _normal_deriv_stencils(mesh, fs)
    for i in range(3):
        for j in range(3):
            rows.append(dofs[:, i])
            cols.append(dofs[:, j])
            vals.append(w_nrm * fs.meas * coeff[:, i] * coeff[:, j])
    tj = _tangential_jump_pairs(mesh, fs)
    if tj is not None and w_tan is not None:
        for i in range(4):
            for j in range(4):
                hat = _HAT[i % 2, j % 2]
                rows.append(tj[:, i])
                cols.append(tj[:, j])
                vals.append(w_tan * fs.meas *
                            (_TAN_SIGN[i] * _TAN_SIGN[j] * hat))
    return _csr(rows, cols, vals, (nw2, nw2))


def assemble_cip_penalty(mesh, alpha_bar, u_m, facets=None):
    """Interior penalty on mass-flux gradient jumps and tangential jumps.

    Returns (evaluator, jacobian_matrix).  The evaluator maps a W2 vector F
    to (A(alpha) @ F, F . A(alpha) F); the quadratic form value equals the
    instantaneous energy-dissipation rate and is >= 0.  The Jacobian matrix
    is the linearised form without the inverse-density mean, ready to be
    scaled by dt and added to the velocity block.

    The tangential-jump part is restricted to vertical facets: it exists to
    suppress the Lorenz computational mode in the vertical velocity, and on
    horizontal facets it would instead damp the tangential jump of any
    sheared equilibrium mass flux rho(z) u (a hydrostatically balanced state
    is not smooth in that trace), producing a spurious secular drift.
    """
    if u_m < 0.0:
        raise ValueError("u_m must be nonnegative")
    alpha = np.asarray(alpha_bar, dtype=float)
    if np.any(alpha <= 0.0):
        raise ValueError("alpha_bar must be positive cellwise")
    fs = facets if facets is not None else FacetSet(mesh)
    am = fs.mean(alpha)
    dx2 = fs.spacing ** 2
    tan_mask = fs.vertical.astype(float) if mesh.dim == 2 else None
    wt = u_m * am * tan_mask if tan_mask is not None else None
    wtj = u_m * tan_mask if tan_mask is not None else None
    A = _facet_spd_form(mesh, fs, u_m * am * dx2, wt)
    jac = _facet_spd_form(mesh, fs, u_m * dx2, wtj)

    def evaluator(F):
        AF = A @ F
        return AF, float(F @ AF)

    return evaluator, jac


def assemble_viscosity(mesh, nu, facets=None):
    """Viscous forms: (momentum W2 x W2, potential-temperature W3 x W3).

    Momentum: nu grad v : grad u volume term plus tangential-jump and
    normal-derivative-jump facet terms; theta: (nu/dx) [[psi]][[phi]].
    Both are symmetric positive semidefinite.
    """
    if nu < 0.0:
        raise ValueError("nu must be nonnegative")
    fs = facets if facets is not None else FacetSet(mesh)
    nw2 = mesh.n_w2
    if nu == 0.0:
        z2 = sp.csr_matrix((nw2, nw2))
        z3 = sp.csr_matrix((mesh.n_cells, mesh.n_cells))
        return z2, z3

    # volume grad:grad of the divergence components
    xp, zp = w2_pair_dofs(mesh)
    V = mesh.cell_volume
    rows, cols, vals = [], [], []

    def pair(p, spacing):
        s = nu * V / spacing ** 2
        sg = np.array([-1.0, 1.0])
        for i in range(2):
            for j in range(2):
                rows.append(p[:, i])
                cols.append(p[:, j])
                vals.append(np.full(p.shape[0], s * sg[i] * sg[j]))

    pair(zp, mesh.cell_dz)
    if xp is not None:
        pair(xp, mesh.cell_dx)
    vol = _csr(rows, cols, vals, (nw2, nw2))

    fac = _facet_spd_form(mesh, fs, nu * fs.spacing,
                          nu / fs.spacing if mesh.dim == 2 else None)
    vtheta = assemble_facet_form(mesh, "jump_jump_w3", facets=fs,
                                 weight=nu / fs.spacing)
    return (vol + fac).tocsr(), vtheta
