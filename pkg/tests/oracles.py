"""Brute-force quadrature oracles.

Everything here is computed the slow way: explicit Python loops over cells,
facets and quadrature points, with basis values taken from eval_basis and
dense linear algebra for projections.  Nothing is shared with the vectorised
assembly paths, so agreement is a genuine cross-check.
"""

import numpy as np

from eulerslice.mesh import W0, W2, W3, WTHETA, Space, eval_basis, gauss_rule


def cell_quad(mesh, nq=3):
    """[(ref_point, weight * cell_volume)] for one cell."""
    p, w = gauss_rule(nq)
    out = []
    if mesh.dim == 1:
        for a, wa in zip(p, w):
            out.append((np.array([a]), wa * mesh.cell_volume))
    else:
        for a, wa in zip(p, w):
            for b, wb in zip(p, w):
                out.append((np.array([a, b]), wa * wb * mesh.cell_volume))
    return out


def scalar_at(space, coeffs, cell, ref):
    vals, _ = eval_basis(space, cell, ref)
    dofs = space.cell_dofs(cell)
    return float(vals @ coeffs[dofs]) if vals.ndim == 1 else None


def w2_at(space, coeffs, cell, ref):
    vals, _ = eval_basis(space, cell, ref)
    dofs = space.cell_dofs(cell)
    if space.mesh.dim == 1:
        return float(vals @ coeffs[dofs])
    return vals.T @ coeffs[dofs]


def w2_div_at(space, coeffs, cell, ref):
    m = space.mesh
    vals, grads = eval_basis(space, cell, ref)
    dofs = space.cell_dofs(cell)
    if m.dim == 1:
        return float((grads[:, 0] / m.cell_dz) @ coeffs[dofs])
    div = grads[:, 0, 0] / m.cell_dx + grads[:, 1, 1] / m.cell_dz
    return float(div @ coeffs[dofs])


def oracle_mass(mesh, kind, weight=None, nq=3):
    space = Space(mesh, kind)
    n = space.dof_count
    M = np.zeros((n, n))
    quad = cell_quad(mesh, nq)
    for c in range(mesh.n_cells):
        dofs = space.cell_dofs(c)
        wc = 1.0 if weight is None else weight[c]
        for ref, wq in quad:
            vals, _ = eval_basis(space, c, ref)
            if vals.ndim == 2:
                loc = vals @ vals.T
            else:
                loc = np.outer(vals, vals)
            M[np.ix_(dofs, dofs)] += wc * wq * loc
    return M


def oracle_divergence(mesh, nq=3):
    sw2 = Space(mesh, W2)
    D = np.zeros((mesh.n_cells, sw2.dof_count))
    quad = cell_quad(mesh, nq)
    for c in range(mesh.n_cells):
        dofs = sw2.cell_dofs(c)
        for ref, wq in quad:
            vals, grads = eval_basis(sw2, c, ref)
            if mesh.dim == 1:
                div = grads[:, 0] / mesh.cell_dz
            else:
                div = grads[:, 0, 0] / mesh.cell_dx + grads[:, 1, 1] / mesh.cell_dz
            D[c, dofs] += wq * div
    return D


def facet_list(mesh):
    """[(w2dof, cm, cp, measure, vertical, ref_minus(t), ref_plus(t))] over
    interior facets; t in [0,1] parametrises the facet."""
    out = []
    if mesh.dim == 2:
        for f in range(mesh.n_vfacets):
            if not mesh.vf_interior[f]:
                continue
            out.append((f, mesh.vf_minus[f], mesh.vf_plus[f], mesh.vf_measure,
                        True,
                        lambda t: np.array([1.0, t]),
                        lambda t: np.array([0.0, t])))
        for f in range(mesh.n_hfacets):
            if not mesh.hf_interior[f]:
                continue
            out.append((mesh.n_vfacets + f, mesh.hf_minus[f], mesh.hf_plus[f],
                        mesh.hf_measure, False,
                        lambda t: np.array([t, 1.0]),
                        lambda t: np.array([t, 0.0])))
    else:
        for f in range(1, mesh.nz):
            out.append((f, f - 1, f, 1.0, False,
                        lambda t: np.array([1.0]),
                        lambda t: np.array([0.0])))
    return out


def _normal_component(mesh, vals, vertical):
    if mesh.dim == 1:
        return vals
    return vals[:, 0] if vertical else vals[:, 1]


def oracle_facet_form(mesh, kind, coeff=None, c=None, weight=None, nq=3):
    """Dense facet pairing matrices, facet-by-facet quadrature."""
    sw2 = Space(mesh, W2)
    nw2, nc = sw2.dof_count, mesh.n_cells
    p, w = gauss_rule(nq)
    shapes = {"exner_gradient": (nw2, nc), "theta_flux": (nc, nw2),
              "advection": (nc, nw2), "jump_jump_w3": (nc, nc)}
    M = np.zeros(shapes[kind])
    for idx, (dof, cm, cp, meas, vertical, rm, rp) in enumerate(facet_list(mesh)):
        cf = 0.0 if c is None else (c[idx] if np.ndim(c) else c)
        for t, wq in zip(p, w):
            # trace of the facet's own W2 basis normal component (both sides)
            vals_p, _ = eval_basis(sw2, cp, rp(t))
            dofs_p = list(sw2.cell_dofs(cp))
            vn = _normal_component(mesh, vals_p, vertical)[dofs_p.index(dof)]
            ds = wq * meas
            if kind == "jump_jump_w3":
                wf = 1.0 if weight is None else weight[idx]
                for (ci, si) in ((cp, 1.0), (cm, -1.0)):
                    for (cj, sj) in ((cp, 1.0), (cm, -1.0)):
                        M[ci, cj] += ds * wf * si * sj
                continue
            tm = coeff[cm]
            tp = coeff[cp]
            tup = 0.5 * (tp + tm) - cf * (tp - tm)
            if kind == "exner_gradient":
                M[dof, cp] += ds * vn * tup
                M[dof, cm] -= ds * vn * tup
            elif kind == "theta_flux":
                M[cp, dof] -= ds * vn * tup
                M[cm, dof] += ds * vn * tup
            elif kind == "advection":
                jc = tp - tm
                M[cp, dof] += ds * vn * jc * 0.5
                M[cm, dof] += ds * vn * jc * 0.5
    return M


def oracle_w3_projection(mesh, fn, nq=3):
    """Cell averages of an analytic function by quadrature."""
    out = np.zeros(mesh.n_cells)
    quad = cell_quad(mesh, nq)
    for c in range(mesh.n_cells):
        acc = 0.0
        for ref, wq in quad:
            x = mesh.cell_x0[c] + ref[0] * mesh.cell_dx if mesh.dim == 2 else 0.0
            z = mesh.cell_z0[c] + ref[-1] * mesh.cell_dz
            acc += wq * fn(x, z)
        out[c] = acc / mesh.cell_volume
    return out


# ---------------------------------------------------------------------------
# full residual oracle: slow, term-by-term quadrature with eval_basis

def _dense_w2_mass(mesh, weight=None, nq=3):
    return oracle_mass(mesh, W2, weight, nq)


def _w2_field(mesh, space, coeffs, cell, ref):
    return w2_at(space, coeffs, cell, ref)


def oracle_means(ctx, sn, sk, nq=3):
    """Diagnostic means by dense solves and quadrature (flux/material)."""
    import eulerslice.residuals as R
    mesh = ctx.mesh
    sw2 = Space(mesh, W2)
    act = ctx.active
    rho_b = 0.5 * (sn.rho + sk.rho)
    pi_b = 0.5 * (sn.pi + sk.pi)
    u_b = 0.5 * (sn.u + sk.u)
    quad = cell_quad(mesh, nq)

    # F_bar: dense active-mass solve of the Simpson rhs
    M2 = _dense_w2_mass(mesh)[np.ix_(act, act)]
    rhs = np.zeros(sw2.dof_count)
    for c in range(mesh.n_cells):
        dofs = sw2.cell_dofs(c)
        for ref, wq in quad:
            vals, _ = eval_basis(sw2, c, ref)
            un = _w2_field(mesh, sw2, sn.u, c, ref)
            uk = _w2_field(mesh, sw2, sk.u, c, ref)
            simp = (2 * sn.rho[c] * un + sn.rho[c] * uk
                    + sk.rho[c] * un + 2 * sk.rho[c] * uk) / 6.0
            if mesh.dim == 1:
                rhs[dofs] += wq * vals * simp
            else:
                rhs[dofs] += wq * (vals @ simp)
    F = np.zeros(sw2.dof_count)
    F[act] = np.linalg.solve(M2, rhs[act])

    # Phi_bar cellwise
    Phi = np.zeros(mesh.n_cells)
    for c in range(mesh.n_cells):
        acc = 0.0
        for ref, wq in quad:
            un = _w2_field(mesh, sw2, sn.u, c, ref)
            uk = _w2_field(mesh, sw2, sk.u, c, ref)
            z = mesh.cell_z0[c] + ref[-1] * mesh.cell_dz
            dots = (np.dot(un, un) + np.dot(un, uk) + np.dot(uk, uk)) / 6.0
            acc += wq * (dots + CONSTS.g * z)
        Phi[c] = acc / mesh.cell_volume

    q = None
    if mesh.dim == 2:
        sw0 = Space(mesh, W0)
        Mq = oracle_mass(mesh, W0, rho_b, nq)
        rq = np.zeros(sw0.dof_count)
        for c in range(mesh.n_cells):
            dofs = sw0.cell_dofs(c)
            for ref, wq in quad:
                vals, grads = eval_basis(sw0, c, ref)
                gx = grads[:, 0] / mesh.cell_dx
                gz = grads[:, 1] / mesh.cell_dz
                ub = _w2_field(mesh, sw2, u_b, c, ref)
                rq[dofs] += wq * (gx * ub[1] - gz * ub[0])
        p1, w1 = gauss_rule(nq)
        for c in range(mesh.n_cells):
            if mesh.cell_iz[c] == 0:
                dofs = sw0.cell_dofs(c)
                for t, wt in zip(p1, w1):
                    vals, _ = eval_basis(sw0, c, [t, 0.0])
                    ub = _w2_field(mesh, sw2, u_b, c, [t, 0.0])
                    rq[dofs] += -wt * mesh.cell_dx * vals * ub[0]
            if mesh.cell_iz[c] == mesh.nz - 1:
                dofs = sw0.cell_dofs(c)
                for t, wt in zip(p1, w1):
                    vals, _ = eval_basis(sw0, c, [t, 1.0])
                    ub = _w2_field(mesh, sw2, u_b, c, [t, 1.0])
                    rq[dofs] += wt * mesh.cell_dx * vals * ub[0]
        q = np.linalg.solve(Mq, rq)
    return rho_b, pi_b, u_b, F, Phi, q


CONSTS = None


def _setup_consts():
    global CONSTS
    from eulerslice.constants import CONST as C
    CONSTS = C


_setup_consts()


def oracle_flux_residual(ctx, sn, sk, dt, nq=3, upwind=False):
    """Brute-force evaluation of the flux-form residuals."""
    import eulerslice.residuals as R
    mesh = ctx.mesh
    sw2 = Space(mesh, W2)
    C = CONSTS
    rho_b, pi_b, u_b, F, Phi, q = oracle_means(ctx, sn, sk, nq)
    Th_b = 0.5 * (sn.thermo + sk.thermo)
    theta_b = Th_b / rho_b
    pi_star = R.energy_exact_pi_mean(sn.thermo, sk.thermo, const=C)
    quad = cell_quad(mesh, nq)

    M2 = _dense_w2_mass(mesh, nq=nq)
    r_u = M2 @ (sk.u - sn.u)
    # Bernoulli gradient: -dt int (div v) Phi
    D = oracle_divergence(mesh, nq)
    r_u -= dt * (D.T @ Phi)
    # vorticity term by quadrature
    if mesh.dim == 2:
        sw0 = Space(mesh, W0)
        for c in range(mesh.n_cells):
            dofs = sw2.cell_dofs(c)
            qdofs = sw0.cell_dofs(c)
            for ref, wq in quad:
                vals, _ = eval_basis(sw2, c, ref)
                qvals, _ = eval_basis(sw0, c, ref)
                qv = float(qvals @ q[qdofs])
                Fv = _w2_field(mesh, sw2, F, c, ref)
                qxF = np.array([qv * Fv[1], -qv * Fv[0]])
                r_u[dofs] += dt * wq * (vals @ qxF)
    # pressure facet terms and Theta flux
    r_rho = np.zeros(mesh.n_cells)
    r_th = np.zeros(mesh.n_cells)
    for c in range(mesh.n_cells):
        r_rho[c] += mesh.cell_volume * (sk.rho[c] - sn.rho[c])
        r_th[c] += mesh.cell_volume * (sk.thermo[c] - sn.thermo[c])
    r_rho += dt * (D @ F)
    for (dof, cm, cp, meas, vertical, rm, rp) in facet_list(mesh):
        Fn = F[dof]
        cf = 0.5 * np.sign(Fn) if upwind else 0.0
        tup = 0.5 * (theta_b[cp] + theta_b[cm]) - cf * (theta_b[cp] - theta_b[cm])
        r_u[dof] += dt * meas * tup * (pi_star[cp] - pi_star[cm])
        s = meas * Fn * tup
        r_th[cm] += dt * s
        r_th[cp] -= dt * s
    kap = C.R / C.c_v
    r_pi = mesh.cell_volume * (np.log(sk.pi) - kap * np.log(sk.thermo)
                               - kap * np.log(C.R / C.p_0) - np.log(C.c_p))
    mask = np.setdiff1d(np.arange(sw2.dof_count), ctx.active)
    r_u[mask] = 0.0
    return r_u, r_rho, r_th, r_pi


def oracle_material_residual(ctx, sn, sk, dt, nq=3):
    """Brute-force material-Lorenz residuals (c = 0)."""
    import eulerslice.residuals as R
    mesh = ctx.mesh
    sw2 = Space(mesh, W2)
    C = CONSTS
    rho_b, pi_b, u_b, F, Phi, q = oracle_means(ctx, sn, sk, nq)
    theta_b = 0.5 * (sn.thermo + sk.thermo)
    rhoPi = (2 * sn.rho * sn.pi + sn.rho * sk.pi + sk.rho * sn.pi
             + 2 * sk.rho * sk.pi) / 6.0
    thermo_simpson = (2 * sn.thermo * sn.pi + sn.thermo * sk.pi
                      + sk.thermo * sn.pi + 2 * sk.thermo * sk.pi) / 6.0
    PhiL = Phi + thermo_simpson
    beta = rhoPi / rho_b
    quad = cell_quad(mesh, nq)
    M2 = _dense_w2_mass(mesh, nq=nq)
    D = oracle_divergence(mesh, nq)
    r_u = M2 @ (sk.u - sn.u) - dt * (D.T @ PhiL)
    if mesh.dim == 2:
        sw0 = Space(mesh, W0)
        for c in range(mesh.n_cells):
            dofs = sw2.cell_dofs(c)
            qdofs = sw0.cell_dofs(c)
            for ref, wq in quad:
                vals, _ = eval_basis(sw2, c, ref)
                qvals, _ = eval_basis(sw0, c, ref)
                qv = float(qvals @ q[qdofs])
                Fv = _w2_field(mesh, sw2, F, c, ref)
                r_u[dofs] += dt * wq * (vals @ np.array([qv * Fv[1], -qv * Fv[0]]))
    r_rho = mesh.cell_volume * (sk.rho - sn.rho) + dt * (D @ F)
    r_th = mesh.cell_volume * (sk.thermo - sn.thermo)
    for (dof, cm, cp, meas, vertical, rm, rp) in facet_list(mesh):
        Fn = F[dof]
        jth = theta_b[cp] - theta_b[cm]
        bup = 0.5 * (beta[cp] + beta[cm])
        r_u[dof] += -dt * meas * bup * jth
        base = dt * meas * Fn * jth
        r_th[cp] += base * 0.5 / rho_b[cp]
        r_th[cm] += base * 0.5 / rho_b[cm]
    kap = C.R / C.c_v
    r_pi = mesh.cell_volume * (np.log(sk.pi) - kap * np.log(sk.rho)
                               - kap * np.log(sk.thermo)
                               - kap * np.log(C.R / C.p_0) - np.log(C.c_p))
    mask = np.setdiff1d(np.arange(Space(mesh, W2).dof_count), ctx.active)
    r_u[mask] = 0.0
    return r_u, r_rho, r_th, r_pi
