"""Per-mesh discretisation context shared by residual evaluation, Jacobian
assembly and the time stepper.

Holds the fixed operators (mass matrices, divergence, facet tables,
quadrature tables, boundary-dof restriction) so per-step work only assembles
the coefficient-weighted pieces.  Immutable after construction; safe for
concurrent reads.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .constants import CONST
from .mesh import W0, W2, W3, WTHETA, Space, gauss_rule
from .state import MATERIAL_CP


class Discretization:
    def __init__(self, mesh, formulation, nq=2, constants=CONST):
        self.mesh = mesh
        self.formulation = formulation
        self.const = constants
        self.nq = nq

        self.space_w3 = Space(mesh, W3)
        self.space_w2 = Space(mesh, W2)
        self.space_wtheta = Space(mesh, WTHETA)
        self.space_w0 = Space(mesh, W0) if mesh.dim == 2 else None

        self.facets = assembly.FacetSet(mesh)
        self.V = mesh.cell_volume
        self.M3_diag = assembly.w3_mass_diag(mesh)

        self.active = mesh.w2_active()
        self.n_w2 = mesh.n_w2
        self.n_act = self.active.size
        self._act_lookup = -np.ones(self.n_w2, dtype=int)
        self._act_lookup[self.active] = np.arange(self.n_act)

        self.M2_full = assembly.w2_mass(mesh)
        self.M2 = self.M2_full[np.ix_(self.active, self.active)].tocsr()
        self._M2_lu = spla.splu(self.M2.tocsc())
        self.m2_rowsums = np.asarray(self.M2.sum(axis=1)).ravel()
        self.D_full = assembly.divergence(mesh)
        self.D = self.D_full[:, self.active].tocsr()

        if formulation == MATERIAL_CP:
            self.Mtheta = assembly.wtheta_mass(mesh)
            self._Mtheta_lu = spla.splu(self.Mtheta.tocsc())
        else:
            self.Mtheta = None

        # quadrature tables
        self.qp, self.qw = gauss_rule(nq)
        if mesh.dim == 2:
            # W0 basis and reference gradients at tensor quadrature points
            a = self.qp[:, None]      # xi
            b = self.qp[None, :]      # zeta
            self.w0_vals = np.stack([
                (1 - a) * (1 - b), a * (1 - b), (1 - a) * b, a * b])
            self.w0_gx = np.stack([
                -(1 - b) * np.ones_like(a), (1 - b) * np.ones_like(a),
                -b * np.ones_like(a), b * np.ones_like(a)]) / mesh.cell_dx
            self.w0_gz = np.stack([
                -(1 - a) * np.ones_like(b), -a * np.ones_like(b),
                (1 - a) * np.ones_like(b), a * np.ones_like(b)]) / mesh.cell_dz
            self.wq2 = self.qw[:, None] * self.qw[None, :]
            self.cell_verts = np.stack([
                mesh.cell_v00, mesh.cell_v10, mesh.cell_v01, mesh.cell_v11])
            self.cell_w2x = np.stack([mesh.cell_vf_left, mesh.cell_vf_right])
            self.cell_w2z = mesh.n_vfacets + np.stack(
                [mesh.cell_hf_bot, mesh.cell_hf_top])
        self.cell_wt = np.stack([mesh.cell_hf_bot, mesh.cell_hf_top]) \
            if mesh.dim == 2 else None

    # -- active-dof bookkeeping ---------------------------------------------

    def restrict(self, v_full):
        return v_full[self.active]

    def extend(self, v_act):
        out = np.zeros(self.n_w2)
        out[self.active] = v_act
        return out

    def zero_eliminated(self, v_full):
        out = np.zeros_like(v_full)
        out[self.active] = v_full[self.active]
        return out

    def solve_m2(self, rhs_full, lumped=False):
        """W2 mass solve on the active dofs, zero elsewhere.

        lumped=True divides by row sums instead, which the lumped solver mode
        applies to every intermediate inverse (diagnostic projections
        included) so the frozen transport blocks match the residual's own
        linearisation.
        """
        if lumped:
            return self.extend(rhs_full[self.active] / self.m2_rowsums)
        return self.extend(self._M2_lu.solve(rhs_full[self.active]))

    def solve_mtheta(self, rhs):
        return self._Mtheta_lu.solve(rhs)

    # -- field evaluation at tensor quadrature points -----------------------

    def w2_x_at_q(self, u):
        """x-component values, shape (n_cells, nq); constant in zeta."""
        uL = u[self.cell_w2x[0]]
        uR = u[self.cell_w2x[1]]
        return uL[:, None] * (1 - self.qp)[None, :] + uR[:, None] * self.qp[None, :]

    def w2_z_at_q(self, u):
        if self.mesh.dim == 2:
            uB = u[self.cell_w2z[0]]
            uT = u[self.cell_w2z[1]]
        else:
            c = np.arange(self.mesh.n_cells)
            uB, uT = u[c], u[c + 1]
        return uB[:, None] * (1 - self.qp)[None, :] + uT[:, None] * self.qp[None, :]

    def w0_at_q(self, q):
        """W0 field at tensor points, shape (n_cells, nq, nq)."""
        vals = q[self.cell_verts]          # (4, n_cells)
        return np.einsum("lc,lab->cab", vals, self.w0_vals)

    def wtheta_at_q(self, th):
        """Wtheta field at the zeta quadrature points, (n_cells, nq)."""
        if self.mesh.dim == 2:
            tB = th[self.cell_wt[0]]
            tT = th[self.cell_wt[1]]
        else:
            c = np.arange(self.mesh.n_cells)
            tB, tT = th[c], th[c + 1]
        return tB[:, None] * (1 - self.qp)[None, :] + tT[:, None] * self.qp[None, :]

    def wtheta_pair(self, th):
        if self.mesh.dim == 2:
            return th[self.cell_wt[0]], th[self.cell_wt[1]]
        c = np.arange(self.mesh.n_cells)
        return th[c], th[c + 1]

    def wtheta_dz(self, th):
        tB, tT = self.wtheta_pair(th)
        return (tT - tB) / self.mesh.cell_dz

    # -- common derived operators -------------------------------------------

    def grad_pi(self, pi, inv_m2):
        """Lumped/exact approximate Exner gradient -M2^-1 D^T pi (active)."""
        rhs = -(self.D.T @ pi)
        return self.extend(inv_m2.dot(rhs))

    def w2_kinetic_cells(self, a, b):
        return assembly.w2_cell_dot(self.mesh, a, b)
