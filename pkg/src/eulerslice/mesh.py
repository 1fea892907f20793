"""Structured rectangular meshes and lowest-order compatible function spaces.

The solver only ever needs uniform rectangular cells (1D columns or 2D
vertical slices), so reference-to-physical maps are diagonal scalings and all
facet normals follow the fixed global orientation (+x, +z).  Jumps across a
facet are [[a]] = a+ - a- with "+" the cell on the positive-normal side.

Spaces (all lowest order):
  W3     : one dof per cell, piecewise constant (density, Theta, Exner).
  W2     : dim=2 Raviart-Thomas on rectangles, one dof per facet holding the
           normal-component value; dim=1 continuous piecewise linear nodes.
  W0     : dim=2 continuous bilinear vertices (potential vorticity).
  Wtheta : one dof per horizontal facet, continuous piecewise linear in z and
           piecewise constant in x (the Charney-Phillips temperature space);
           identical to W2 in dim=1.

Cell, facet and vertex numbering is lexicographic (ix major, iz minor) and is
deterministic: two constructions of the same mesh produce identical maps.
"""

import numpy as np

W0, W2, W3, WTHETA = "W0", "W2", "W3", "Wtheta"
_KINDS = (W0, W2, W3, WTHETA)

# Gauss-Legendre rules on [0, 1]
_SQ3 = 1.0 / (2.0 * np.sqrt(3.0))
_SQ35 = 0.5 * np.sqrt(3.0 / 5.0)
_GAUSS = {
    1: (np.array([0.5]), np.array([1.0])),
    2: (np.array([0.5 - _SQ3, 0.5 + _SQ3]), np.array([0.5, 0.5])),
    3: (np.array([0.5 - _SQ35, 0.5, 0.5 + _SQ35]),
        np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])),
}


def gauss_rule(n):
    """Points and weights of the n-point Gauss-Legendre rule on [0, 1]."""
    if n not in _GAUSS:
        raise ValueError(f"unsupported quadrature order {n} (use 1, 2 or 3)")
    return _GAUSS[n]


class StructuredMesh:
    """Uniform rectangular mesh of a 1D column or a 2D vertical slice.

    Immutable after construction.  All index tables are numpy arrays so that
    assembly can gather/scatter without per-element Python loops.

    Facet tables use -1 for the missing neighbour of a boundary facet.  With
    periodic_x the vertical facets at the x extremes are identified, so every
    vertical facet is interior.
    """

    def __init__(self, dim, nx, nz, x_extent, z_extent, periodic_x=False):
        if dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if dim == 1:
            nx = 1
            periodic_x = False
            x_extent = 1.0  # unit horizontal extent; volumes are per metre
        if nx < 1 or nz < 1:
            raise ValueError("cell counts must be positive")
        if x_extent <= 0.0 or z_extent <= 0.0:
            raise ValueError("extents must be positive")

        self.dim = dim
        self.nx = int(nx)
        self.nz = int(nz)
        self.x_extent = float(x_extent)
        self.z_extent = float(z_extent)
        self.periodic_x = bool(periodic_x)
        self.cell_dx = self.x_extent / self.nx
        self.cell_dz = self.z_extent / self.nz
        self.n_cells = self.nx * self.nz
        self.cell_volume = self.cell_dx * self.cell_dz if dim == 2 else self.cell_dz

        ix = np.arange(self.nx)
        iz = np.arange(self.nz)
        self.cell_ix = np.repeat(ix, self.nz)
        self.cell_iz = np.tile(iz, self.nx)
        self.cell_x0 = self.cell_ix * self.cell_dx
        self.cell_z0 = self.cell_iz * self.cell_dz
        self.cell_zc = self.cell_z0 + 0.5 * self.cell_dz
        self.cell_xc = self.cell_x0 + 0.5 * self.cell_dx

        self._build_facets()

    def cell_index(self, ix, iz):
        return ix * self.nz + iz

    def _build_facets(self):
        nx, nz = self.nx, self.nz

        # horizontal facets (normal +z); f = ix*(nz+1) + iz, one column at a time
        self.n_hfacets = nx * (nz + 1)
        hf_ix = np.repeat(np.arange(nx), nz + 1)
        hf_iz = np.tile(np.arange(nz + 1), nx)
        minus = np.where(hf_iz > 0, hf_ix * nz + (hf_iz - 1), -1)
        plus = np.where(hf_iz < nz, hf_ix * nz + hf_iz, -1)
        self.hf_minus = minus
        self.hf_plus = plus
        self.hf_iz = hf_iz
        self.hf_ix = hf_ix
        self.hf_interior = (minus >= 0) & (plus >= 0)
        self.hf_measure = self.cell_dx if self.dim == 2 else 1.0

        # vertical facets (normal +x); only meaningful in 2D
        if self.dim == 2:
            if self.periodic_x:
                self.n_vfacets = nx * nz
                vf_ix = np.repeat(np.arange(nx), nz)
                vf_iz = np.tile(np.arange(nz), nx)
                vminus = ((vf_ix - 1) % nx) * nz + vf_iz
                vplus = vf_ix * nz + vf_iz
            else:
                self.n_vfacets = (nx + 1) * nz
                vf_ix = np.repeat(np.arange(nx + 1), nz)
                vf_iz = np.tile(np.arange(nz), nx + 1)
                vminus = np.where(vf_ix > 0, (vf_ix - 1) * nz + vf_iz, -1)
                vplus = np.where(vf_ix < nx, vf_ix * nz + vf_iz, -1)
            self.vf_minus = vminus
            self.vf_plus = vplus
            self.vf_ix = vf_ix
            self.vf_iz = vf_iz
            self.vf_interior = (vminus >= 0) & (vplus >= 0)
            self.vf_measure = self.cell_dz
        else:
            self.n_vfacets = 0
            self.vf_minus = np.empty(0, dtype=int)
            self.vf_plus = np.empty(0, dtype=int)
            self.vf_interior = np.empty(0, dtype=bool)
            self.vf_measure = 0.0

        # per-cell facet dofs
        cells = np.arange(self.n_cells)
        cix, ciz = self.cell_ix, self.cell_iz
        self.cell_hf_bot = cix * (nz + 1) + ciz
        self.cell_hf_top = cix * (nz + 1) + ciz + 1
        if self.dim == 2:
            if self.periodic_x:
                self.cell_vf_left = cix * nz + ciz
                self.cell_vf_right = ((cix + 1) % nx) * nz + ciz
            else:
                self.cell_vf_left = cix * nz + ciz
                self.cell_vf_right = (cix + 1) * nz + ciz
        else:
            self.cell_vf_left = np.full(self.n_cells, -1)
            self.cell_vf_right = np.full(self.n_cells, -1)

        # vertices (2D only); v = ix*(nz+1) + iz with periodic wrap in x
        if self.dim == 2:
            nvx = nx if self.periodic_x else nx + 1
            self.n_vertices = nvx * (nz + 1)
            right = (cix + 1) % nx if self.periodic_x else cix + 1
            self.cell_v00 = cix * (nz + 1) + ciz
            self.cell_v10 = right * (nz + 1) + ciz
            self.cell_v01 = cix * (nz + 1) + ciz + 1
            self.cell_v11 = right * (nz + 1) + ciz + 1
        else:
            self.n_vertices = nz + 1

        del cells

    # -- W2 dof layout: vertical facets first, then horizontal facets --------

    @property
    def n_w2(self):
        if self.dim == 2:
            return self.n_vfacets + self.n_hfacets
        return self.nz + 1

    def w2_hf_dof(self, hf):
        """Global W2 dof of a horizontal facet index (array friendly)."""
        if self.dim == 2:
            return self.n_vfacets + hf
        return hf

    def w2_active(self):
        """W2 dofs remaining after strong w = 0 at the bottom/top boundary."""
        if self.dim == 1:
            return np.arange(1, self.nz)
        mask = np.ones(self.n_w2, dtype=bool)
        bdry_h = ~self.hf_interior
        mask[self.n_vfacets + np.nonzero(bdry_h)[0]] = False
        if not self.periodic_x:
            mask[np.nonzero(~self.vf_interior)[0]] = False
        return np.nonzero(mask)[0]


def build_mesh(dim, nx, nz, x_extent, z_extent, periodic_x=False):
    """Validating constructor used by the rest of the package."""
    if dim == 1 and periodic_x:
        raise ValueError("periodic_x requires dim = 2")
    return StructuredMesh(dim, nx, nz, x_extent, z_extent, periodic_x)


class Space:
    """Degree-of-freedom map of one compatible space on a mesh."""

    def __init__(self, mesh, kind):
        if kind not in _KINDS:
            raise ValueError(f"unknown space kind {kind!r}")
        self.mesh = mesh
        self.kind = kind
        if kind == W3:
            self.dof_count = mesh.n_cells
        elif kind == W2:
            self.dof_count = mesh.n_w2
        elif kind == WTHETA:
            self.dof_count = mesh.n_hfacets if mesh.dim == 2 else mesh.nz + 1
        else:  # W0
            if mesh.dim == 1:
                raise ValueError("W0 is only built on 2D meshes")
            self.dof_count = mesh.n_vertices

    def n_local(self):
        m = self.mesh
        if self.kind == W3:
            return 1
        if self.kind == W2:
            return 4 if m.dim == 2 else 2
        if self.kind == WTHETA:
            return 2
        return 4

    def cell_dofs(self, cell):
        """Global dofs of the local basis on one cell (fixed local order)."""
        m = self.mesh
        if self.kind == W3:
            return np.array([cell])
        if self.kind == W2:
            if m.dim == 1:
                return np.array([cell, cell + 1])
            return np.array([
                m.cell_vf_left[cell],
                m.cell_vf_right[cell],
                m.n_vfacets + m.cell_hf_bot[cell],
                m.n_vfacets + m.cell_hf_top[cell],
            ])
        if self.kind == WTHETA:
            if m.dim == 1:
                return np.array([cell, cell + 1])
            return np.array([m.cell_hf_bot[cell], m.cell_hf_top[cell]])
        return np.array([
            m.cell_v00[cell], m.cell_v10[cell], m.cell_v01[cell], m.cell_v11[cell]
        ])


def build_dof_map(mesh, kind):
    return Space(mesh, kind)


def eval_basis(space, cell, ref_point):
    """Values and reference gradients of all local basis functions.

    ref_point lies in the reference cell [0,1]^dim.  For vector-valued W2 in
    2D the returned values have shape (4, 2) and gradients (4, 2, 2) indexed
    [local, component, ref-direction]; scalar spaces return (n_local,) values
    and (n_local, dim) gradients.  Physical gradients follow by dividing the
    reference directions by (cell_dx, cell_dz).
    """
    m = space.mesh
    if cell < 0 or cell >= m.n_cells:
        raise IndexError(f"cell index {cell} out of range")
    p = np.atleast_1d(np.asarray(ref_point, dtype=float))
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ValueError("ref_point outside the reference cell")

    if space.kind == W3:
        return np.array([1.0]), np.zeros((1, m.dim))

    if m.dim == 1:
        z = p[0]
        vals = np.array([1.0 - z, z])
        grads = np.array([[-1.0], [1.0]])
        return vals, grads  # W2 and Wtheta coincide in 1D

    xi, zeta = p[0], p[1]
    if space.kind == W2:
        vals = np.array([
            [1.0 - xi, 0.0],
            [xi, 0.0],
            [0.0, 1.0 - zeta],
            [0.0, zeta],
        ])
        grads = np.zeros((4, 2, 2))
        grads[0, 0, 0] = -1.0
        grads[1, 0, 0] = 1.0
        grads[2, 1, 1] = -1.0
        grads[3, 1, 1] = 1.0
        return vals, grads
    if space.kind == WTHETA:
        vals = np.array([1.0 - zeta, zeta])
        grads = np.array([[0.0, -1.0], [0.0, 1.0]])
        return vals, grads
    # W0 bilinear, local order (00, 10, 01, 11)
    vals = np.array([
        (1 - xi) * (1 - zeta), xi * (1 - zeta), (1 - xi) * zeta, xi * zeta
    ])
    grads = np.array([
        [-(1 - zeta), -(1 - xi)],
        [1 - zeta, -xi],
        [-zeta, 1 - xi],
        [zeta, xi],
    ])
    return vals, grads
