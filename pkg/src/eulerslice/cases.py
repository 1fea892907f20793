"""Benchmark cases: the balanced reference column with a thermal bubble, the
non-hydrostatic gravity wave, and the sinking-bubble density current.

Initial states are built so that the unperturbed background is an exact
discrete steady state of the bound formulation: the Exner pressure follows a
per-column facet recurrence ({{theta}} [[Pi]] = -g dz on the Lorenz grids,
theta_node [[Pi]] = -g dz on the Charney-Phillips grid) anchored at the
bottom-cell average of the analytic profile, and the density closes the
discrete equation of state.  For the density current the analytic Exner
profile is linear in z, so the recurrence reproduces the plain projection.

The thermal perturbations are applied at fixed Exner pressure (bubble and
density current, which keeps the equation of state exact at t = 0) or on top
of the paper-form density (gravity wave, whose 0.01 K perturbation makes the
difference negligible).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .constants import CONST
from .mesh import build_mesh, gauss_rule
from .residuals import StabConfig
from .state import (FLUX_NEW, MATERIAL_CP, FLUX_FORMS, State,
                    check_formulation)

CASE_NAMES = ("column1d_bubble", "gravity_wave", "density_current")


def appendix_profiles(z, constants=CONST):
    """Analytic vertical profiles of the balanced reference column.

    Returns (T, p, Pi, rho, theta) at heights z in [0, 30000] m.
    """
    c = constants
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0) or np.any(z > 30000.0):
        raise ValueError("z out of the 0..30000 m column")
    T_e, T_p, gamma = 310.0, 240.0, 0.005
    T_0 = 0.5 * (T_e + T_p)
    B = (T_e - T_p) / ((T_e + T_p) * T_p)
    Cc = 5.0 * (T_e - T_p) / (2.0 * T_e * T_p)
    D = np.cos(2 * np.pi / 9) ** 3 - 0.6 * np.cos(2 * np.pi / 9) ** 5
    E = (c.g * z / (2 * c.R * T_0)) ** 2
    tau1 = np.exp(gamma * z / T_0) / T_0 + B * (1 - 2 * E) * np.exp(-E)
    tau2 = Cc * (1 - 2 * E) * np.exp(-E)
    chi1 = (np.exp(gamma * z / T_0) - 1.0) / gamma + B * z * np.exp(-E)
    chi2 = Cc * z * np.exp(-E)
    T = 1.0 / (tau1 - tau2 * D)
    p = c.p_0 * np.exp(-c.g * chi1 / c.R + c.g * chi2 * D / c.R)
    Pi = c.c_p * (p / c.p_0) ** (c.R / c.c_p)
    rho = p / (c.R * T)
    theta = T * (c.p_0 / p) ** (c.R / c.c_p)
    return T, p, Pi, rho, theta


@dataclass
class CaseSpec:
    """One benchmark configuration; parameters default to the reported
    values and may be overridden."""
    name: str
    dim: int
    nx: int
    nz: int
    x_extent: float
    z_extent: float
    periodic_x: bool
    dt: float
    n_steps: int
    stab: StabConfig
    params: dict = field(default_factory=dict)

    def build_mesh(self):
        return build_mesh(self.dim, self.nx, self.nz, self.x_extent,
                          self.z_extent, self.periodic_x)


def case_spec(name, **overrides):
    if name == "column1d_bubble":
        spec = CaseSpec(name, 1, 1, 100, 1.0, 30000.0, False, 600.0, 800,
                        StabConfig(),
                        params={"bubble_amp": 10.0, "bubble_z": 4000.0,
                                "bubble_width": 1.0e-6})
    elif name == "gravity_wave":
        spec = CaseSpec(name, 2, 300, 10, 3.0e5, 1.0e4, True, 20.0, 150,
                        StabConfig(u_m=0.5),
                        params={"theta0": 300.0, "N_bv": 0.01, "a_c": 5.0e3,
                                "x_c": 1.0e5, "amp": 0.01, "u_mean": 20.0})
    elif name == "density_current":
        spec = CaseSpec(name, 2, 864, 108, 5.12e4, 6.4e3, True, 2.5, 360,
                        StabConfig(nu=75.0),
                        params={"theta0": 300.0, "x_c": 2.56e4, "z_c": 3000.0,
                                "x_r": 4000.0, "z_r": 2000.0, "amp": 7.5})
    else:
        raise ValueError(
            f"unknown case {name!r}; valid cases are " + ", ".join(CASE_NAMES))
    params = dict(spec.params)
    stab_kw = {}
    for k, v in overrides.items():
        if k in params:
            params[k] = v
        elif k in ("u_m", "nu"):
            stab_kw[k] = v
        elif hasattr(spec, k) and k not in ("name", "params", "stab"):
            spec = replace(spec, **{k: v})
        else:
            raise ValueError(f"unknown case parameter {k!r}")
    if stab_kw:
        cur = {"u_m": spec.stab.u_m, "nu": spec.stab.nu}
        cur.update(stab_kw)
        spec = replace(spec, stab=StabConfig(**cur))
    return replace(spec, params=params)


# ---------------------------------------------------------------------------
# projections and balance helpers

def project_w3(mesh, fn, nq=2):
    """Cell averages of fn(x, z) under the tensor Gauss rule."""
    p, w = gauss_rule(nq)
    out = np.zeros(mesh.n_cells)
    if mesh.dim == 1:
        for b, wb in zip(p, w):
            out += wb * fn(np.zeros(mesh.n_cells),
                           mesh.cell_z0 + b * mesh.cell_dz)
    else:
        for a, wa in zip(p, w):
            for b, wb in zip(p, w):
                out += wa * wb * fn(mesh.cell_x0 + a * mesh.cell_dx,
                                    mesh.cell_z0 + b * mesh.cell_dz)
    return out


def project_wtheta(mesh, fn, nq=2):
    """Exact L2 projection onto Wtheta (tridiagonal mass solves)."""
    from . import assembly
    import scipy.sparse.linalg as spla
    p, w = gauss_rule(nq)
    n = mesh.n_hfacets if mesh.dim == 2 else mesh.nz + 1
    rhs = np.zeros(n)
    if mesh.dim == 1:
        cells = np.arange(mesh.n_cells)
        bot, top = cells, cells + 1
        xs = np.zeros(mesh.n_cells)
    else:
        bot, top = mesh.cell_hf_bot, mesh.cell_hf_top
    for b, wb in zip(p, w):
        z = mesh.cell_z0 + b * mesh.cell_dz
        if mesh.dim == 1:
            vals = fn(xs, z)
        else:
            vals = np.zeros(mesh.n_cells)
            for a, wa in zip(p, w):
                vals += wa * fn(mesh.cell_x0 + a * mesh.cell_dx, z)
        np.add.at(rhs, bot, wb * mesh.cell_volume * (1 - b) * vals)
        np.add.at(rhs, top, wb * mesh.cell_volume * b * vals)
    M = assembly.wtheta_mass(mesh)
    return spla.spsolve(M.tocsc(), rhs)


def _bottom_cell_average(mesh, pi_fn, nq=3):
    p, w = gauss_rule(nq)
    out = 0.0
    for b, wb in zip(p, w):
        out += wb * pi_fn(b * mesh.cell_dz)
    return out


def balanced_pi_lorenz(mesh, theta_cells, pi_bottom):
    """Column recurrence {{theta}} [[Pi]] = -g dz, anchored per column at the
    given bottom-cell value (scalar or per-column array)."""
    nx, nz = mesh.nx, mesh.nz
    th = theta_cells.reshape(nx, nz)
    pi = np.empty_like(th)
    pi[:, 0] = pi_bottom
    gdz = CONST.g * mesh.cell_dz
    for j in range(1, nz):
        pi[:, j] = pi[:, j - 1] - 2.0 * gdz / (th[:, j - 1] + th[:, j])
    return pi.reshape(-1)


def balanced_pi_cp(mesh, theta_nodes, pi_bottom):
    """Charney-Phillips variant: theta_node [[Pi]] = -g dz."""
    nx, nz = mesh.nx, mesh.nz
    if mesh.dim == 2:
        th = theta_nodes.reshape(nx, nz + 1)
    else:
        th = theta_nodes.reshape(1, nz + 1)
    pi = np.empty((th.shape[0], nz))
    pi[:, 0] = pi_bottom
    gdz = CONST.g * mesh.cell_dz
    for j in range(1, nz):
        pi[:, j] = pi[:, j - 1] - gdz / th[:, j]
    return pi.reshape(-1)


def _eos_theta_of_pi(pi):
    """Theta from the equation of state at given Exner pressure."""
    c = CONST
    return (c.p_0 / c.R) * (pi / c.c_p) ** (c.c_v / c.R)


def _cp_log_theta_avg(ctx, theta_nodes):
    thq = ctx.wtheta_at_q(theta_nodes)
    return (np.log(thq) * ctx.qw[None, :]).sum(axis=1)


# ---------------------------------------------------------------------------
# initial states

def make_initial_state(spec, mesh, formulation, ctx=None, nq=2):
    """Initial State of one benchmark for one formulation.

    Needs a Discretization for the Charney-Phillips quadrature; one is built
    on demand when ctx is None.
    """
    check_formulation(formulation)
    if isinstance(spec, str):
        spec = case_spec(spec)
    if spec.name == "column1d_bubble":
        return _init_bubble(spec, mesh, formulation, ctx, nq)
    if spec.name == "gravity_wave":
        return _init_gravity_wave(spec, mesh, formulation, ctx, nq)
    if spec.name == "density_current":
        return _init_density_current(spec, mesh, formulation, ctx, nq)
    raise ValueError(f"unknown case {spec.name!r}")


def background_theta(spec, mesh, formulation=FLUX_NEW, nq=2):
    """Background potential temperature (cell field, or Wtheta for CP)."""
    fn = _background_theta_fn(spec)
    if formulation == MATERIAL_CP:
        return project_wtheta(mesh, fn, nq)
    return project_w3(mesh, fn, nq)


def _background_theta_fn(spec):
    if spec.name == "column1d_bubble":
        return lambda x, z: appendix_profiles(z)[4]
    if spec.name == "gravity_wave":
        p = spec.params
        s = p["N_bv"] ** 2 / CONST.g
        return lambda x, z: p["theta0"] * np.exp(s * z)
    return lambda x, z: spec.params["theta0"] * np.ones_like(np.asarray(z, float))


def perturbation_theta_fn(spec):
    p = spec.params
    if spec.name == "column1d_bubble":
        return lambda x, z: p["bubble_amp"] * np.exp(
            -p["bubble_width"] * (z - p["bubble_z"]) ** 2)
    if spec.name == "gravity_wave":
        H = spec.z_extent
        return lambda x, z: (p["amp"] * np.sin(np.pi * z / H)
                             / (1.0 + (x - p["x_c"]) ** 2 / p["a_c"] ** 2))
    def dc(x, z):
        r = np.sqrt(((x - p["x_c"]) / p["x_r"]) ** 2
                    + ((z - p["z_c"]) / p["z_r"]) ** 2)
        return np.where(r < 1.0, -p["amp"] * (1.0 + np.cos(np.pi * r)), 0.0)
    return dc


def _analytic_pi_fn(spec):
    if spec.name == "column1d_bubble":
        return lambda z: appendix_profiles(z)[2]
    if spec.name == "gravity_wave":
        p = spec.params
        s = p["N_bv"] ** 2 / CONST.g
        return lambda z: CONST.c_p + CONST.g ** 2 * (np.exp(-s * z) - 1.0) \
            / (p["theta0"] * p["N_bv"] ** 2)
    p = spec.params
    return lambda z: CONST.c_p * (1.0 - CONST.g * z / (CONST.c_p * p["theta0"]))


def _make_ctx(mesh, formulation, ctx, nq):
    if ctx is not None:
        return ctx
    from .discretization import Discretization
    return Discretization(mesh, formulation, nq=nq)


def _assemble_state(spec, mesh, formulation, ctx, nq, eos_consistent):
    """Shared construction: balanced Pi from the background, density from the
    equation of state, thermal perturbation per the case's rule."""
    c = CONST
    pi_fn = _analytic_pi_fn(spec)
    pert = perturbation_theta_fn(spec)
    pi_bottom = _bottom_cell_average(mesh, pi_fn)
    if formulation == MATERIAL_CP:
        ctx = _make_ctx(mesh, formulation, ctx, nq)
        th_bg = project_wtheta(mesh, _background_theta_fn(spec), nq)
        th_p = project_wtheta(mesh, pert, nq)
        theta = th_bg + th_p
        pi = balanced_pi_cp(mesh, th_bg, pi_bottom)
        log_th = _cp_log_theta_avg(ctx, theta if eos_consistent else th_bg)
        log_rho = ((c.c_v / c.R) * (np.log(pi) - np.log(c.c_p))
                   + np.log(c.p_0 / c.R) - log_th)
        rho = np.exp(log_rho)
        u = np.zeros(mesh.n_w2)
        return State(formulation, u, rho, theta, pi), th_bg
    th_bg = project_w3(mesh, _background_theta_fn(spec), nq)
    th_p = project_w3(mesh, pert, nq)
    theta_tot = th_bg + th_p
    pi = balanced_pi_lorenz(mesh, th_bg, pi_bottom)
    if eos_consistent:
        Theta = _eos_theta_of_pi(pi)
        rho = Theta / theta_tot
    else:
        rho = _eos_theta_of_pi(pi) / th_bg
        Theta = rho * theta_tot
    u = np.zeros(mesh.n_w2)
    thermo = Theta if formulation in FLUX_FORMS else theta_tot
    return State(formulation, u, rho, thermo, pi), th_bg


def _init_bubble(spec, mesh, formulation, ctx, nq):
    state, _ = _assemble_state(spec, mesh, formulation, ctx, nq,
                               eos_consistent=True)
    return state


def _init_density_current(spec, mesh, formulation, ctx, nq):
    state, _ = _assemble_state(spec, mesh, formulation, ctx, nq,
                               eos_consistent=True)
    return state


def _init_gravity_wave(spec, mesh, formulation, ctx, nq):
    state, _ = _assemble_state(spec, mesh, formulation, ctx, nq,
                               eos_consistent=True)
    u = np.zeros(mesh.n_w2)
    u[:mesh.n_vfacets] = spec.params["u_mean"]
    state.u = u
    return state
