import numpy as np
import pytest
import sympy

from eulerslice import assembly
from eulerslice.assembly import (FacetSet, assemble_cip_penalty,
                                 assemble_facet_form, assemble_viscosity,
                                 divergence, lump_inverse, lumped_diag,
                                 w0_mass, w2_mass, w3_mass, wtheta_mass)
from eulerslice.mesh import build_mesh

import oracles


def test_w3_mass_unweighted(mesh1d_100):
    M = w3_mass(mesh1d_100)
    assert np.allclose(M.diagonal(), 300.0)
    assert M.nnz == 100


def test_w3_mass_weighted(mesh1d_100, rng):
    rho = rng.uniform(0.5, 1.5, 100)
    M = w3_mass(mesh1d_100, rho)
    assert np.allclose(M.diagonal(), 300.0 * rho)


def test_w2_mass_1d_sympy_oracle(mesh1d_100):
    # hat-function products integrated symbolically
    z, h = sympy.symbols("z h", positive=True)
    diag_int = sympy.integrate((z / h) ** 2, (z, 0, h)) * 2
    off_int = sympy.integrate((z / h) * (1 - z / h), (z, 0, h))
    h_val = 300.0
    M = w2_mass(mesh1d_100).toarray()
    assert M[50, 50] == pytest.approx(float(diag_int.subs(h, h_val)))
    assert M[50, 50] == pytest.approx(200.0)
    assert M[50, 51] == pytest.approx(float(off_int.subs(h, h_val)))
    assert M[50, 51] == pytest.approx(50.0)


@pytest.mark.parametrize("fixture", ["mesh1d_small", "mesh2d_small", "mesh2d_open"])
def test_mass_matrices_match_oracle(fixture, request, rng):
    m = request.getfixturevalue(fixture)
    w = rng.uniform(0.5, 2.0, m.n_cells)
    assert np.allclose(w2_mass(m, w).toarray(), oracles.oracle_mass(m, "W2", w),
                       atol=1e-12)
    assert np.allclose(w3_mass(m, w).toarray(), oracles.oracle_mass(m, "W3", w),
                       atol=1e-12)
    assert np.allclose(wtheta_mass(m, w).toarray(),
                       oracles.oracle_mass(m, "Wtheta", w), atol=1e-12)
    if m.dim == 2:
        assert np.allclose(w0_mass(m, w).toarray(),
                           oracles.oracle_mass(m, "W0", w), atol=1e-12)


def test_mass_symmetry_and_pd(mesh2d_small, rng):
    w = rng.uniform(0.5, 2.0, mesh2d_small.n_cells)
    M = w2_mass(mesh2d_small, w).toarray()
    assert np.max(np.abs(M - M.T)) < 1e-14
    evals = np.linalg.eigvalsh(M)
    assert evals.min() > 0.0


def test_divergence_1d(mesh1d_100):
    D = divergence(mesh1d_100).toarray()
    assert D[10, 10] == -1.0 and D[10, 11] == 1.0
    u = np.full(101, 3.7)
    assert np.allclose(D @ u, 0.0)


def test_divergence_2d_row_pattern(mesh2d_small):
    m = mesh2d_small
    D = divergence(m).toarray()
    assert np.allclose(D, oracles.oracle_divergence(m), atol=1e-12)
    c = 3
    row = D[c]
    assert row[m.cell_vf_left[c]] == -m.vf_measure
    assert row[m.cell_vf_right[c]] == m.vf_measure
    assert row[m.n_vfacets + m.cell_hf_bot[c]] == -m.hf_measure
    assert row[m.n_vfacets + m.cell_hf_top[c]] == m.hf_measure
    # unit outward fluxes: -left, +right, -bottom, +top dofs
    u = np.zeros(m.n_w2)
    u[m.cell_vf_left[c]] = -1.0
    u[m.cell_vf_right[c]] = 1.0
    u[m.n_vfacets + m.cell_hf_bot[c]] = -1.0
    u[m.n_vfacets + m.cell_hf_top[c]] = 1.0
    assert D[c] @ u == pytest.approx(2 * (m.vf_measure + m.hf_measure))


def test_facet_forms_match_oracle_1d(mesh1d_small, rng):
    m = mesh1d_small
    theta = rng.uniform(250.0, 350.0, m.n_cells)
    for kind in ("exner_gradient", "theta_flux", "advection"):
        A = assemble_facet_form(m, kind, coeff=theta).toarray()
        B = oracles.oracle_facet_form(m, kind, coeff=theta)
        assert np.max(np.abs(A - B)) < 1e-14 * max(1.0, np.abs(B).max())


@pytest.mark.parametrize("fixture", ["mesh2d_small", "mesh2d_open"])
def test_facet_forms_match_oracle_2d(fixture, request, rng):
    m = request.getfixturevalue(fixture)
    theta = rng.uniform(250.0, 350.0, m.n_cells)
    fs = FacetSet(m)
    c = 0.5 * np.sign(rng.standard_normal(fs.n))
    for kind in ("exner_gradient", "theta_flux", "advection"):
        A = assemble_facet_form(m, kind, coeff=theta, facets=fs).toarray()
        B = oracles.oracle_facet_form(m, kind, coeff=theta)
        assert np.max(np.abs(A - B)) < 1e-12 * np.abs(B).max()
    # upwinded variants of the adjoint pair
    for kind in ("exner_gradient", "theta_flux"):
        A = assemble_facet_form(m, kind, coeff=theta, c=c, facets=fs).toarray()
        B = oracles.oracle_facet_form(m, kind, coeff=theta, c=c)
        assert np.max(np.abs(A - B)) < 1e-12 * np.abs(B).max()
    J = assemble_facet_form(m, "jump_jump_w3", facets=fs).toarray()
    Jo = oracles.oracle_facet_form(m, "jump_jump_w3")
    assert np.max(np.abs(J - Jo)) < 1e-12 * np.abs(Jo).max()


def test_facet_form_zero_for_equal_coefficients(mesh1d_small):
    theta = np.full(mesh1d_small.n_cells, 300.0)
    A = assemble_facet_form(mesh1d_small, "advection", coeff=theta)
    assert A.nnz == 0 or np.max(np.abs(A.toarray())) == 0.0


def test_facet_form_unknown_kind(mesh1d_small):
    with pytest.raises(ValueError):
        assemble_facet_form(mesh1d_small, "nope", coeff=np.ones(4))


def test_lump_inverse(mesh1d_100):
    M = w2_mass(mesh1d_100)
    Mi = lump_inverse(M)
    d = Mi.diagonal()
    assert d[50] == pytest.approx(1.0 / 300.0)
    ones = np.ones(M.shape[0])
    assert np.max(np.abs(Mi @ (M @ ones) - ones)) < 1e-14
    import scipy.sparse as sp
    diagM = sp.diags(np.array([2.0, 4.0]))
    assert np.allclose(lump_inverse(diagM).diagonal(), [0.5, 0.25])
    with pytest.raises(ValueError):
        lump_inverse(sp.diags(np.array([1.0, -1.0])))


def _cip_value_oracle(m, fs, alpha, u_m, F):
    # direct facet-by-facet evaluation of the penalty quadratic form
    from eulerslice.mesh import gauss_rule
    val = 0.0
    p, w = gauss_rule(2)
    for i in range(fs.n):
        cm, cp = fs.cm[i], fs.cp[i]
        am = 0.5 * (alpha[cm] + alpha[cp])
        spc = fs.spacing[i]
        if fs.vertical[i]:
            div_m = (F[m.cell_vf_right[cm]] - F[m.cell_vf_left[cm]]) / m.cell_dx
            div_p = (F[m.cell_vf_right[cp]] - F[m.cell_vf_left[cp]]) / m.cell_dx
            tan_m = lambda t: (F[m.n_vfacets + m.cell_hf_bot[cm]] * (1 - t)
                               + F[m.n_vfacets + m.cell_hf_top[cm]] * t)
            tan_p = lambda t: (F[m.n_vfacets + m.cell_hf_bot[cp]] * (1 - t)
                               + F[m.n_vfacets + m.cell_hf_top[cp]] * t)
        else:
            div_m = (F[m.n_vfacets + m.cell_hf_top[cm]]
                     - F[m.n_vfacets + m.cell_hf_bot[cm]]) / m.cell_dz
            div_p = (F[m.n_vfacets + m.cell_hf_top[cp]]
                     - F[m.n_vfacets + m.cell_hf_bot[cp]]) / m.cell_dz
            tan_m = lambda t: (F[m.cell_vf_left[cm]] * (1 - t)
                               + F[m.cell_vf_right[cm]] * t)
            tan_p = lambda t: (F[m.cell_vf_left[cp]] * (1 - t)
                               + F[m.cell_vf_right[cp]] * t)
        val += u_m * am * spc ** 2 * fs.meas[i] * (div_p - div_m) ** 2
        if fs.vertical[i]:   # tangential penalty acts on vertical facets only
            for t, wt in zip(p, w):
                val += u_m * am * fs.meas[i] * wt * (tan_p(t) - tan_m(t)) ** 2
    return val


def test_cip_zero_cases(mesh2d_small, rng):
    m = mesh2d_small
    alpha = np.ones(m.n_cells)
    ev, jac = assemble_cip_penalty(m, alpha, 0.0)
    F = rng.standard_normal(m.n_w2)
    AF, val = ev(F)
    assert val == 0.0 and np.all(AF == 0.0)
    # globally constant field: zero penalty
    ev, _ = assemble_cip_penalty(m, alpha, 0.5)
    F = np.zeros(m.n_w2)
    F[:m.n_vfacets] = 2.0
    F[m.n_vfacets:] = -1.0
    AF, val = ev(F)
    # zero up to accumulation roundoff at the dx^2-scaled matrix magnitude
    assert abs(val) < 1e-9
    with pytest.raises(ValueError):
        assemble_cip_penalty(m, alpha, -1.0)


def test_cip_contraction_oracle(rng):
    m = build_mesh(2, 3, 3, 300.0, 300.0, periodic_x=True)
    fs = FacetSet(m)
    alpha = rng.uniform(0.8, 1.2, m.n_cells)
    F = rng.standard_normal(m.n_w2)
    ev, jac = assemble_cip_penalty(m, alpha, 0.5, facets=fs)
    AF, val = ev(F)
    assert val == pytest.approx(F @ AF, rel=1e-13)
    assert val == pytest.approx(_cip_value_oracle(m, fs, alpha, 0.5, F),
                                rel=1e-12)
    assert val >= 0.0
    J = jac.toarray()
    assert np.max(np.abs(J - J.T)) < 1e-12 * np.abs(J).max()


def test_viscosity_zero_and_errors(mesh2d_small):
    vu, vth = assemble_viscosity(mesh2d_small, 0.0)
    assert vu.nnz == 0 and vth.nnz == 0
    with pytest.raises(ValueError):
        assemble_viscosity(mesh2d_small, -1.0)


def test_viscosity_constant_field(mesh2d_small):
    vu, _ = assemble_viscosity(mesh2d_small, 75.0)
    F = np.zeros(mesh2d_small.n_w2)
    F[:mesh2d_small.n_vfacets] = 1.5
    F[mesh2d_small.n_vfacets:] = 0.7
    assert np.max(np.abs(vu @ F)) < 1e-12


def test_viscosity_theta_two_cell_entry():
    m = build_mesh(1, 1, 2, 1.0, 600.0)
    _, vth = assemble_viscosity(m, 75.0)
    A = vth.toarray()
    # one interior facet, spacing 300: entries +- 75/300 = 0.25 per unit measure
    assert A[0, 0] == pytest.approx(0.25)
    assert A[0, 1] == pytest.approx(-0.25)
    th = np.array([1.0, 2.0])
    e = th @ (A @ th)
    assert e == pytest.approx(0.25)


def test_viscosity_spd(mesh2d_small):
    vu, vth = assemble_viscosity(mesh2d_small, 75.0)
    for A in (vu.toarray(), vth.toarray()):
        assert np.max(np.abs(A - A.T)) < 1e-11
        evals = np.linalg.eigvalsh(A)
        assert evals.min() > -1e-10 * max(1.0, evals.max())


def test_assembly_bitwise_deterministic(mesh2d_small, rng):
    w = rng.uniform(0.5, 2.0, mesh2d_small.n_cells)
    A = w2_mass(mesh2d_small, w)
    B = w2_mass(mesh2d_small, w)
    assert np.array_equal(A.data, B.data)
    assert np.array_equal(A.indices, B.indices)
    F1 = assemble_facet_form(mesh2d_small, "advection", coeff=w)
    F2 = assemble_facet_form(mesh2d_small, "advection", coeff=w)
    assert np.array_equal(F1.data, F2.data)
