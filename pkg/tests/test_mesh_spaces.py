import numpy as np
import pytest

from eulerslice.mesh import (W0, W2, W3, WTHETA, Space, build_dof_map,
                             build_mesh, eval_basis, gauss_rule)


def test_1d_counts():
    m = build_mesh(1, 1, 100, 1.0, 30000.0)
    assert m.n_cells == 100
    assert m.cell_dz == pytest.approx(300.0)
    assert Space(m, W2).dof_count == 101
    assert Space(m, W3).dof_count == 100


def test_2d_periodic_counts():
    m = build_mesh(2, 300, 10, 3.0e5, 1.0e4, periodic_x=True)
    assert m.n_cells == 3000
    assert Space(m, W2).dof_count == 300 * 11 + 300 * 10
    assert Space(m, W0).dof_count == 300 * 11
    assert Space(m, WTHETA).dof_count == 300 * 11


def test_invalid_meshes():
    with pytest.raises(ValueError):
        build_mesh(2, 0, 5, 1.0, 1.0)
    with pytest.raises(ValueError):
        build_mesh(2, 5, 5, -1.0, 1.0)
    with pytest.raises(ValueError):
        build_mesh(1, 1, 5, 1.0, 1.0, periodic_x=True)
    with pytest.raises(ValueError):
        build_mesh(3, 2, 2, 1.0, 1.0)


def test_facet_adjacency_counts(mesh2d_small, mesh2d_open):
    m = mesh2d_small
    assert np.all(m.vf_interior)            # periodic: all vertical interior
    assert np.sum(m.hf_interior) == m.nx * (m.nz - 1)
    mo = mesh2d_open
    assert np.sum(~mo.vf_interior) == 2 * mo.nz


def test_w3_basis_trivial(mesh1d_small):
    s = Space(mesh1d_small, W3)
    vals, grads = eval_basis(s, 2, [0.3])
    assert vals.tolist() == [1.0]
    assert np.all(grads == 0.0)


def test_1d_hat_nodal(mesh1d_small):
    s = Space(mesh1d_small, W2)
    vals, _ = eval_basis(s, 1, [0.0])
    assert vals[0] == 1.0 and vals[1] == 0.0
    vals, _ = eval_basis(s, 1, [1.0])
    assert vals[0] == 0.0 and vals[1] == 1.0


def test_rt0_facet_flux_quadrature_oracle(mesh2d_small):
    # normal flux of an RT0 basis across its own facet integrates to the
    # facet length, checked with an independent 4-point Gauss rule
    m = mesh2d_small
    s = Space(m, W2)
    cell = 3
    dofs = s.cell_dofs(cell)
    pts, wts = np.polynomial.legendre.leggauss(4)
    pts = 0.5 * (pts + 1.0)
    wts = 0.5 * wts
    # right facet of the cell: trace at xi=1, normal +x, measure dz
    acc = 0.0
    for t, w in zip(pts, wts):
        vals, _ = eval_basis(s, cell, [1.0, t])
        acc += w * m.cell_dz * vals[1, 0]
    assert acc == pytest.approx(m.cell_dz, rel=1e-14)
    # and zero normal flux across the other three facets
    vals, _ = eval_basis(s, cell, [0.0, 0.5])
    assert vals[1, 0] == pytest.approx(0.0)      # left facet
    vals, _ = eval_basis(s, cell, [0.5, 0.0])
    assert vals[1, 1] == pytest.approx(0.0)      # bottom facet
    vals, _ = eval_basis(s, cell, [0.5, 1.0])
    assert vals[1, 1] == pytest.approx(0.0)      # top facet


def test_partition_of_unity(mesh2d_small):
    m = mesh2d_small
    for kind in (W0, W3):
        s = Space(m, kind)
        for ref in ([0.2, 0.7], [0.5, 0.5], [1.0, 0.0]):
            vals, _ = eval_basis(s, 0, ref)
            assert np.sum(vals) == pytest.approx(1.0, abs=1e-14)


def test_w2_normal_continuity(mesh2d_small):
    # normal component of every W2 basis agrees from both sides of every
    # interior facet
    m = mesh2d_small
    s = Space(m, W2)
    u = np.random.default_rng(0).standard_normal(s.dof_count)
    pts, _ = gauss_rule(2)
    for f in np.nonzero(m.vf_interior)[0]:
        cm, cp = m.vf_minus[f], m.vf_plus[f]
        for t in pts:
            vm, _ = eval_basis(s, cm, [1.0, t])
            vp, _ = eval_basis(s, cp, [0.0, t])
            um = vm[:, 0] @ u[s.cell_dofs(cm)]
            up = vp[:, 0] @ u[s.cell_dofs(cp)]
            assert abs(um - up) < 1e-14 * max(1.0, abs(um))
    for f in np.nonzero(m.hf_interior)[0]:
        cm, cp = m.hf_minus[f], m.hf_plus[f]
        for t in pts:
            vm, _ = eval_basis(s, cm, [t, 1.0])
            vp, _ = eval_basis(s, cp, [t, 0.0])
            um = vm[:, 1] @ u[s.cell_dofs(cm)]
            up = vp[:, 1] @ u[s.cell_dofs(cp)]
            assert abs(um - up) < 1e-14 * max(1.0, abs(um))


def test_gradients_match_finite_differences(mesh2d_small):
    s = Space(mesh2d_small, W0)
    eps = 1e-7
    ref = np.array([0.37, 0.61])
    vals, grads = eval_basis(s, 1, ref)
    for d in range(2):
        refp = ref.copy()
        refp[d] += eps
        valp, _ = eval_basis(s, 1, refp)
        fd = (valp - vals) / eps
        assert np.allclose(fd, grads[:, d], atol=1e-6)


def test_dof_maps_deterministic():
    a = build_mesh(2, 6, 5, 100.0, 50.0, periodic_x=True)
    b = build_mesh(2, 6, 5, 100.0, 50.0, periodic_x=True)
    for attr in ("vf_minus", "vf_plus", "hf_minus", "hf_plus",
                 "cell_vf_left", "cell_vf_right", "cell_hf_bot",
                 "cell_hf_top", "cell_v00", "cell_v11"):
        assert np.array_equal(getattr(a, attr), getattr(b, attr))


def test_build_dof_map_examples():
    m1 = build_mesh(1, 1, 100, 1.0, 30000.0)
    assert build_dof_map(m1, W3).dof_count == 100
    m2 = build_mesh(2, 300, 10, 3.0e5, 1.0e4, periodic_x=True)
    assert build_dof_map(m2, W0).dof_count == 3300
    assert build_dof_map(m2, WTHETA).dof_count == 3300


def test_eval_basis_errors(mesh1d_small):
    s = Space(mesh1d_small, W3)
    with pytest.raises(IndexError):
        eval_basis(s, 99, [0.5])
    with pytest.raises(ValueError):
        eval_basis(s, 0, [1.5])
