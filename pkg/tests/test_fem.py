import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from topokit.fem import (
    Assembler,
    LoadCase,
    MaterialModel,
    SolverError,
    StructuralError,
    assemble,
    element_stiffness_2d,
    element_stiffness_3d,
    solve_displacements,
)
from topokit.mesh import build_grid
from topokit.problems import cantilever_2d, mbb_half

nus = st.floats(0.0, 0.49)


def rigid_modes_2d():
    xy = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    tx = np.tile([1.0, 0.0], 4)
    ty = np.tile([0.0, 1.0], 4)
    rot = np.column_stack([-xy[:, 1], xy[:, 0]]).ravel()
    return [tx, ty, rot]


def rigid_modes_3d():
    xyz = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                    [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float)
    modes = [np.tile(np.eye(3)[i], 8) for i in range(3)]
    for axis in np.eye(3):
        modes.append(np.cross(axis, xyz).ravel())
    return modes


def test_ke2d_diagonal_value():
    nu = 0.3
    KE = element_stiffness_2d(nu)
    Q = oracles.quadrature_element_stiffness(nu, 2)
    assert Q[0, 0] == pytest.approx(0.494505, abs=1e-6)
    assert KE[0, 0] == pytest.approx(Q[0, 0], abs=1e-12)
    assert KE[0, 0] == pytest.approx((0.5 - nu / 6) / (1 - nu**2), abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(nus)
def test_ke2d_properties(nu):
    KE = element_stiffness_2d(nu)
    assert np.abs(KE - KE.T).max() < 1e-14
    for m in rigid_modes_2d():
        assert np.abs(KE @ m).max() < 1e-12
    w = np.linalg.eigvalsh(KE)
    assert np.sum(np.abs(w) < 1e-10) == 3 and w.min() > -1e-12
    assert np.abs(KE - oracles.quadrature_element_stiffness(nu, 2)).max() < 1e-10


@settings(max_examples=15, deadline=None)
@given(nus)
def test_ke3d_properties(nu):
    KE = element_stiffness_3d(nu)
    assert np.abs(KE - KE.T).max() < 1e-14
    for m in rigid_modes_3d():
        assert np.abs(KE @ m).max() < 1e-12
    w = np.linalg.eigvalsh(KE)
    assert np.sum(np.abs(w) < 1e-10) == 6 and w.min() > -1e-12
    assert np.abs(KE - oracles.quadrature_element_stiffness(nu, 3)).max() < 1e-10


@pytest.mark.parametrize("nu", [-0.1, 0.5, 0.7])
def test_ke_rejects_bad_nu(nu):
    with pytest.raises(ValueError):
        element_stiffness_2d(nu)
    with pytest.raises(ValueError):
        element_stiffness_3d(nu)


@pytest.mark.parametrize("kwargs", [dict(Emin=0.0), dict(Emin=2.0), dict(nu=0.5), dict(p=1.0), dict(E0=0)])
def test_material_validation(kwargs):
    with pytest.raises(ValueError):
        MaterialModel(**kwargs)


def test_single_solid_element_scale_is_E0():
    g = build_grid((1, 1))
    mat = MaterialModel(E0=2.5)
    lc = LoadCase(loads=(), fixed_dofs=[0])
    sysm = assemble(g, np.ones(1), mat, lc)
    expected = np.zeros((8, 8))
    edof = g.edof[0]
    expected[np.ix_(edof, edof)] = 2.5 * element_stiffness_2d(0.3)
    free = sysm.free_dofs
    assert np.abs(sysm.K.toarray() - expected[np.ix_(free, free)]).max() < 1e-14


def test_all_void_is_emin_scaled_and_spd(material):
    dims = (4, 3)
    lc = mbb_half(dims)
    solid = assemble(build_grid(dims), np.ones(12), MaterialModel(E0=1.0, Emin=1e-9), lc).K.toarray()
    void = assemble(build_grid(dims), np.zeros(12), material, lc).K.toarray()
    assert np.allclose(void, 1e-9 * solid, rtol=1e-12, atol=0)
    assert np.linalg.eigvalsh(void).min() > 0


def test_reduced_assembly_matches_dense_oracle(material):
    dims = (4, 3)
    design = np.array([1, 0] * 6)
    lc = mbb_half(dims)
    sysm = assemble(build_grid(dims), design, material, lc)
    Kd, free = oracles.reduced_dense(dims, design, material.E0, material.Emin, material.nu, lc.fixed_dofs)
    assert np.array_equal(free, sysm.free_dofs)
    assert np.abs(sysm.K.toarray() - Kd).max() < 1e-12
    K = sysm.K.toarray()
    assert np.abs(K - K.T).max() == 0


def test_assembly_rejects_wrong_design_length(material):
    g = build_grid((4, 3))
    with pytest.raises(ValueError):
        assemble(g, np.ones(5), material, mbb_half((4, 3)))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=12, max_size=12),
       st.lists(st.integers(0, 1), min_size=12, max_size=12))
def test_assembly_affine_in_design(a, b):
    # K(a) + K(b) == K(a | b) + K(a & b), since K is affine in each rho_e
    mat = MaterialModel()
    asm = Assembler(build_grid((4, 3)), mbb_half((4, 3)), mat)
    a, b = np.array(a), np.array(b)
    K = lambda d: asm.assemble(d).K.toarray()
    lhs = K(a) + K(b)
    rhs = K(a | b) + K(a & b)
    assert np.abs(lhs - rhs).max() < 1e-13


@pytest.mark.parametrize("method", ["cg", "dense", "direct"])
def test_solve_matches_dense_oracle(material, method):
    dims = (4, 3)
    lc = mbb_half(dims)
    sysm = assemble(build_grid(dims), np.ones(12), material, lc)
    u, info = solve_displacements(sysm, method=method)
    u_ref, f = oracles.dense_solve(dims, np.ones(12), material.E0, material.Emin, material.nu,
                                   lc.loads, lc.fixed_dofs)
    assert np.linalg.norm(u - u_ref) / np.linalg.norm(u_ref) < 1e-8
    assert np.all(u[lc.fixed_dofs] == 0)
    assert info.residual <= 1e-8


@pytest.mark.parametrize("design", [[1, 0] * 6, [1, 1, 0] * 4])
def test_cg_on_designs_with_voids(material, design):
    # cond(K) ~ 1e11 here, so displacements only agree to ~cond * tol;
    # compare compliances at a loose bound; [1, 1, 0] * 4 leaves the loaded column void
    dims = (4, 3)
    lc = mbb_half(dims)
    sysm = assemble(build_grid(dims), np.array(design), material, lc)
    u, info = solve_displacements(sysm, method="cg")
    u_ref, _ = solve_displacements(sysm, method="dense")
    f = sysm.expand(sysm.f)
    assert abs(f @ u - f @ u_ref) / (f @ u_ref) < 1e-5


def test_zero_load_gives_zero_displacement(material):
    g = build_grid((4, 3))
    lc = LoadCase(loads=(), fixed_dofs=mbb_half((4, 3)).fixed_dofs)
    u, info = solve_displacements(assemble(g, np.ones(12), material, lc))
    assert np.all(u == 0) and info.iterations == 0


def test_linearity_in_load(material):
    g = build_grid((6, 3))
    d = np.ones(18)
    base = cantilever_2d((6, 3))
    twice = LoadCase(loads=tuple((k, 2 * v) for k, v in base.loads), fixed_dofs=base.fixed_dofs)
    u1, _ = solve_displacements(assemble(g, d, material, base))
    u2, _ = solve_displacements(assemble(g, d, material, twice))
    assert np.linalg.norm(u2 - 2 * u1) / np.linalg.norm(u2) < 1e-7


def test_compliance_identity(material, rng):
    dims = (8, 4)
    g = build_grid(dims)
    lc = mbb_half(dims)
    design = (rng.random(g.n_elements) < 0.7).astype(int)
    sysm = assemble(g, design, material, lc)
    u, _ = solve_displacements(sysm, method="dense")
    uf = u[sysm.free_dofs]
    fu = sysm.f @ uf
    uKu = uf @ (sysm.K @ uf)
    assert abs(fu - uKu) / fu < 1e-8


def test_unsupported_structure_is_structural_error(material):
    g = build_grid((2, 2))
    lc = LoadCase(loads=((3, -1.0),), fixed_dofs=[0])  # one DOF fixed: rigid modes remain
    sysm = assemble(g, np.ones(4), material, lc)
    for method in ("dense", "cg"):
        with pytest.raises((StructuralError, SolverError)):
            solve_displacements(sysm, method=method, maxiter=200)


def test_cg_iteration_cap_raises_with_residual(material):
    g = build_grid((20, 10))
    sysm = assemble(g, np.ones(200), material, mbb_half((20, 10)))
    with pytest.raises(SolverError) as exc:
        solve_displacements(sysm, method="cg", maxiter=3)
    assert exc.value.residual > 1e-8


def test_dense_limited_in_size(material):
    g = build_grid((40, 40))
    sysm = assemble(g, np.ones(1600), material, mbb_half((40, 40)))
    with pytest.raises(ValueError):
        solve_displacements(sysm, method="dense")


def test_loadcase_validation():
    with pytest.raises(ValueError):
        LoadCase(loads=(), fixed_dofs=[])
    lc = LoadCase(loads=((99, 1.0),), fixed_dofs=[0])
    with pytest.raises(ValueError):
        lc.validate(8)
