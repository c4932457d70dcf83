import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from narrowgap.geometry import CoefficientError, CoefficientField
from narrowgap.harmonic import (DirichletProblem, FieldSolution, HarmonicSystem, MeshMismatchError,
                                SolverError, assemble, boundary_flux_sum, energy_inner_product,
                                gradient_field, interpolant, manufactured_error, solve_dirichlet)
from narrowgap.mesh import D1, D2, DOUTER, INTERIOR, Mesh, annulus_mesh, rect_mesh, triangulate_scene
from narrowgap.scenes import NAMES, ANISO, canonical_policy, canonical_scene

RIGHT = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]),
             np.full(3, DOUTER, dtype=np.int8), np.zeros(1, dtype=np.int8), n_loops=1)


def annulus_v(n_r=16, n_t=128):
    m = annulus_mesh(1.0, 2.0, n_r, n_t)
    return m, solve_dirichlet(DirichletProblem(m, {D1: 1.0, DOUTER: 0.0}))


# -- assembly --------------------------------------------------------------
def test_reference_triangle_rows_sum_to_zero():
    K = HarmonicSystem(RIGHT).K.toarray()
    assert np.allclose(K.sum(axis=1), 0.0, atol=1e-15)


def test_diagonal_coefficients_on_right_triangle():
    A = CoefficientField("rotation_aniso", theta=0.0, ratio=4.0)   # diag(4, 1)
    K = HarmonicSystem(RIGHT, A).K.toarray()
    # basis gradients (-1,-1), (1,0), (0,1); area 1/2; K_ij = area * g_i . A g_j
    hand = np.array([[2.5, -2.0, -0.5], [-2.0, 2.0, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(K, hand, atol=1e-14)


@settings(max_examples=20)
@given(st.floats(-3, 3), st.floats(1.0, 8.0), st.integers(0, 2 ** 31))
def test_assembled_operator_positive_definite(theta, ratio, seed):
    m = rect_mesh(6, 5)
    A = CoefficientField("rotation_aniso", theta, ratio)
    Kff, _, free, _ = assemble(DirichletProblem(m, {DOUTER: 0.0}, A))
    x = np.random.default_rng(seed).standard_normal(len(free))
    assert x @ (Kff @ x) > 0
    assert abs((Kff - Kff.T)).max() == 0


def test_ellipticity_violation_raises():
    class Broken(CoefficientField):
        def __call__(self, x, y):
            M = super().__call__(x, y)
            M[..., 1, 1] = -1.0
            return M

    with pytest.raises(CoefficientError):
        HarmonicSystem(rect_mesh(2, 2), Broken("rotation_aniso", 0.3, 4.0))


# -- solve -----------------------------------------------------------------
def test_linear_boundary_data_reproduced():
    m = triangulate_scene(canonical_scene("strict", 1e-2))
    g = lambda x, y: y
    v = solve_dirichlet(DirichletProblem(m, {D1: g, D2: g, DOUTER: g}), tol=1e-12)
    assert np.max(np.abs(v.values - m.vertices[:, 1])) <= 1e-9
    assert np.allclose(v.gradients, [0.0, 1.0], atol=1e-9)


def test_constant_boundary_data_reproduced():
    m = triangulate_scene(canonical_scene("flat", 1e-2), canonical_policy("flat"))
    v = solve_dirichlet(DirichletProblem(m, {D1: 2.5, D2: 2.5, DOUTER: 2.5}), tol=1e-12)
    assert np.max(np.abs(v.values - 2.5)) <= 1e-9


def test_annulus_nodal_error_second_order():
    errs, hs = [], []
    for k in range(3):
        m, v = annulus_v(4 * 2 ** k, 32 * 2 ** k)
        r = np.hypot(*m.vertices.T)
        errs.append(np.max(np.abs(v.values - np.log(2 / r) / math.log(2))))
        hs.append(1.0 / (4 * 2 ** k))
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert order >= 1.8


def test_annulus_max_gradient():
    _, v = annulus_v(32, 256)
    g = np.linalg.norm(gradient_field(v), axis=1).max()
    assert g == pytest.approx(1 / math.log(2), rel=0.02)


def test_solver_is_deterministic():
    m = triangulate_scene(canonical_scene("strict", 1e-2))
    p = DirichletProblem(m, {D1: 1.0, D2: 0.0, DOUTER: 0.0})
    first = solve_dirichlet(p).values
    np.random.seed(12345)   # global RNG state must not leak into the preconditioner
    assert np.array_equal(first, solve_dirichlet(p).values)


def test_solver_nonconvergence_reports_error():
    m = triangulate_scene(canonical_scene("strict", 1e-2))
    with pytest.raises(SolverError):
        solve_dirichlet(DirichletProblem(m, {D1: 1.0, D2: 0.0, DOUTER: 0.0}), precond="jacobi", maxiter=2)


def test_missing_boundary_value_rejected():
    m = triangulate_scene(canonical_scene("strict", 1e-2))
    with pytest.raises(ValueError):
        solve_dirichlet(DirichletProblem(m, {D1: 1.0, DOUTER: 0.0}))


def test_jacobi_and_amg_agree():
    m = triangulate_scene(canonical_scene("strict", 1e-2))
    p = DirichletProblem(m, {D1: 1.0, D2: 0.0, DOUTER: 0.0})
    a = solve_dirichlet(p, precond="amg").values
    b = solve_dirichlet(p, precond="jacobi", maxiter=20000).values
    assert np.max(np.abs(a - b)) <= 1e-7


# -- gradients and energies ------------------------------------------------
def test_interpolated_gap_profile_has_exact_vertical_gradient():
    from narrowgap.auxiliary import AuxiliaryField
    from narrowgap.geometry import Region

    s = canonical_scene("flat", 1e-2)
    m = triangulate_scene(s, canonical_policy("flat"))
    aux = AuxiliaryField("ubar1", s, extend=True)
    f = interpolant(m, aux.value)
    sel = Region("sigma").contains(s, m.centroids())
    g = f.gradients[sel]
    assert np.max(np.abs(g[:, 1] - 1 / s.epsilon)) <= 1e-8
    assert np.max(np.abs(g[:, 0])) <= 1e-8


def test_energy_of_linear_field_is_area():
    m = rect_mesh(7, 3, 0.0, 2.0, 0.0, 0.5)
    y = interpolant(m, lambda x, y: y)
    x = interpolant(m, lambda x, y: x)
    assert energy_inner_product(y, y) == pytest.approx(1.0, abs=1e-14)
    assert energy_inner_product(x, y) == pytest.approx(0.0, abs=1e-14)


def test_annulus_energy_matches_capacitance():
    _, v = annulus_v(16, 128)
    assert energy_inner_product(v, v) == pytest.approx(2 * math.pi / math.log(2), rel=0.01)


@given(st.integers(0, 2 ** 31), st.booleans())
def test_energy_symmetric_exactly(seed, aniso):
    m = rect_mesh(5, 4)
    rng = np.random.default_rng(seed)
    sysm = HarmonicSystem(m, ANISO if aniso else None)
    f = FieldSolution(m, rng.standard_normal(m.n_vertices), system=sysm)
    g = FieldSolution(m, rng.standard_normal(m.n_vertices), system=sysm)
    A = ANISO if aniso else None
    assert energy_inner_product(f, g, A, sysm) == energy_inner_product(g, f, A, sysm)


def test_energy_mesh_mismatch():
    a = interpolant(rect_mesh(2, 2), lambda x, y: x)
    b = interpolant(rect_mesh(3, 3), lambda x, y: x)
    with pytest.raises(MeshMismatchError):
        energy_inner_product(a, b)


# -- manufactured solutions ------------------------------------------------
def annulus_family():
    return [annulus_mesh(1.0, 2.0, 4 * 2 ** k, 32 * 2 ** k) for k in range(3)]


def test_manufactured_linear_exact():
    r = manufactured_error("linear", annulus_family())
    assert np.all(r.linf <= 1e-9) and np.all(r.grad_l2 <= 1e-9)


def test_manufactured_log_gradient_order():
    assert manufactured_error("log", annulus_family()).order_grad >= 0.9


def test_manufactured_quadratic_nodal_order():
    assert manufactured_error("r2cos2", annulus_family()).order_linf >= 1.8


# -- invariants ------------------------------------------------------------
@pytest.mark.parametrize("name", NAMES)
def test_flux_balance_over_all_boundaries(name):
    s = canonical_scene(name, 1e-2)
    m = triangulate_scene(s, canonical_policy(name))
    sysm = HarmonicSystem(m)
    v = solve_dirichlet(DirichletProblem(m, {D1: 1.0, D2: 0.0, DOUTER: lambda x, y: y}), tol=1e-12,
                        system=sysm)
    total = sum(boundary_flux_sum(v, t, sysm) for t in (D1, D2, DOUTER))
    assert abs(total) <= 1e-9


@pytest.mark.parametrize("name", NAMES)
def test_discrete_maximum_principle_on_canonical_meshes(name):
    for eps in (4e-2, 2.5e-3):
        for A in (None, ANISO):
            s = canonical_scene(name, eps, A=A)
            m = triangulate_scene(s, canonical_policy(name))
            v = solve_dirichlet(DirichletProblem(m, {D1: 1.0, D2: 0.0, DOUTER: lambda x, y: 0.3 * y}, A))
            b = m.tags != INTERIOR
            assert v.values.min() >= v.values[b].min() - 1e-8
            assert v.values.max() <= v.values[b].max() + 1e-8


def _brute_force(m, g):
    sysm = HarmonicSystem(m)
    free = np.flatnonzero(m.tags == INTERIOR)
    fixed = np.flatnonzero(m.tags != INTERIOR)
    K = sysm.K.tocsr()
    out = g.copy()
    out[free] = spla.spsolve(K[free][:, free].tocsc(), -(K[free][:, fixed] @ g[fixed]))
    return out


@settings(max_examples=25)
@given(st.integers(0, 2 ** 31), st.floats(0.01, 1.0))
def test_monotone_in_boundary_data(seed, bump):
    m = annulus_mesh(1.0, 2.0, 4, 24)
    rng = np.random.default_rng(seed)
    g = rng.uniform(-1, 1, m.n_vertices)
    g[m.tags == INTERIOR] = 0.0
    base = solve_dirichlet(DirichletProblem(m, g), tol=1e-12).values
    assert np.max(np.abs(base - _brute_force(m, g))) <= 1e-9
    k = rng.choice(np.flatnonzero(m.tags != INTERIOR))
    g2 = g.copy()
    g2[k] += bump
    raised = solve_dirichlet(DirichletProblem(m, g2), tol=1e-12).values
    assert np.all(raised >= base - 1e-10)


@settings(max_examples=15)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_superposition(a, b):
    s = canonical_scene("strict", 1e-2)
    m = triangulate_scene(s)
    sysm = HarmonicSystem(m)
    g1 = {D1: 1.0, D2: 0.0, DOUTER: 0.0}
    g2 = {D1: 0.0, D2: 0.0, DOUTER: lambda x, y: y}
    both = {D1: a, D2: 0.0, DOUTER: lambda x, y: b * y}
    s1 = solve_dirichlet(DirichletProblem(m, g1), 1e-12, sysm).values
    s2 = solve_dirichlet(DirichletProblem(m, g2), 1e-12, sysm).values
    sb = solve_dirichlet(DirichletProblem(m, both), 1e-12, sysm).values
    assert np.max(np.abs(sb - (a * s1 + b * s2))) <= 1e-8 * max(1.0, abs(a), abs(b))


def test_field_csv_formats(tmp_path):
    m, v = annulus_v(2, 8)
    v.dump_csv(tmp_path / "v.csv")
    v.dump_gradient_csv(tmp_path / "g.csv")
    rows = (tmp_path / "v.csv").read_text().splitlines()
    assert rows[0] == "vertex_id,value" and len(rows) == m.n_vertices + 1
    grows = (tmp_path / "g.csv").read_text().splitlines()
    assert grows[0] == "triangle_id,gx,gy" and len(grows) == m.n_triangles + 1
    assert float(rows[1].split(",")[1]) == v.values[0]
