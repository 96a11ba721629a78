import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from musielak_parabolic.errors import AssemblyNaNError, InvalidResolutionError, TraceViolationError
from musielak_parabolic.fem import (
    FemFunction,
    FemSpace,
    assemble_jacobian,
    assemble_residual,
    build_mesh,
    quadrature_rule,
    restrict,
)
from musielak_parabolic.library import MODELS, shipped_problem


def fd_jacobian(spec, space, u, u_prev, tau, t, h=1e-7):
    n = space.n_dofs
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        rp = assemble_residual(spec, space, FemFunction(space, u.coefficients + e), u_prev, tau, t)
        rm = assemble_residual(spec, space, FemFunction(space, u.coefficients - e), u_prev, tau, t)
        J[:, j] = (rp - rm) / (2 * h)
    return J


# meshes ----------------------------------------------------------------------


def test_mesh_1d_m2():
    mesh = build_mesh(1, 2)
    np.testing.assert_array_equal(mesh.vertices[mesh.interior_vertices, 0], [0.5])
    assert mesh.h_max == 0.5


def test_mesh_1d_m4():
    mesh = build_mesh(1, 4)
    assert len(mesh.interior_vertices) == 3
    assert mesh.h_max == 0.25


def test_mesh_2d_m2():
    mesh = build_mesh(2, 2)
    assert len(mesh.cells) == 8
    assert len(mesh.interior_vertices) == 1
    np.testing.assert_array_equal(mesh.vertices[mesh.interior_vertices[0]], [0.5, 0.5])


@pytest.mark.parametrize("m", [2, 3, 8])
def test_mesh_2d_counts_and_area(m):
    space = FemSpace(build_mesh(2, m))
    assert space.n_cells == 2 * m * m
    assert space.n_dofs == (m - 1) ** 2
    assert space.measure.sum() == pytest.approx(1.0, rel=1e-14)
    assert space.mesh.h_max == pytest.approx(np.sqrt(2) / m)


def test_mesh_2d_nested_under_doubling():
    coarse, fine = build_mesh(2, 4), build_mesh(2, 8)
    fine_space = FemSpace(fine)
    # every coarse edge midpoint lies on a fine edge: the coarse P1 hat is fine-P1 exact
    u_c = restrict(lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]), FemSpace(coarse))
    u_f = restrict(lambda x: u_c.evaluate(x), fine_space)
    pts = np.random.default_rng(3).uniform(0, 1, size=(200, 2))
    np.testing.assert_allclose(u_f.evaluate(pts), u_c.evaluate(pts), atol=1e-13)


@pytest.mark.parametrize("m", [1, 0, -3])
def test_mesh_invalid_resolution(m):
    with pytest.raises(InvalidResolutionError):
        build_mesh(1, m)


def test_mesh_text_roundtrip_header():
    text = build_mesh(2, 2).to_text()
    assert text.startswith("dim 2\nvertices 9\n")
    assert "cells 8" in text


# quadrature ------------------------------------------------------------------


@pytest.mark.parametrize("dim, ref", [(1, 1.0), (2, 0.5)])
@pytest.mark.parametrize("degree", [2, 4, 6, 9])
def test_quadrature_weights_sum(dim, ref, degree):
    assert quadrature_rule(dim, degree).weights.sum() == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("degree", [4, 6, 8])
def test_triangle_rule_exact_monomials(degree):
    from math import factorial

    q = quadrature_rule(2, degree)
    x, y = q.points[:, 1], q.points[:, 2]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            exact = factorial(i) * factorial(j) / factorial(i + j + 2)
            assert np.dot(q.weights, x**i * y**j) == pytest.approx(exact, rel=1e-11, abs=1e-15)


# restriction ----------------------------------------------------------------


def test_restrict_bubble():
    space = FemSpace(build_mesh(1, 2))
    u = restrict(lambda x: x[:, 0] * (1 - x[:, 0]), space)
    np.testing.assert_array_equal(u.coefficients, [0.25])


def test_restrict_zero():
    space = FemSpace(build_mesh(2, 4))
    assert not restrict(lambda x: np.zeros(len(x)), space).coefficients.any()


def test_restrict_sine():
    space = FemSpace(build_mesh(1, 4))
    u = restrict(lambda x: np.sin(np.pi * x[:, 0]), space)
    np.testing.assert_allclose(u.coefficients, np.sin(np.pi * np.array([0.25, 0.5, 0.75])), rtol=1e-15)


def test_restrict_rejects_nonzero_trace():
    with pytest.raises(TraceViolationError):
        restrict(lambda x: 1.0 + x[:, 0], FemSpace(build_mesh(1, 4)))


def test_evaluate_reproduces_linear_field_2d():
    space = FemSpace(build_mesh(2, 6))
    u = restrict(lambda x: x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1]), space)
    nodes = space.mesh.vertices
    np.testing.assert_allclose(u.evaluate(nodes), u.nodal_values(), atol=1e-14)


def test_fem_function_shape_checked():
    with pytest.raises(ValueError):
        FemFunction(FemSpace(build_mesh(1, 4)), np.zeros(5))


def test_field_csv_columns():
    u = restrict(lambda x: x[:, 0] * (1 - x[:, 0]), FemSpace(build_mesh(1, 2)))
    assert u.to_csv().splitlines() == ["vertex,x,value", "0,0.0,0.0", "1,0.5,0.25", "2,1.0,0.0"]


# residual and Jacobian -------------------------------------------------------


@pytest.mark.parametrize("tau", [0.1, 0.05, 0.01])
def test_residual_heat_one_dof_root(heat, one_dof, tau):
    u_prev = FemFunction(one_dof, [1.0])
    u = FemFunction(one_dof, [1.0 / (1.0 + 12.0 * tau)])
    assert abs(assemble_residual(heat, one_dof, u, u_prev, tau, tau)[0]) < 1e-14


def test_residual_scaled_b_one_dof_root(heat_scaled, one_dof):
    tau = 0.1
    u = FemFunction(one_dof, [1.0 / (1.0 + 8.0 * tau)])
    assert abs(assemble_residual(heat_scaled, one_dof, u, FemFunction(one_dof, [1.0]), tau, tau)[0]) < 1e-14


def test_residual_stationary_is_stiffness_only(heat):
    space = FemSpace(build_mesh(1, 8))
    u = restrict(lambda x: np.sin(np.pi * x[:, 0]), space)
    r = assemble_residual(heat, space, u, u, 0.1, 0.0)
    A = assemble_jacobian(heat, space, u, 1e300)  # mass term vanishes as tau -> infinity
    np.testing.assert_allclose(r, A @ u.coefficients, rtol=1e-12, atol=1e-15)


def test_jacobian_heat_one_dof(heat, heat_scaled, one_dof):
    tau = 0.1
    J = assemble_jacobian(heat, one_dof, one_dof.zero(), tau).toarray()
    assert J.shape == (1, 1)
    assert J[0, 0] == pytest.approx(1.0 / (3 * tau) + 4.0, rel=1e-14)
    J = assemble_jacobian(heat_scaled, one_dof, one_dof.zero(), tau).toarray()
    assert J[0, 0] == pytest.approx(1.5 / (3 * tau) + 4.0, rel=1e-14)


def test_jacobian_linear_model_is_mass_plus_stiffness(heat):
    space = FemSpace(build_mesh(1, 5))
    tau = 0.2
    J = assemble_jacobian(heat, space, space.zero(), tau).toarray()
    h = 0.2
    n = space.n_dofs
    M = h / 6 * (4 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1))
    A = 1 / h * (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))
    np.testing.assert_allclose(J, M / tau + A, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("name", sorted(MODELS))
@pytest.mark.parametrize("dim, m", [(1, 6), (2, 4)])
def test_jacobian_matches_finite_differences(name, dim, m, rng):
    spec = shipped_problem(name, dim=dim)
    space = FemSpace(build_mesh(dim, m))
    tau, t = 0.05, 0.3
    for _ in range(3):
        u = FemFunction(space, rng.uniform(-2, 2, space.n_dofs))
        u_prev = FemFunction(space, rng.uniform(-2, 2, space.n_dofs))
        J = assemble_jacobian(spec, space, u, tau).toarray()
        J_fd = fd_jacobian(spec, space, u, u_prev, tau, t)
        assert np.linalg.norm(J - J_fd) / np.linalg.norm(J_fd) < 1e-5


def test_picard_matrix_is_symmetric_positive(rng):
    spec = shipped_problem("p-laplacian", dim=2)
    space = FemSpace(build_mesh(2, 4))
    u = FemFunction(space, rng.uniform(-1, 1, space.n_dofs))
    P = assemble_jacobian(spec, space, u, 0.1, picard=True).toarray()
    np.testing.assert_allclose(P, P.T, atol=1e-12)
    assert np.linalg.eigvalsh(P).min() > 0


def test_assembly_nan_names_cell(heat):
    spec = shipped_problem("heat-limit", f={"kind": "expr", "params": {"expr": "log(x0 - 0.5)"}})
    space = FemSpace(build_mesh(1, 4))
    with pytest.raises(AssemblyNaNError) as info:
        assemble_residual(spec, space, space.zero(), space.zero(), 0.1, 0.0)
    assert info.value.cell in (0, 1)


def test_assembly_independent_of_thread_count(monkeypatch, rng):
    import musielak_parabolic.fem as fem

    spec = shipped_problem("p-laplacian", dim=2)
    space = FemSpace(build_mesh(2, 48))
    u = FemFunction(space, rng.uniform(-1, 1, space.n_dofs))
    v = FemFunction(space, rng.uniform(-1, 1, space.n_dofs))
    monkeypatch.setattr(fem, "CHUNK_CELLS", 512)
    out = {}
    for threads in ("1", "4"):
        monkeypatch.setenv("MP_THREADS", threads)
        out[threads] = (
            assemble_residual(spec, space, u, v, 0.1, 0.2),
            assemble_jacobian(spec, space, u, 0.1).toarray(),
        )
    assert np.array_equal(out["1"][0], out["4"][0])
    assert np.array_equal(out["1"][1], out["4"][1])


@settings(max_examples=30, deadline=None)
@given(coeffs=st.lists(st.floats(-10, 10), min_size=5, max_size=5))
def test_l2_norm_of_p1_exact(coeffs):
    space = FemSpace(build_mesh(1, 6))
    u = FemFunction(space, np.array(coeffs))
    v = u.nodal_values()
    h = 1 / 6
    exact = sum(h / 3 * (a * a + a * b + b * b) for a, b in zip(v[:-1], v[1:]))
    assert u.l2_norm() ** 2 == pytest.approx(exact, rel=1e-12, abs=1e-14)
