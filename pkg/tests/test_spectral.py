import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delayhinf.spectral import (boundary_block_row, build_mesh,
                                differentiation_matrix, differentiation_on,
                                discretize_block_operator, lagrange_row)

# analytic differentiation of the quadratic Lagrange basis on {-1, 0, 1}
D3 = np.array([[-1.5, 2.0, -0.5],
               [-0.5, 0.0, 0.5],
               [0.5, -2.0, 1.5]])


def test_mesh_n1():
    mesh = build_mesh(1, 1.0)
    np.testing.assert_allclose(mesh.points, [-1.0, 0.0, 1.0], atol=0)


def test_mesh_n2():
    mesh = build_mesh(2, 1.0)
    r = np.sqrt(2.0) / 2.0
    np.testing.assert_allclose(mesh.points, [-1.0, -r, 0.0, r, 1.0], atol=1e-15)


def test_mesh_scaling():
    np.testing.assert_allclose(build_mesh(2, 3.9).points,
                               3.9 * build_mesh(2, 1.0).points, atol=1e-14)


def test_mesh_center_is_exact_zero():
    for N in (1, 2, 7, 20):
        mesh = build_mesh(N, 2.7)
        assert mesh.points[mesh.zero_index] == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.floats(1e-3, 1e3))
def test_mesh_symmetry(N, tau_max):
    pts = build_mesh(N, tau_max).points
    np.testing.assert_array_equal(pts, -pts[::-1])
    assert np.all(np.diff(pts) > 0)


def test_mesh_argument_errors():
    with pytest.raises(ValueError):
        build_mesh(0, 1.0)
    with pytest.raises(ValueError):
        build_mesh(3, 0.0)


def test_diffmat_three_points():
    diff = differentiation_matrix(build_mesh(1, 1.0))
    np.testing.assert_allclose(diff.matrix, D3, atol=1e-14)


def test_diffmat_annihilates_constants():
    for N in (1, 4, 13):
        diff = differentiation_matrix(build_mesh(N, 2.0))
        np.testing.assert_allclose(diff.matrix @ np.ones(2 * N + 1), 0.0,
                                   atol=1e-12)


def test_diffmat_exact_on_degree_five():
    # degree 5 <= 2N for N = 3; derivative of t^5 is 5 t^4
    mesh = build_mesh(3, 1.0)
    diff = differentiation_matrix(mesh)
    values = mesh.points**5
    np.testing.assert_allclose(diff.matrix @ values, 5 * mesh.points**4,
                               atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_partition_of_unity(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 25))
    tau = float(rng.uniform(0.1, 5.0))
    mesh = build_mesh(N, tau)
    diff = differentiation_matrix(mesh)
    for t in rng.uniform(-tau, tau, 100):
        assert abs(lagrange_row(mesh.points, diff.weights, t).sum() - 1.0) < 1e-12


def test_lagrange_row_node_hit():
    mesh = build_mesh(4, 1.0)
    diff = differentiation_matrix(mesh)
    row = diff.basis_row(mesh.points[2])
    expected = np.zeros(9)
    expected[2] = 1.0
    np.testing.assert_array_equal(row, expected)


def test_interior_rows_reproduce_polynomial_derivatives():
    rng = np.random.default_rng(7)
    for N in (2, 5, 9):
        mesh = build_mesh(N, 1.0)
        diff = differentiation_matrix(mesh)
        coeffs = rng.uniform(-1, 1, 2 * N + 1)
        p = np.polynomial.Polynomial(coeffs)
        dp = p.deriv()
        boundary = np.zeros((1, 2 * N + 1))
        L = discretize_block_operator(diff, 1, boundary,
                                      boundary_index=mesh.zero_index)
        out = L @ p(mesh.points)
        expected = dp(mesh.points)
        expected[mesh.zero_index] = 0.0
        np.testing.assert_allclose(out, expected, atol=1e-9)


def test_block_operator_zero_boundary_scalar():
    mesh = build_mesh(1, 1.0)
    diff = differentiation_matrix(mesh)
    L = discretize_block_operator(diff, 1, np.zeros((1, 3)),
                                  boundary_index=mesh.zero_index)
    expected = D3.copy()
    expected[1, :] = 0.0
    np.testing.assert_allclose(L, expected, atol=1e-14)


def test_block_operator_kron_structure():
    mesh = build_mesh(1, 1.0)
    diff = differentiation_matrix(mesh)
    boundary = np.arange(12, dtype=float).reshape(2, 6)
    L = discretize_block_operator(diff, 2, boundary,
                                  boundary_index=mesh.zero_index)
    K = np.kron(diff.matrix, np.eye(2))
    np.testing.assert_allclose(L[:2], K[:2])
    np.testing.assert_allclose(L[4:], K[4:])
    np.testing.assert_allclose(L[2:4], boundary)


def test_block_operator_boundary_shape_error():
    mesh = build_mesh(1, 1.0)
    diff = differentiation_matrix(mesh)
    with pytest.raises(ValueError):
        discretize_block_operator(diff, 2, np.zeros((2, 5)))


def test_delay_free_boundary_embeds_coefficient_eigenvalue():
    # with the splicing row reduced to the plain coefficient at the zero
    # node, the coefficient itself is an exact eigenvalue of the
    # discretization (eigenvectors with a nonzero center component)
    m0 = -0.7
    mesh = build_mesh(1, 1.0)
    diff = differentiation_matrix(mesh)
    row = boundary_block_row(diff, 1, np.array([[m0]]), [],
                             boundary_index=mesh.zero_index)
    L = discretize_block_operator(diff, 1, row, boundary_index=mesh.zero_index)
    ev = np.linalg.eigvals(L)
    assert np.min(np.abs(ev - m0)) < 1e-9


def test_one_sided_nodes_end_exactly_at_zero():
    from delayhinf.spectral import chebyshev_points
    pts = chebyshev_points(21, -3.9, 0.0)
    assert pts[-1] == 0.0
    assert pts[0] == -3.9
    assert np.all(np.diff(pts) > 0)
