import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rdode.errors import DimensionMismatch, NegativeTime
from rdode.grid import (Grid, StateField, apply_laplacian, cosine_modes, heat_propagate,
                        laplacian_eigenvalues, laplacian_matrix)


def test_grid_nodes():
    g = Grid(10)
    assert g.h * g.n == pytest.approx(1.0)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] > 0 and g.nodes[-1] < 1
    np.testing.assert_allclose(g.nodes, (np.arange(10) + 0.5) / 10)


def test_grid_rejects_empty():
    with pytest.raises(ValueError):
        Grid(0)


def test_laplacian_two_cells():
    np.testing.assert_allclose(laplacian_matrix(Grid(2), 1.0), 4.0 * np.array([[-1, 1], [1, -1]]))


@pytest.mark.parametrize("n", [2, 5, 64])
def test_laplacian_neumann_kernel_and_symmetry(n):
    L = laplacian_matrix(Grid(n), 0.7)
    np.testing.assert_allclose(L @ np.ones(n), 0.0, atol=1e-9)
    np.testing.assert_array_equal(L, L.T)
    assert np.max(np.linalg.eigvalsh(L)) <= 1e-12 * n * n


def test_sampled_cosines_are_eigenvectors():
    g = Grid(8)
    L = laplacian_matrix(g, 1.0)
    for j in range(8):
        c = np.cos(j * np.pi * g.nodes)
        mu = -(2 / g.h ** 2) * (1 - np.cos(j * np.pi * g.h))
        np.testing.assert_allclose(L @ c, mu * c, atol=1e-10)
        assert laplacian_eigenvalues(g, 1.0)[j] == pytest.approx(mu, abs=1e-10)


def test_matrix_free_laplacian_matches_matrix(rng):
    g = Grid(33)
    f = rng.normal(size=(2, 33))
    np.testing.assert_allclose(apply_laplacian(g, f, 0.3), f @ laplacian_matrix(g, 0.3).T, atol=1e-10)


def test_cosine_modes_two_cells():
    c = cosine_modes(Grid(2))
    np.testing.assert_allclose(np.abs(c[:, 0]), [1 / np.sqrt(2)] * 2)
    assert c[0, 1] == pytest.approx(-c[1, 1])


def test_cosine_modes_orthonormal_and_diagonalising():
    g = Grid(40)
    c = cosine_modes(g)
    np.testing.assert_allclose(c.T @ c, np.eye(40), atol=1e-12)
    D = c.T @ laplacian_matrix(g, 1.0) @ c
    off = D - np.diag(np.diag(D))
    assert np.max(np.abs(off)) <= 1e-10
    np.testing.assert_allclose(np.diag(D), laplacian_eigenvalues(g, 1.0), rtol=1e-12, atol=1e-9)


def test_heat_constant_field_is_fixed():
    np.testing.assert_allclose(heat_propagate(Grid(16), 2.0, np.ones(16), 3.0), 1.0, atol=1e-14)


def test_heat_first_mode_decay():
    g = Grid(64)
    c1 = cosine_modes(g)[:, 1]
    mu1 = laplacian_eigenvalues(g, 1.0)[1]
    assert mu1 == pytest.approx(-np.pi ** 2, rel=1e-3)
    np.testing.assert_allclose(heat_propagate(g, 1.0, c1, 1.0), np.exp(mu1) * c1, atol=1e-14)


def test_heat_long_time_limit_is_mean(rng):
    g = Grid(32)
    f = rng.uniform(-1, 1, 32)
    np.testing.assert_allclose(heat_propagate(g, 1.0, f, 50.0), f.mean(), atol=1e-12)


def test_heat_zero_time_copy_and_negative_time():
    g = Grid(8)
    f = np.arange(8.0)
    out = heat_propagate(g, 1.0, f, 0.0)
    np.testing.assert_array_equal(out, f)
    assert out is not f
    with pytest.raises(NegativeTime):
        heat_propagate(g, 1.0, f, -1e-3)


def test_heat_against_matrix_exponential(rng):
    from scipy.linalg import expm
    g = Grid(24)
    f = rng.normal(size=24)
    ref = expm(0.05 * laplacian_matrix(g, 0.8)) @ f
    np.testing.assert_allclose(heat_propagate(g, 0.8, f, 0.05), ref, atol=1e-12)


fields = arrays(np.float64, st.integers(2, 40), elements=st.floats(-5, 5))


@settings(max_examples=60, deadline=None)
@given(fields, st.floats(0, 2), st.floats(0, 2), st.floats(0.01, 3))
def test_heat_semigroup_mean_and_contraction(f, t, s, d):
    g = Grid(f.size)
    once = heat_propagate(g, d, f, t + s)
    twice = heat_propagate(g, d, heat_propagate(g, d, f, t), s)
    np.testing.assert_allclose(once, twice, atol=1e-10)
    assert abs(once.mean() - f.mean()) <= 1e-12 * max(1.0, np.abs(f).max())
    assert np.max(np.abs(once)) <= np.max(np.abs(f)) + 1e-12


def test_state_field_vector_round_trip(rng):
    s = StateField(rng.normal(size=(2, 5)), rng.normal(size=(1, 5)))
    back = StateField.from_vector(s.as_vector(), 2, 1)
    np.testing.assert_array_equal(back.u, s.u)
    np.testing.assert_array_equal(back.v, s.v)
    assert s.as_vector()[:5].tolist() == s.u[0].tolist()


def test_state_field_norms_and_arithmetic():
    s = StateField(np.array([[1.0, -3.0]]), np.array([[2.0, 0.0]]))
    assert s.sup_norm() == 3.0
    assert s.l2_norm() == pytest.approx(np.sqrt(14 / 2))
    assert (s - s).sup_norm() == 0.0
    assert (s + s).sup_norm() == 6.0
    assert s.scaled(0.5).sup_norm() == 1.5
    np.testing.assert_array_equal(s.reflected().u, [[-3.0, 1.0]])


def test_state_field_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        StateField(np.zeros((1, 4)), np.zeros((1, 5)))
    with pytest.raises(DimensionMismatch):
        StateField.zeros(1, 1, 4).check_shape(2, 1, 4)
