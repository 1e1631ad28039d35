"""Linear algebra kernels against independent oracles.

The eigensolver is checked with frozen hand-derived spectra and a
power-iteration oracle, the exponential against a fine-step RK4 run,
and the Kronecker eigenvalue law through characteristic-polynomial
evaluation with an elimination-based determinant written here.
"""

import numpy as np
import pytest

from auxgrid import linalg
from auxgrid.exceptions import DomainError, ShapeError, SingularMatrixError

RING4_LAPLACIAN = np.array([
    [2.0, -1.0, 0.0, -1.0],
    [-1.0, 2.0, -1.0, 0.0],
    [0.0, -1.0, 2.0, -1.0],
    [-1.0, 0.0, -1.0, 2.0],
])


def power_iteration_lambda_max(m: np.ndarray, iters: int = 2000) -> float:
    """Dominant eigenvalue magnitude of a symmetric matrix, brute force."""
    rng = np.random.default_rng(7)
    v = rng.standard_normal(m.shape[0])
    for _ in range(iters):
        w = m @ v
        norm = np.sqrt(w @ w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return float(abs(v @ (m @ v)))


def elimination_det(m: np.ndarray) -> complex:
    """Determinant via Gaussian elimination; supports complex entries."""
    a = np.array(m, dtype=complex)
    n = a.shape[0]
    det = 1.0 + 0.0j
    for k in range(n):
        pivot_row = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[pivot_row, k]) == 0.0:
            return 0.0j
        if pivot_row != k:
            a[[k, pivot_row]] = a[[pivot_row, k]]
            det = -det
        det *= a[k, k]
        a[k + 1:, k:] -= np.outer(a[k + 1:, k] / a[k, k], a[k, k:])
    return det


# ---------------------------------------------------------------- sym_eigen

def test_sym_eigen_identity():
    eig = linalg.sym_eigen(np.eye(4))
    assert np.allclose(eig.values, [1, 1, 1, 1], atol=1e-14)


def test_sym_eigen_ring_laplacian_spectrum():
    # Roots of det(L - lambda I) for the 4-ring, expanded by hand: 0, 2, 2, 4.
    eig = linalg.sym_eigen(RING4_LAPLACIAN)
    assert np.allclose(eig.values, [0.0, 2.0, 2.0, 4.0], atol=1e-10)
    # Brute-force cross-check of the dominant eigenvalue.
    assert power_iteration_lambda_max(RING4_LAPLACIAN) == pytest.approx(4.0, abs=1e-9)


def test_sym_eigen_diagonal_attack_matrix():
    eig = linalg.sym_eigen(np.diag([-5.0, -3.0, -5.0, -3.0]))
    assert np.allclose(eig.values, [-5.0, -5.0, -3.0, -3.0], atol=1e-14)


@pytest.mark.parametrize("n,seed", [(2, 0), (5, 1), (8, 2), (16, 3)])
def test_sym_eigen_reconstruction_and_orthonormality(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    m = m + m.T
    eig = linalg.sym_eigen(m)
    v = eig.vectors
    assert linalg.frobenius(v.T @ v - np.eye(n)) <= 1e-10
    recon = v @ np.diag(eig.values) @ v.T
    assert linalg.frobenius(recon - m) <= 1e-9 * linalg.frobenius(m)
    for k in range(n):
        resid = m @ v[:, k] - eig.values[k] * v[:, k]
        assert np.abs(resid).max() <= 1e-10 * linalg.frobenius(m)
    assert np.all(np.diff(eig.values) >= -1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_sym_eigen_trace_equals_eigenvalue_sum(seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((6, 6))
    m = m + m.T
    eig = linalg.sym_eigen(m)
    assert abs(eig.values.sum() - np.trace(m)) <= 1e-9 * linalg.frobenius(m)


def test_sym_eigen_rejects_bad_input():
    with pytest.raises(ShapeError):
        linalg.sym_eigen(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        linalg.sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


# ------------------------------------------------------------ operator_norm

def test_operator_norm_basics():
    assert linalg.operator_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-12)
    assert linalg.operator_norm(np.zeros((4, 2))) == 0.0
    assert linalg.operator_norm(RING4_LAPLACIAN) == pytest.approx(4.0, abs=1e-10)


def test_operator_norm_rectangular_against_power_iteration():
    rng = np.random.default_rng(11)
    m = rng.standard_normal((5, 3))
    gram = m.T @ m
    expected = np.sqrt(power_iteration_lambda_max(gram))
    assert linalg.operator_norm(m) == pytest.approx(expected, rel=1e-8)


# ------------------------------------------------------------------- kron

def test_kron_identity_blocks():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((3, 3))
    block = linalg.kron(np.eye(2), m)
    assert np.allclose(block[:3, :3], m)
    assert np.allclose(block[3:, 3:], m)
    assert np.allclose(block[:3, 3:], 0.0)
    assert np.array_equal(linalg.kron(np.array([[1.0]]), m), m)


def test_kron_reproduces_blockwise_coupling_matrix():
    beta = 2.0
    a = -(RING4_LAPLACIAN + np.diag([1.0, 0, 0, 0]))
    phi = np.array([[1.0, beta], [-beta, 1.0]])
    blockwise = np.block([[a, beta * a], [-beta * a, a]])
    assert np.array_equal(linalg.kron(phi, a), blockwise)


@pytest.mark.parametrize("seed", range(3))
def test_kron_operator_norm_is_multiplicative(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 2))
    b = rng.standard_normal((2, 4))
    product = linalg.operator_norm(a) * linalg.operator_norm(b)
    assert linalg.operator_norm(linalg.kron(a, b)) == pytest.approx(product, rel=1e-9)


@pytest.mark.parametrize("beta", [0.5, 2.0])
def test_kron_eigenvalue_product_law(beta):
    """Every product of factor eigenvalues is a root of the characteristic
    polynomial of the Kronecker product."""
    phi = np.array([[1.0, beta], [-beta, 1.0]])
    phi_eigs = [1 + 1j * beta, 1 - 1j * beta]
    s = RING4_LAPLACIAN + np.diag([1.0, 0, 0, 0])
    s_eigs = linalg.sym_eigen(s).values
    k = linalg.kron(phi, s)
    scale = max(abs(elimination_det(k - 2.0 * np.eye(8))), 1.0)
    for mu in phi_eigs:
        for lam in s_eigs:
            value = elimination_det(k - (mu * lam) * np.eye(8))
            assert abs(value) <= 1e-6 * scale


# ---------------------------------------------------------------- mat_exp

def test_mat_exp_apply_zero_matrix_and_scalar():
    x0 = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(linalg.mat_exp_apply(np.zeros((3, 3)), 5.0, x0), x0)
    out = linalg.mat_exp_apply(np.array([[-1.0]]), 1.0, np.array([1.0]))
    assert out[0] == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_mat_exp_apply_matches_fine_step_rk4():
    from conftest import naive_rk4

    beta = 2.0
    a = -(RING4_LAPLACIAN + np.diag([1.0, 0, 0, 0]))
    k = linalg.kron(np.array([[1.0, beta], [-beta, 1.0]]), a)
    rng = np.random.default_rng(5)
    x0 = rng.standard_normal(8)
    reference = naive_rk4(lambda t, x: k @ x, x0, 0.0, 1.0, 1e-4)
    out = linalg.mat_exp_apply(k, 1.0, x0)
    assert np.abs(out - reference).max() <= 1e-7


@pytest.mark.parametrize("seed", range(3))
def test_mat_exp_semigroup_property(seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((4, 4))
    x0 = rng.standard_normal(4)
    s, t = 0.7, 1.9
    once = linalg.mat_exp_apply(m, s + t, x0)
    twice = linalg.mat_exp_apply(m, s, linalg.mat_exp_apply(m, t, x0))
    assert np.abs(once - twice).max() <= 1e-8 * max(1.0, np.abs(once).max())


def test_mat_exp_domain_errors():
    with pytest.raises(DomainError):
        linalg.mat_exp_apply(np.eye(2), -1.0, np.ones(2))
    with pytest.raises(DomainError):
        linalg.mat_exp_apply(np.eye(2) * 1e22, 1.0, np.ones(2))


# ------------------------------------------------------------------- solve

def test_solve_identity_and_residual():
    b = np.array([3.0, -1.0, 2.0])
    assert np.array_equal(linalg.solve(np.eye(3), b), b)
    rng = np.random.default_rng(9)
    m = rng.standard_normal((6, 6)) + 6 * np.eye(6)
    x = linalg.solve(m, rng.standard_normal(6))
    # residual bounded as promised by the elimination contract
    b = m @ x
    x2 = linalg.solve(m, b)
    resid = np.sqrt(((m @ x2 - b) ** 2).sum())
    bound = 1e-9 * (linalg.operator_norm(m) * np.sqrt((x2 ** 2).sum()) + np.sqrt((b ** 2).sum()))
    assert resid <= bound


def test_solve_singular_laplacian_raises():
    with pytest.raises(SingularMatrixError):
        linalg.solve(RING4_LAPLACIAN, np.ones(4))


def test_solve_m_matrix_gives_positive_solution():
    # -A = L + G is an M-matrix, so (-A)^-1 is entrywise nonnegative and
    # the solution of (-A) x = 1 is strictly positive.
    neg_a = RING4_LAPLACIAN + np.diag([1.0, 0, 0, 0])
    x = linalg.solve(neg_a, np.ones(4))
    assert np.all(x > 0)


def test_solve_multiple_right_hand_sides():
    m = np.array([[2.0, 1.0], [1.0, 3.0]])
    inv = linalg.solve(m, np.eye(2))
    assert np.allclose(m @ inv, np.eye(2), atol=1e-12)
    assert np.allclose(linalg.inverse(m), inv)
