import numpy as np
import pytest

from zsar.linalg import (DegenerateAttributesError, DimensionError, KernelSpec,
                         SingularPencilError, kernel_matrix, median_bandwidth,
                         ridge_solve, solve_sylvester, sym_eig)


def random_spd(rng, n, min_eig=0.1):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    evals = rng.uniform(min_eig, 3.0, size=n)
    return q @ np.diag(evals) @ q.T


class TestSymEig:
    def test_identity(self):
        evals, evecs = sym_eig(np.eye(3))
        assert np.allclose(evals, [1.0, 1.0, 1.0])
        assert np.allclose(evecs.T @ evecs, np.eye(3), atol=1e-12)

    def test_diagonal_sorted_ascending(self):
        evals, evecs = sym_eig(np.diag([4.0, 1.0]))
        assert np.allclose(evals, [1.0, 4.0])
        # axis-aligned up to sign
        assert np.allclose(np.abs(evecs), np.eye(2)[:, ::-1], atol=1e-12)

    def test_reconstruction_residual(self):
        rng = np.random.default_rng(0)
        m = rng.normal(size=(8, 8))
        m = m + m.T
        evals, evecs = sym_eig(m)
        residual = np.linalg.norm(evecs @ np.diag(evals) @ evecs.T - m)
        assert residual <= 1e-10

    def test_orthonormality_invariant(self):
        rng = np.random.default_rng(1)
        for n in (2, 5, 17):
            m = rng.normal(size=(n, n))
            _, v = sym_eig(m + m.T)
            assert np.linalg.norm(v.T @ v - np.eye(n)) <= 1e-9 * n

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            sym_eig(np.ones((2, 3)))


class TestSolveSylvester:
    def test_identity_operands(self):
        c = np.array([[2.0, 4.0], [6.0, 8.0]])
        w = solve_sylvester(np.eye(2), np.eye(2), c)
        assert np.allclose(w, [[1.0, 2.0], [3.0, 4.0]], atol=1e-12)

    def test_diagonal_operands(self):
        w = solve_sylvester(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]), np.ones((2, 2)))
        assert np.allclose(w, [[0.25, 0.2], [0.2, 1.0 / 6.0]], atol=1e-12)

    def test_random_residual(self):
        rng = np.random.default_rng(2)
        a = random_spd(rng, 20, min_eig=0.0)
        b = random_spd(rng, 15)
        c = rng.normal(size=(20, 15))
        w = solve_sylvester(a, b, c)
        assert np.linalg.norm(a @ w + w @ b - c) <= 1e-8 * (1 + np.linalg.norm(c))

    def test_linearity(self):
        rng = np.random.default_rng(3)
        a = random_spd(rng, 6, min_eig=0.0)
        b = random_spd(rng, 4)
        c1 = rng.normal(size=(6, 4))
        c2 = rng.normal(size=(6, 4))
        alpha, beta = 1.7, -0.3
        lhs = solve_sylvester(a, b, alpha * c1 + beta * c2)
        rhs = alpha * solve_sylvester(a, b, c1) + beta * solve_sylvester(a, b, c2)
        assert np.linalg.norm(lhs - rhs) <= 1e-8

    def test_singular_pencil(self):
        with pytest.raises(SingularPencilError):
            solve_sylvester(np.zeros((2, 2)), np.diag([1e-13, 1.0]), np.ones((2, 2)))

    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            solve_sylvester(np.eye(2), np.eye(3), np.ones((3, 3)))


class TestKernelMatrix:
    def test_rbf_zero_distance(self):
        a = np.array([[0.3, -1.2]])
        k = kernel_matrix(a, a, KernelSpec("rbf", 1.5))
        assert k.shape == (1, 1)
        assert k[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_rbf_analytic_value(self):
        k = kernel_matrix(np.array([[0.0, 0.0]]), np.array([[0.0, 2.0]]),
                          KernelSpec("rbf", np.sqrt(2.0)))
        assert k[0, 0] == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_linear_orthonormal_rows(self):
        k = kernel_matrix(np.eye(4), np.eye(4), KernelSpec("linear"))
        assert np.allclose(k, np.eye(4), atol=1e-15)

    def test_self_kernel_psd(self):
        rng = np.random.default_rng(4)
        attrs = rng.normal(size=(12, 5))
        for spec in (KernelSpec("rbf", 2.0), KernelSpec("linear")):
            k = kernel_matrix(attrs, attrs, spec)
            evals = np.linalg.eigvalsh(0.5 * (k + k.T))
            assert evals.min() >= -1e-9 * np.trace(k)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            kernel_matrix(np.ones((2, 3)), np.ones((2, 4)), KernelSpec("linear"))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            KernelSpec("rbf")
        with pytest.raises(ValueError):
            KernelSpec("rbf", -1.0)
        with pytest.raises(ValueError):
            KernelSpec("poly", 1.0)


class TestMedianBandwidth:
    def test_single_pair(self):
        assert median_bandwidth(np.array([[0.0], [1.0]])) == pytest.approx(1.0)

    def test_three_rows(self):
        # pairwise distances {1, 3, 2}, median 2
        assert median_bandwidth(np.array([[0.0], [1.0], [3.0]])) == pytest.approx(2.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        attrs = rng.normal(size=(50, 3))
        dists = [np.linalg.norm(attrs[i] - attrs[j])
                 for i in range(50) for j in range(i + 1, 50)]
        assert len(dists) == 1225
        assert median_bandwidth(attrs) == pytest.approx(np.median(dists), rel=1e-12)

    def test_degenerate_rows(self):
        with pytest.raises(DegenerateAttributesError):
            median_bandwidth(np.ones((4, 2)))


class TestRidgeSolve:
    def test_identity_inputs(self):
        rng = np.random.default_rng(6)
        t = rng.normal(size=(3, 5))
        w = ridge_solve(t, np.eye(5), 1e-12)
        assert np.abs(w - t).max() <= 1e-6

    def test_exact_linear_relation(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(4, 4)) + 4 * np.eye(4)
        w = ridge_solve(2.0 * x, x, 1e-10)
        assert np.abs(w - 2.0 * np.eye(4)).max() <= 1e-5

    def test_local_optimality(self):
        rng = np.random.default_rng(8)
        t = rng.normal(size=(6, 40))
        x = rng.normal(size=(10, 40))
        lam = 0.1
        w = ridge_solve(t, x, lam)

        def objective(wm):
            return np.linalg.norm(t - wm @ x) ** 2 + lam * np.linalg.norm(wm) ** 2

        base = objective(w)
        for _ in range(100):
            direction = rng.normal(size=w.shape)
            assert base <= objective(w + 1e-3 * direction) + 1e-12

    def test_lambda_validation(self):
        with pytest.raises(ValueError):
            ridge_solve(np.ones((2, 3)), np.ones((2, 3)), 0.0)
