"""Tests for the filtered subspace iteration."""
import numpy as np
import pytest
import scipy.linalg as sla

from clustergap.cases import JORDAN_3X3
from clustergap.dense_oracle import euclidean_gap, generalized_eigenspace, random_jordan_matrix
from clustergap.fem_core import FeSpace, GalerkinResolvent, SingularSystemError
from clustergap.feast_solver import (
    DenseBackend,
    FeastNotConverged,
    NoSpectrumInContour,
    apply_filter_block,
    feast_iterate,
    hausdorff,
    v_orthonormalize,
)
from clustergap.filters import ContourCircle, butterworth, cayley
from clustergap.mesh2d import structured_square

PI = np.pi


def _normal(eigs, seed=0):
    rng = np.random.default_rng(seed)
    n = len(eigs)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return U @ np.diag(eigs) @ U.conj().T, U


class TestHelpers:
    def test_hausdorff(self):
        assert hausdorff([0, 1], [0]) == 1
        assert hausdorff([1j], [1j]) == 0
        assert hausdorff([0, 3], [1]) == 2
        with pytest.raises(ValueError):
            hausdorff([], [1])

    def test_v_orthonormalize(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((6, 6))
        G = A @ A.T + 6 * np.eye(6)
        Y = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        Q = v_orthonormalize(Y, G)
        np.testing.assert_allclose(Q.conj().T @ G @ Q, np.eye(3), atol=1e-12)
        assert euclidean_gap(Q, Y) < 1e-12

    def test_v_orthonormalize_drops_dependent(self):
        Y = np.ones((5, 2))
        assert v_orthonormalize(Y, np.eye(5)).shape[1] == 1

    def test_apply_filter_block_matches_dense(self):
        A, _ = _normal(np.array([1, 2, 3, 4.0]))
        f = butterworth(ContourCircle(2, 1.5, 6))
        Q = np.eye(4)
        ref = f.omega0 * np.eye(4) + sum(
            w * np.linalg.inv(z * np.eye(4) - A) for z, w in zip(f.poles, f.weights)
        )
        np.testing.assert_allclose(apply_filter_block(DenseBackend(A), f, Q), ref, atol=1e-12)


class TestDense:
    def test_normal_matrix_cluster(self):
        eigs = np.array([0.1, -0.2 + 0.1j, 0.3j, 3, 4, -5, 6j, 7])
        A, U = _normal(eigs)
        c = ContourCircle(0, 1, 8)
        r = feast_iterate(DenseBackend(A), butterworth(c), c, m=4)
        assert r.converged and r.dim == 3
        assert hausdorff(r.ritz_values, eigs[:3]) < 1e-10
        assert euclidean_gap(r.basis, U[:, :3]) < 1e-8

    def test_jordan_block_inside(self):
        c = ContourCircle(0.5, 0.3, 8)
        r = feast_iterate(DenseBackend(JORDAN_3X3), butterworth(c), c, m=3)
        assert r.dim == 2
        assert euclidean_gap(r.basis, generalized_eigenspace(JORDAN_3X3, 0.5)) < 1e-6
        assert hausdorff(r.ritz_values, [0.5]) < 1e-6

    @pytest.mark.parametrize("seed", range(3))
    def test_defective_cluster(self, seed):
        rng = np.random.default_rng(seed)
        A, P, _ = random_jordan_matrix([(0.2j, 3), (-0.1, 1), (2.5, 2), (-3.0, 2)], rng)
        c = ContourCircle(0, 1, 8)
        r = feast_iterate(DenseBackend(A), butterworth(c), c, m=5, maxit=80)
        assert r.dim == 4
        assert euclidean_gap(r.basis, P[:, :4]) < 1e-4

    def test_residual_history_decreases(self):
        eigs = np.array([0.5, 1.5, 3, 4, 5, 6])
        A, _ = _normal(eigs, 4)
        c = ContourCircle(0.8, 1, 4)
        r = feast_iterate(DenseBackend(A), butterworth(c), c, m=3)
        h = np.array(r.residual_history)
        assert len(h) == r.iterations
        assert h[-1] < h[0]

    def test_reproducible_seed(self):
        A, _ = _normal(np.arange(1.0, 9.0))
        c = ContourCircle(2.5, 1, 8)
        r1 = feast_iterate(DenseBackend(A), butterworth(c), c, 3, seed=7)
        r2 = feast_iterate(DenseBackend(A), butterworth(c), c, 3, seed=7)
        np.testing.assert_array_equal(r1.basis, r2.basis)
        assert r1.seed == 7

    def test_no_spectrum(self):
        A, _ = _normal(np.array([5.0, 6, 7, 8]))
        c = ContourCircle(0, 1, 8)
        with pytest.raises(NoSpectrumInContour):
            feast_iterate(DenseBackend(A), butterworth(c), c, 2)

    def test_not_converged_carries_history(self):
        A, _ = _normal(np.array([0.5, 1.05, 1.1, 3, 4]))
        c = ContourCircle(0, 1, 2)
        with pytest.raises(FeastNotConverged) as info:
            feast_iterate(DenseBackend(A), butterworth(c), c, 2, maxit=3, tol=1e-15)
        assert len(info.value.history) >= 2
        assert info.value.result.converged is False

    def test_pole_on_eigenvalue(self):
        c = ContourCircle(0, 1, 4)
        pole = butterworth(c).poles[0]
        A = np.diag([pole, 5.0, 6.0])
        with pytest.raises(SingularSystemError):
            feast_iterate(DenseBackend(A), butterworth(c), c, 2)

    def test_block_size_checked(self):
        with pytest.raises(ValueError):
            feast_iterate(DenseBackend(np.eye(3)), cayley(), ContourCircle(0, 1, 4), 4)


class TestFem:
    def test_double_eigenvalue_of_square(self):
        V = FeSpace(structured_square(8), 2)
        B = GalerkinResolvent(V)
        c = ContourCircle(5 * PI**2, 5, 4)
        r = feast_iterate(B, butterworth(c), c, 4)
        assert r.dim == 2
        np.testing.assert_allclose(r.basis.conj().T @ V.h1_gram() @ r.basis, np.eye(2), atol=1e-10)
        ev = sla.eigh(B.K.toarray().real, B.M.toarray(), eigvals_only=True)
        inside = ev[np.abs(ev - 5 * PI**2) < 5]
        assert hausdorff(r.ritz_values, inside) < 1e-8
        assert hausdorff(r.ritz_values, [5 * PI**2]) < 0.1


class TestExamples:
    def test_filter_block_matches_oracle(self):
        from clustergap.cases import jordan_filter
        from clustergap.dense_oracle import apply_filter

        B = DenseBackend(JORDAN_3X3)
        out = apply_filter_block(B, jordan_filter(), np.eye(3))
        np.testing.assert_allclose(out, apply_filter(JORDAN_3X3, jordan_filter()), atol=1e-12)
        assert np.all(apply_filter_block(B, jordan_filter(), np.zeros((3, 2))) == 0)

    def test_filter_block_linear(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((6, 6))
        B = DenseBackend(A)
        f = butterworth(ContourCircle(0, 1, 6))
        Q1, Q2 = rng.standard_normal((2, 6, 2))
        a, b = 0.5 - 1j, 2.0
        lhs = apply_filter_block(B, f, a * Q1 + b * Q2)
        rhs = a * apply_filter_block(B, f, Q1) + b * apply_filter_block(B, f, Q2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_jordan_whole_space(self):
        c = ContourCircle(0, 0.8, 4)
        r = feast_iterate(DenseBackend(JORDAN_3X3), butterworth(c), c, 3)
        assert r.dim == 3
        assert euclidean_gap(r.basis, np.eye(3)) < 1e-10
        assert hausdorff(r.ritz_values, [-0.5, 0.5]) < 1e-6

    def test_oversampling_does_not_change_cluster(self):
        V = FeSpace(structured_square(6), 2)
        B = GalerkinResolvent(V)
        c = ContourCircle(5 * PI**2, 5, 4)
        r4 = feast_iterate(B, butterworth(c), c, 4)
        r5 = feast_iterate(B, butterworth(c), c, 5)
        assert r4.dim == r5.dim == 2
        assert hausdorff(r4.ritz_values, r5.ritz_values) < 1e-8
        h = r4.residual_history
        assert h[-1] < h[0]
