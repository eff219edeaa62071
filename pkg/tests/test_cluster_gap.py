"""Tests for the worst-direction gap estimate and subspace gaps."""
import numpy as np
import pytest
import scipy.linalg as sla

from clustergap.cluster_gap import (
    assemble_GM,
    ehat,
    estimate_cluster_gap,
    subspace_gap,
    worst_direction,
)
from clustergap.dense_oracle import euclidean_gap
from clustergap.fem_core import FeSpace, GalerkinResolvent, mixed_h1_gram
from clustergap.feast_solver import feast_iterate
from clustergap.filters import ContourCircle, butterworth
from clustergap.mesh2d import structured_square
from clustergap.source_estimators import ResidualEstimator, local_norms

PI = np.pi


def _spd(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


class TestSubspaceGap:
    def test_rotation(self):
        a = 0.4
        assert subspace_gap([[1], [0]], [[np.cos(a)], [np.sin(a)]]) == pytest.approx(np.sin(a))

    def test_matches_euclidean_oracle(self):
        rng = np.random.default_rng(1)
        U, W = rng.standard_normal((2, 7, 3)) + 1j * rng.standard_normal((2, 7, 3))
        assert subspace_gap(U, W) == pytest.approx(euclidean_gap(U, W), abs=1e-12)

    def test_gram_changes_geometry(self):
        G = _spd(5, 2)
        C = np.linalg.cholesky(G)
        rng = np.random.default_rng(3)
        U, W = rng.standard_normal((2, 5, 2))
        # V-gap equals the Euclidean gap of the Cholesky-transformed spaces
        assert subspace_gap(U, W, G) == pytest.approx(euclidean_gap(C.T @ U, C.T @ W), abs=1e-12)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(4)
        U, W = rng.standard_normal((6, 2)), rng.standard_normal((6, 3))
        g = subspace_gap(U, W)
        assert g == subspace_gap(W, U) == 1.0
        assert subspace_gap(U, U @ rng.standard_normal((2, 2))) < 1e-7

    def test_dependent_basis(self):
        with pytest.raises(ValueError):
            subspace_gap(np.ones((3, 2)), np.eye(3)[:, :1])


class TestWorstDirection:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_generalized_eigh(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        G = X @ X.conj().T
        M = _spd(4, seed + 10).astype(complex)
        lam, x = worst_direction(G, M)
        assert lam == pytest.approx(sla.eigh(G, M, eigvals_only=True)[-1], rel=1e-12)
        np.testing.assert_allclose(G @ x, lam * (M @ x), atol=1e-10 * lam * np.linalg.norm(x))

    def test_singular_M(self):
        with pytest.raises(np.linalg.LinAlgError):
            worst_direction(np.eye(2), np.ones((2, 2)))

    def test_ehat_unit_norm(self):
        G = _spd(4, 0)
        e = ehat(np.eye(4)[:, :2], np.array([1.0, 2j]), G)
        assert np.vdot(e, G @ e).real == pytest.approx(1.0)
        with pytest.raises(ValueError):
            ehat(np.eye(3)[:, :1], np.zeros(1))


@pytest.fixture(scope="module")
def run():
    V = FeSpace(structured_square(8), 2)
    B = GalerkinResolvent(V)
    c = ContourCircle(5 * PI**2, 5, 4)
    f = butterworth(c)
    r = feast_iterate(B, f, c, 4)
    est = ResidualEstimator(f, B)
    return V, r, est, estimate_cluster_gap(r.basis, est, V.h1_gram())


class TestEstimateClusterGap:
    def test_consistency(self, run):
        V, r, est, g = run
        assert g.lambda_hat == pytest.approx(g.eta_global**2, rel=1e-10)
        assert g.eta_l2 == pytest.approx(g.eta_global, rel=1e-10)
        assert g.eta_max == local_norms(est(g.ehat)).max()

    def test_worst_over_basis_vectors(self, run):
        V, r, est, g = run
        for i in range(r.dim):
            assert est(r.basis[:, i]).norm() <= g.eta_global * (1 + 1e-10)
        # random unit directions in the space never exceed the maximum
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal(r.dim) + 1j * rng.standard_normal(r.dim)
            assert est(ehat(r.basis, x, V.h1_gram())).norm() <= g.eta_global * (1 + 1e-10)

    def test_G_M_hermitian(self, run):
        V, r, est, g = run
        np.testing.assert_allclose(g.G, g.G.conj().T, atol=1e-14)
        np.testing.assert_allclose(g.M, np.eye(r.dim), atol=1e-10)

    def test_callable_estimator(self, run):
        V, r, est, g = run
        g2 = estimate_cluster_gap(r.basis, lambda v: est(v), V.h1_gram())
        assert g2.eta_global == pytest.approx(g.eta_global, rel=1e-10)

    def test_bounds_true_gap(self, run):
        V, r, est, g = run
        fs = [
            lambda x, y: np.sin(PI * x) * np.sin(2 * PI * y),
            lambda x, y: np.sin(2 * PI * x) * np.sin(PI * y),
        ]
        gs = [
            lambda x, y: (PI * np.cos(PI * x) * np.sin(2 * PI * y), 2 * PI * np.sin(PI * x) * np.cos(2 * PI * y)),
            lambda x, y: (2 * PI * np.cos(2 * PI * x) * np.sin(PI * y), PI * np.sin(2 * PI * x) * np.cos(PI * y)),
        ]
        Gx = mixed_h1_gram(V, r.basis, fs, gs)
        gap = subspace_gap(np.eye(4)[:, :2], np.eye(4)[:, 2:], Gx)
        assert 0.1 * g.eta_global < gap < g.eta_global

    def test_report(self, run):
        g = run[3]
        txt = g.report(per_element=True)
        assert txt.startswith("lambda_hat")
        assert len(txt.splitlines()) == 5 + len(g.eta_local)

    def test_assemble_needs_fields(self):
        with pytest.raises(ValueError):
            assemble_GM(np.eye(3)[:, :2], [])


class TestSpecExamples:
    def test_diag_pencil(self):
        lam, x = worst_direction(np.diag([1.0, 4.0]), np.eye(2))
        assert lam == pytest.approx(4.0)
        assert abs(abs(x[1]) - 1) < 1e-12 and abs(x[0]) < 1e-12

    def test_G_equals_M(self):
        M = _spd(3, 5)
        assert worst_direction(M, M)[0] == pytest.approx(1.0)

    def test_rayleigh_sampling_oracle(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        G = X @ X.conj().T
        M = _spd(5, 8)
        lam, _ = worst_direction(G, M)
        Z = rng.standard_normal((5, 100_000)) + 1j * rng.standard_normal((5, 100_000))
        q = np.einsum("in,ij,jn->n", Z.conj(), G, Z).real / np.einsum("in,ij,jn->n", Z.conj(), M, Z).real
        assert q.max() <= lam * (1 + 1e-12)
        # the sampled maximum approaches lam from below
        assert q.max() > 0.9 * lam

    def test_hausdorff_brute_force_and_metric(self):
        rng = np.random.default_rng(9)
        from clustergap.feast_solver import hausdorff

        for _ in range(20):
            A, B, C = (rng.standard_normal(k) + 1j * rng.standard_normal(k) for k in rng.integers(1, 6, 3))
            d1 = max(min(abs(a - b) for b in B) for a in A)
            d2 = max(min(abs(a - b) for a in A) for b in B)
            assert hausdorff(A, B) == pytest.approx(max(d1, d2), abs=1e-15)
            assert hausdorff(A, B) == hausdorff(B, A)
            assert hausdorff(A, A) == 0
            assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-14
        assert hausdorff([0], [3, 4j]) == 4

    def test_zero_estimator(self):
        from clustergap.source_estimators import EstimatorField, EstimatorPart
        import scipy.sparse as sp

        owner = sp.identity(2, format="csr")

        def zero(v):
            return EstimatorField(
                (EstimatorPart("z", 0j, np.zeros((2, 1, 1)), np.ones((2, 1)), owner),), 2
            )

        g = estimate_cluster_gap(np.eye(3)[:, :2], zero)
        assert g.lambda_hat == 0 and g.eta_global == 0 and g.eta_max == 0

    def test_rotation_invariance(self, run):
        V, r, est, g = run
        rng = np.random.default_rng(1)
        U, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        g2 = estimate_cluster_gap(r.basis @ U, est, V.h1_gram())
        assert abs(g2.eta_global - g.eta_global) < 1e-8 * g.eta_global
        np.testing.assert_allclose(g2.G, U.conj().T @ g.G @ U, atol=1e-10 * np.abs(g.G).max())
        # the worst direction is the same up to a unimodular factor
        assert abs(abs(np.vdot(g.ehat, V.h1_gram() @ g2.ehat)) - 1) < 1e-8
