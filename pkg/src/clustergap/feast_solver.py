"""Filtered subspace iteration (FEAST) with Rayleigh-Ritz extraction.

A backend provides ``solve(z, F)`` for the discrete resolvent
``(z - A_h)^{-1}`` applied to the columns of ``F``, the Gram matrix of the
``V`` inner product, and the matrices ``(K, M)`` of the operator form and
the L2 product used for Rayleigh-Ritz.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .fem_core import COND_LIMIT, SingularSystemError, parallel_map
from .filters import ContourCircle, RationalFilter

__all__ = [
    "FeastNotConverged",
    "NoSpectrumInContour",
    "DenseBackend",
    "ClusterResult",
    "v_orthonormalize",
    "apply_filter_block",
    "feast_iterate",
    "hausdorff",
]


class FeastNotConverged(RuntimeError):
    """Iteration limit reached; ``result`` holds the last iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
        self.history = result.residual_history if result is not None else []


class NoSpectrumInContour(RuntimeError):
    """No Ritz value settles inside the contour."""


class DenseBackend:
    """Resolvent of a small dense matrix, Euclidean inner product."""

    backend = "dense"

    def __init__(self, A):
        self.A = np.asarray(A, dtype=complex)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("dense backend needs a square matrix")
        self._lu = {}
        self._lock = threading.Lock()

    @property
    def dof_count(self) -> int:
        return self.A.shape[0]

    def gram(self):
        return sp.identity(self.dof_count, dtype=float, format="csr")

    def operator_matrices(self):
        return self.A, np.eye(self.dof_count)

    def _factor(self, z):
        z = complex(z)
        with self._lock:
            f = self._lu.get(z)
        if f is None:
            shifted = z * np.eye(self.dof_count) - self.A
            cond = np.linalg.cond(shifted)
            if not np.isfinite(cond) or cond > COND_LIMIT:
                raise SingularSystemError(
                    f"shifted matrix is numerically singular (condition {cond:.3e})", cond
                )
            f = sla.lu_factor(shifted)
            with self._lock:
                self._lu[z] = f
        return f

    def solve(self, z, F):
        return sla.lu_solve(self._factor(z), np.asarray(F, dtype=complex))


@dataclass
class ClusterResult:
    """Output of :func:`feast_iterate`.

    ``basis`` holds the V-orthonormal basis of ``E_h`` as columns.
    """

    basis: np.ndarray
    ritz_values: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    seed: int = 0
    converged: bool = True

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def _gram_apply(G, X):
    return G @ X


def v_orthonormalize(Y, G, drop_tol: float = 1e-13) -> np.ndarray:
    """Orthonormal basis of ``span(Y)`` in the inner product with Gram matrix ``G``.

    Cholesky-QR applied twice; near-dependent directions are dropped through
    an eigenvalue-based fallback.
    """
    Y = np.asarray(Y, dtype=complex)
    if Y.shape[1] == 0:
        return Y
    for _ in range(2):
        S = Y.conj().T @ _gram_apply(G, Y)
        S = 0.5 * (S + S.conj().T)
        try:
            C = np.linalg.cholesky(S)
            if np.min(np.abs(np.diag(C))) ** 2 < drop_tol * np.max(np.abs(np.diag(S))):
                raise np.linalg.LinAlgError
            # S = C C^H, so Y C^{-H} is G-orthonormal
            Y = sla.solve_triangular(C, Y.conj().T, lower=True).conj().T
        except np.linalg.LinAlgError:
            lam, U = np.linalg.eigh(S)
            keep = lam > drop_tol * lam.max()
            Y = Y @ (U[:, keep] / np.sqrt(lam[keep]))
    return Y


def apply_filter_block(backend, filt: RationalFilter, Q) -> np.ndarray:
    """``omega0 Q + sum_j w_j R_h(z_j) Q``; pole solves may run concurrently."""
    Q = np.asarray(Q, dtype=complex)
    if Q.ndim == 1:
        Q = Q[:, None]
    terms = parallel_map(lambda zj: backend.solve(zj, Q), filt.poles)
    out = filt.omega0 * Q
    for wj, T in zip(filt.weights, terms):
        out = out + wj * T
    return out


def hausdorff(S1, S2) -> float:
    """Hausdorff distance between two non-empty finite subsets of C."""
    a = np.atleast_1d(np.asarray(S1, dtype=complex)).ravel()
    b = np.atleast_1d(np.asarray(S2, dtype=complex)).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff distance needs two non-empty sets")
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _rayleigh_ritz(Q, K, M, contour: ContourCircle, margin: float):
    """Ritz values of the pencil projected on ``span(Q)``, inside-contour first."""
    A = Q.conj().T @ (K @ Q)
    B = Q.conj().T @ (M @ Q)
    inside = lambda al, be: (np.abs(be) > 1e-300) & (
        np.abs(al - contour.center * be) <= contour.radius * (1 + margin) * np.abs(be)
    )
    AA, BB, alpha, beta, _, Z = sla.ordqz(A, B, sort=inside, output="complex")
    k = int(np.sum(inside(alpha, beta)))
    theta = alpha[:k] / beta[:k]
    return theta, Z[:, :k], (A, B)


def _filter_residuals(Y, Q, filt, G, A, B, theta):
    """``max || S_h x - r(theta) x ||_V`` over Ritz pairs ``(theta, x = Q c)``."""
    if theta.size == 0:
        return np.nan
    w, C = sla.eig(A, B)
    out = []
    for t in theta:
        j = np.argmin(np.abs(w - t))
        c = C[:, j] / np.linalg.norm(C[:, j])
        r = Y @ c - filt(w[j]) * (Q @ c)
        out.append(np.sqrt(abs(np.vdot(r, G @ r))))
    return float(max(out))


def feast_iterate(
    backend,
    filt: RationalFilter,
    contour: ContourCircle,
    m: int,
    seed: int = 0,
    tol: float = 1e-10,
    maxit: int = 50,
    margin: float = 0.05,
) -> ClusterResult:
    """Filtered subspace iteration for the eigenvalues inside ``contour``.

    Stops when the Hausdorff distance between consecutive accepted Ritz sets
    falls below ``tol * (1 + |center|)``.
    """
    n = backend.dof_count
    if not 1 <= m <= n:
        raise ValueError(f"block size m={m} must lie in [1, {n}]")
    G = backend.gram()
    K, M = backend.operator_matrices()
    rng = np.random.default_rng(seed)
    Q = v_orthonormalize(rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)), G)
    history = []
    prev = None
    ritz = None
    empty_runs = 0
    threshold = tol * (1 + abs(contour.center))
    for it in range(1, maxit + 1):
        Y = apply_filter_block(backend, filt, Q)
        if ritz is not None:
            history.append(_filter_residuals(Y, Q, filt, G, *ritz))
        Q = v_orthonormalize(Y, G)
        theta, Zk, AB = _rayleigh_ritz(Q, K, M, contour, margin)
        ritz = (AB[0], AB[1], theta)
        if theta.size == 0:
            empty_runs += 1
            if empty_runs >= 2 and it >= 3:
                raise NoSpectrumInContour(
                    f"no Ritz value inside the contour centered at {contour.center} "
                    f"with radius {contour.radius}"
                )
            prev = None
            continue
        empty_runs = 0
        basis = v_orthonormalize(Q @ Zk, G)
        # defective clusters: Ritz values jitter at eps^(1/k) while the space settles
        if (
            prev is not None
            and prev.size == theta.size
            and basis.shape[1] == prev_basis.shape[1]
            and (
                hausdorff(prev, theta) < threshold
                or _directed_gap(basis, prev_basis, G) < tol
            )
        ):
            Y = apply_filter_block(backend, filt, Q)
            history.append(_filter_residuals(Y, Q, filt, G, *ritz))
            return ClusterResult(basis, _sorted(theta), it, history, seed, True)
        prev, prev_basis = theta, basis
    basis = v_orthonormalize(Q @ Zk, G) if theta.size else Q[:, :0]
    result = ClusterResult(basis, _sorted(theta), maxit, history, seed, False)
    raise FeastNotConverged(f"FEAST did not converge in {maxit} iterations", result)


def _directed_gap(X, Y, G) -> float:
    """``||(I - P_Y) X||_V`` for V-orthonormal ``X`` and ``Y``."""
    R = X - Y @ (Y.conj().T @ (G @ X))
    return float(np.sqrt(max(np.linalg.eigvalsh(R.conj().T @ (G @ R)).max(), 0.0)))


def _sorted(theta):
    theta = np.asarray(theta, dtype=complex)
    return theta[np.lexsort((theta.imag, theta.real))]
