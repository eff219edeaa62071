"""Eigenspace gap estimation for a computed cluster.

Given a basis ``e^1..e^L`` of the computed eigenspace and a source
estimator ``E``, the worst direction of ``E`` on the space is found from the
small Hermitian pencil ``G x = lambda M x`` with
``G_ij = (E e^j, E e^i)_Y`` and ``M_ij = (e^j, e^i)_V``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .feast_solver import hausdorff
from .source_estimators import EstimatorField, local_norms, y_inner

__all__ = [
    "GapEstimate",
    "assemble_GM",
    "worst_direction",
    "ehat",
    "subspace_gap",
    "hausdorff",
    "estimate_cluster_gap",
]


@dataclass
class GapEstimate:
    G: np.ndarray
    M: np.ndarray
    lambda_hat: float
    xhat: np.ndarray
    ehat: np.ndarray
    eta_global: float
    eta_local: np.ndarray
    eta_max: float
    eta_l2: float

    def report(self, per_element: bool = False) -> str:
        lines = [
            f"lambda_hat  {self.lambda_hat:.10e}",
            f"eta_global  {self.eta_global:.10e}",
            f"eta_max     {self.eta_max:.10e}",
            f"eta_l2      {self.eta_l2:.10e}",
        ]
        if per_element:
            lines.append("element eta_K")
            lines += [f"{k} {v:.10e}" for k, v in enumerate(self.eta_local)]
        return "\n".join(lines)


def _vapply(gram, X):
    return X if gram is None else gram @ X


def assemble_GM(basis, fields, gram=None):
    """``G[i, j] = (E e^j, E e^i)_Y`` and ``M[i, j] = (e^j, e^i)_V``.

    ``basis`` holds the ``e^i`` as columns; ``gram`` is the V Gram matrix
    (identity if omitted).
    """
    basis = np.asarray(basis, dtype=complex)
    L = basis.shape[1]
    if L < 1 or len(fields) != L:
        raise ValueError("need one estimator field per basis vector (L >= 1)")
    G = np.empty((L, L), dtype=complex)
    for i in range(L):
        for j in range(i, L):
            G[i, j] = y_inner(fields[j], fields[i])
            G[j, i] = np.conj(G[i, j])
    M = basis.conj().T @ _vapply(gram, basis)
    M = 0.5 * (M + M.conj().T)
    return G, M


def worst_direction(G, M):
    """Largest eigenpair of the Hermitian pencil ``G x = lambda M x``.

    Reduced with ``M = C C^H`` to the Hermitian matrix ``C^{-1} G C^{-H}``.
    """
    G = np.asarray(G, dtype=complex)
    M = np.asarray(M, dtype=complex)
    try:
        C = np.linalg.cholesky(0.5 * (M + M.conj().T))
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            "M is not positive definite; the basis is linearly dependent"
        ) from None
    Ci_G = sla.solve_triangular(C, G, lower=True)
    H = sla.solve_triangular(C, Ci_G.conj().T, lower=True).conj().T
    H = 0.5 * (H + H.conj().T)
    lam, Y = np.linalg.eigh(H)
    x = sla.solve_triangular(C.conj().T, Y[:, -1], lower=False)
    return max(float(lam[-1]), 0.0), x


def ehat(basis, xhat, gram=None) -> np.ndarray:
    """``sum_i xhat_i e^i`` normalized to unit V-norm."""
    e = np.asarray(basis, dtype=complex) @ np.asarray(xhat, dtype=complex)
    nrm = np.sqrt(abs(np.vdot(e, _vapply(gram, e))))
    if nrm == 0:
        raise ValueError("the combination of basis vectors vanishes")
    return e / nrm


def _orthonormal(X, gram):
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1:
        X = X[:, None]
    for _ in range(2):
        S = X.conj().T @ _vapply(gram, X)
        S = 0.5 * (S + S.conj().T)
        try:
            C = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise ValueError("basis is linearly dependent") from None
        if np.abs(np.diag(C)).min() ** 2 < 1e-14 * np.abs(np.diag(S)).max():
            raise ValueError("basis is linearly dependent")
        X = sla.solve_triangular(C, X.conj().T, lower=True).conj().T
    return X


def _directed(U, W, gram):
    R = U - W @ (W.conj().T @ _vapply(gram, U))
    R = R - W @ (W.conj().T @ _vapply(gram, R))
    S = R.conj().T @ _vapply(gram, R)
    return float(np.sqrt(max(np.linalg.eigvalsh(0.5 * (S + S.conj().T)).max(), 0.0)))


def subspace_gap(U, W, gram=None) -> float:
    """``max(delta(U, W), delta(W, U))`` with ``delta(U, W) = ||(I - Q_W) Q_U||_V``.

    Columns of ``U`` and ``W`` span the two spaces; ``gram`` is the V Gram
    matrix (Euclidean product if omitted).
    """
    U = _orthonormal(U, gram)
    W = _orthonormal(W, gram)
    g = max(_directed(U, W, gram), _directed(W, U, gram))
    return float(min(max(g, 0.0), 1.0))


def _fields(estimator, basis):
    if hasattr(estimator, "fields"):
        return estimator.fields(basis)
    return [estimator(basis[:, i]) for i in range(basis.shape[1])]


def estimate_cluster_gap(basis, estimator, gram=None) -> GapEstimate:
    """Run the estimator on the basis, find the worst direction, and localize.

    ``estimator`` maps a coefficient vector to an :class:`EstimatorField`
    (an optional ``fields(block)`` method is used for batched evaluation).
    """
    basis = np.asarray(basis, dtype=complex)
    if basis.ndim != 2 or basis.shape[1] == 0:
        raise ValueError("basis must be a non-empty block of columns")
    fields = _fields(estimator, basis)
    G, M = assemble_GM(basis, fields, gram)
    lam, x = worst_direction(G, M)
    e = ehat(basis, x, gram)
    field: EstimatorField = _fields(estimator, e[:, None])[0]
    eta_K = local_norms(field)
    eta_global = field.norm()
    return GapEstimate(
        G=G,
        M=M,
        lambda_hat=lam,
        xhat=x,
        ehat=e,
        eta_global=eta_global,
        eta_local=eta_K,
        eta_max=float(eta_K.max()) if eta_K.size else 0.0,
        eta_l2=float(np.sqrt(np.sum(eta_K**2))),
    )
