"""Dense-matrix ground truth for filters and spectral projectors.

Everything here works on small (n <= 64) complex matrices with plain
LAPACK calls and is deliberately independent of the filter-evaluation and
eigensolver code it is used to check.
"""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla

from .filters import (
    ContourCircle,
    DegenerateFilterError,
    RationalFilter,
    butterworth,
    inverse_image,
)

__all__ = [
    "SingularShiftError",
    "MAX_ORACLE_SIZE",
    "as_dense_operator",
    "orthonormal_basis",
    "generalized_eigenspace",
    "apply_filter",
    "riesz_projector",
    "euclidean_gap",
    "verify_mapping_lemma",
    "multiplicity_sum_check",
    "random_jordan_matrix",
    "random_lemma_instance",
]

MAX_ORACLE_SIZE = 64


class SingularShiftError(np.linalg.LinAlgError):
    """A pole of the filter is (numerically) an eigenvalue of the matrix."""


def as_dense_operator(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_ORACLE_SIZE:
        raise ValueError(f"oracle matrices are limited to n <= {MAX_ORACLE_SIZE}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def orthonormal_basis(V, tol: float = 1e-12) -> np.ndarray:
    """Euclidean orthonormal basis of the column span of ``V``."""
    V = np.asarray(V, dtype=complex)
    if V.size == 0 or V.shape[1] == 0:
        return np.zeros((V.shape[0], 0), dtype=complex)
    return sla.orth(V, rcond=tol)


def _null_space(B: np.ndarray, tol: float) -> np.ndarray:
    if B.shape[0] == 0:
        return np.eye(B.shape[1], dtype=complex)
    u, s, vh = np.linalg.svd(B)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * max(smax, 1.0)))
    return vh[rank:].conj().T


def generalized_eigenspace(A, lam, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the union of ``ker (A - lam)^k`` over ``k``.

    The kernel is grown one power at a time: with ``Q`` spanning the current
    kernel, the next one is spanned by ``Q`` and the vectors ``x`` with
    ``(A - lam) x`` in ``span(Q)``.
    """
    A = as_dense_operator(A)
    n = A.shape[0]
    B = A - lam * np.eye(n)
    scale = max(np.linalg.norm(A, 2), 1.0)
    Q = np.zeros((n, 0), dtype=complex)
    while Q.shape[1] < n:
        # new directions are sought in the orthogonal complement of span(Q)
        Qc = sla.null_space(Q.conj().T) if Q.shape[1] else np.eye(n, dtype=complex)
        proj = B @ Qc - Q @ (Q.conj().T @ (B @ Qc))
        Y = _null_space(proj / scale, tol)
        if Y.shape[1] == 0:
            break
        Q = np.hstack([Q, Qc @ Y])
    return Q


def apply_filter(A, filt: RationalFilter, cond_limit: float = 1e12) -> np.ndarray:
    """``r(A) = omega0 I + sum_j w_j (z_j I - A)^{-1}`` by dense LU solves."""
    A = as_dense_operator(A)
    n = A.shape[0]
    eye = np.eye(n, dtype=complex)
    out = filt.omega0 * eye
    for zj, wj in zip(filt.poles, filt.weights):
        shifted = zj * eye - A
        cond = np.linalg.cond(shifted)
        if not np.isfinite(cond) or cond > cond_limit:
            raise SingularShiftError(
                f"pole {zj} is numerically an eigenvalue (condition {cond:.3e})"
            )
        out = out + wj * np.linalg.solve(shifted, eye)
    return out


def riesz_projector(A, contour: ContourCircle) -> np.ndarray:
    """Trapezoid approximation of ``(2 pi i)^{-1} \\oint (z - A)^{-1} dz``.

    With nodes ``z_k = O + R phi w^k`` and ``dz = i (z - O) dt`` the rule is
    ``(1/N) sum_k (z_k - O)(z_k - A)^{-1}``.
    """
    A = as_dense_operator(A)
    n = A.shape[0]
    eye = np.eye(n, dtype=complex)
    ev = np.linalg.eigvals(A)
    if np.any(np.abs(np.abs(ev - contour.center) - contour.radius) < 1e-8):
        warnings.warn("an eigenvalue lies within 1e-8 of the contour", RuntimeWarning)
    P = np.zeros((n, n), dtype=complex)
    for zk in contour.nodes():
        res = np.linalg.solve(zk * eye - A, eye)
        if np.linalg.norm(res, 2) > 1e8:
            warnings.warn(
                f"resolvent norm exceeds 1e8 at quadrature node {zk}", RuntimeWarning
            )
        P += (zk - contour.center) * res
    return P / contour.nquad


def euclidean_gap(U, W) -> float:
    """Gap between column spans in the Euclidean inner product.

    Two empty spaces have gap 0; an empty and a non-empty space have gap 1.
    """
    U = orthonormal_basis(U)
    W = orthonormal_basis(W)
    if U.shape[1] == 0 and W.shape[1] == 0:
        return 0.0
    if U.shape[1] == 0 or W.shape[1] == 0:
        return 1.0

    def directed(X, Y):
        R = X - Y @ (Y.conj().T @ X)
        return np.linalg.norm(R, 2)

    return float(min(1.0, max(directed(U, W), directed(W, U))))


def _preimages_in_spectrum(A, filt, mu, tol):
    """Preimages of ``mu`` that are eigenvalues of ``A``, with their eigenspaces.

    The exact roots are used as shifts (not the computed eigenvalues, which
    carry O(eps^(1/k)) errors for k x k Jordan blocks).
    """
    hits = []
    for lam in inverse_image(filt, mu).roots:
        E = generalized_eigenspace(A, lam, tol)
        if E.shape[1]:
            hits.append((lam, E))
    return hits


def verify_mapping_lemma(A, filt: RationalFilter, mu, tol: float = 1e-9) -> float:
    """Gap between ``E_mu(r(A))`` and the sum of ``E_lam(A)`` over preimages ``lam``.

    ``tol`` is the relative singular-value threshold used for the kernels.
    """
    if abs(mu - filt.omega0) == 0:
        raise DegenerateFilterError("mu coincides with the constant term of the filter")
    A = as_dense_operator(A)
    left = generalized_eigenspace(apply_filter(A, filt), mu, tol)
    pieces = [E for _, E in _preimages_in_spectrum(A, filt, mu, tol)]
    right = np.hstack(pieces) if pieces else np.zeros((A.shape[0], 0), complex)
    return euclidean_gap(left, right)


def multiplicity_sum_check(A, filt: RationalFilter, mu, tol: float = 1e-9) -> bool:
    """``m(mu, r(A)) == sum of m(lam, A)`` over the preimages ``lam`` of ``mu``."""
    A = as_dense_operator(A)
    left = generalized_eigenspace(apply_filter(A, filt), mu, tol).shape[1]
    right = sum(E.shape[1] for _, E in _preimages_in_spectrum(A, filt, mu, tol))
    return left == right


def random_jordan_matrix(blocks, rng, cond_max: float = 20.0):
    """``P J P^{-1}`` with Jordan blocks ``[(eigenvalue, size), ...]``.

    ``P`` is a random complex matrix resampled until its condition number
    is below ``cond_max``; returns ``(A, P, J)``.
    """
    n = sum(size for _, size in blocks)
    J = np.zeros((n, n), dtype=complex)
    i = 0
    for lam, size in blocks:
        for k in range(size):
            J[i + k, i + k] = lam
            if k + 1 < size:
                J[i + k, i + k + 1] = 1.0
        i += size
    while True:
        P = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        P = np.eye(n) + 0.3 * P / np.sqrt(n)
        if np.linalg.cond(P) < cond_max:
            break
    return P @ J @ np.linalg.inv(P), P, J


def _partition(n, rng, max_block=3):
    sizes = []
    while n > 0:
        s = int(rng.integers(1, min(n, max_block) + 1))
        sizes.append(s)
        n -= s
    return sizes


def random_lemma_instance(rng, nmax: int = 8, pole_distance: float = 0.1, separation: float = 1e-3):
    """Random ``(A, filter, mu)`` with ``mu = r(lam)`` for an eigenvalue ``lam`` of ``A``.

    Three flavours are drawn: a generic simple-pole filter; an even filter
    with an eigenvalue pair ``+-lam`` sharing the image; a contour filter
    with eigenvalues rotated about the center by N-th roots of unity, which
    also share the image.  Instances in which an unrelated eigenvalue maps
    within ``separation`` of ``mu`` are resampled.
    """
    while True:
        n = int(rng.integers(2, nmax + 1))
        sizes = _partition(n, rng)
        nb = len(sizes)
        cplx = lambda k: rng.standard_normal(k) + 1j * rng.standard_normal(k)
        lams = cplx(nb)
        flavour = int(rng.integers(3))
        if flavour == 0:
            npoles = int(rng.integers(1, 5))
            filt = RationalFilter(
                complex(cplx(1)[0]), tuple(2 * cplx(npoles)), tuple(cplx(npoles))
            )
        elif flavour == 1:
            p, w = 2 * cplx(1)[0], cplx(1)[0]
            filt = RationalFilter(complex(cplx(1)[0]), (p, -p), (w, -w))
            if nb >= 2:
                lams[1] = -lams[0]
        else:
            N = int(rng.choice([2, 3, 4, 6]))
            contour = ContourCircle(complex(cplx(1)[0]), float(1 + 2 * rng.random()), N)
            filt = butterworth(contour)
            if nb >= 2:
                lams[1] = contour.center + (lams[0] - contour.center) * np.exp(
                    2j * np.pi * int(rng.integers(1, N)) / N
                )
        dist = np.abs(np.subtract.outer(np.asarray(filt.poles), lams))
        if dist.min() < pole_distance:
            continue
        if nb > 1 and np.abs(np.subtract.outer(lams, lams))[~np.eye(nb, dtype=bool)].min() < 0.05:
            continue
        mu = filt(lams[0])
        if abs(mu - filt.omega0) < 1e-6:
            continue
        images = np.array([filt(l) for l in lams])
        d = np.abs(images - mu)
        if np.any((d > 0) & (d < separation * (1 + abs(mu))) & (d > 1e-12 * (1 + abs(mu)))):
            continue
        A, _, _ = random_jordan_matrix(list(zip(lams, sizes)), rng)
        return A, filt, mu
