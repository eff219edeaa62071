"""Finite element spaces and discrete resolvents on triangular meshes.

Two discrete resolvents ``R_h(z)`` of ``-Laplace + V`` with homogeneous
Dirichlet conditions are provided:

* :class:`GalerkinResolvent` -- continuous Lagrange elements (degree 1-3),
  solving ``(z M - K) u = M f``;
* :class:`FoslsResolvent` -- first-order system least squares on
  lowest-order Raviart-Thomas x P1, ``V = 0`` only.

All vectors are complex coefficient arrays over the *free* (unconstrained)
degrees of freedom of a space.
"""
from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh2d import TriMesh
from .quadrature import line_rule, triangle_rule

__all__ = [
    "SingularSystemError",
    "LagrangeElement",
    "FeSpace",
    "RTSpace",
    "FieldVector",
    "OperatorSpec",
    "assemble_forms",
    "GalerkinResolvent",
    "FoslsResolvent",
    "solve_resolvent_cg",
    "solve_resolvent_fosls",
    "inner_product",
    "interpolate",
    "mixed_h1_gram",
    "thread_count",
]

COND_LIMIT = 1e12


class SingularSystemError(RuntimeError):
    """The shifted system is singular or too ill-conditioned to trust."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("CLUSTER_GAP_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(func, items):
    items = list(items)
    nthreads = min(thread_count(), len(items))
    if nthreads <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------------------
# reference element


class LagrangeElement:
    """Nodal Lagrange basis of degree ``k`` on the reference triangle.

    Nodes are the points ``(a1/k, a2/k)`` of the barycentric multi-indices
    ``(a0, a1, a2)`` with ``a0 + a1 + a2 = k``.
    """

    def __init__(self, degree: int):
        if degree not in (1, 2, 3):
            raise ValueError("Lagrange degree must be 1, 2 or 3")
        self.degree = k = degree
        mi = [(k - i - j, i, j) for j in range(k + 1) for i in range(k + 1 - j)]
        # vertices first, then the rest; order is otherwise irrelevant
        mi.sort(key=lambda a: (sum(x > 0 for x in a), a[::-1]))
        self.multi_indices = np.array(mi, dtype=np.int64)
        self.nodes = self.multi_indices[:, 1:] / k
        self.exps = [(i, j) for i in range(k + 1) for j in range(k + 1 - i)]
        vand = self._monomials(self.nodes)
        self.coeffs = np.linalg.inv(vand)

    @property
    def nbasis(self) -> int:
        return len(self.multi_indices)

    def _monomials(self, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([x**i * y**j for i, j in self.exps], axis=-1)

    def values(self, pts) -> np.ndarray:
        """Basis values at points of shape (..., 2); returns (..., nbasis)."""
        return self._monomials(np.asarray(pts, dtype=float)) @ self.coeffs

    def grads(self, pts) -> np.ndarray:
        """Reference gradients, shape (..., nbasis, 2)."""
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        dx = np.stack([i * x ** max(i - 1, 0) * y**j for i, j in self.exps], axis=-1)
        dy = np.stack([j * x**i * y ** max(j - 1, 0) for i, j in self.exps], axis=-1)
        return np.stack([dx @ self.coeffs, dy @ self.coeffs], axis=-1)

    def hessians(self, pts) -> np.ndarray:
        """Reference Hessians, shape (..., nbasis, 2, 2)."""
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]

        def mono(i, j, di, dj):
            if i < di or j < dj:
                return np.zeros_like(x)
            ci = np.prod(range(i - di + 1, i + 1)) if di else 1
            cj = np.prod(range(j - dj + 1, j + 1)) if dj else 1
            return ci * cj * x ** (i - di) * y ** (j - dj)

        hxx = np.stack([mono(i, j, 2, 0) for i, j in self.exps], axis=-1) @ self.coeffs
        hxy = np.stack([mono(i, j, 1, 1) for i, j in self.exps], axis=-1) @ self.coeffs
        hyy = np.stack([mono(i, j, 0, 2) for i, j in self.exps], axis=-1) @ self.coeffs
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


# ---------------------------------------------------------------------------
# geometry shared by all spaces


class _Geometry:
    def __init__(self, mesh: TriMesh):
        p = mesh.vertices[mesh.triangles]
        self.origin = p[:, 0]
        self.B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        self.det = self.B[:, 0, 0] * self.B[:, 1, 1] - self.B[:, 0, 1] * self.B[:, 1, 0]
        self.Binv = np.linalg.inv(self.B)
        self.area = 0.5 * np.abs(self.det)

    def to_physical(self, ref):
        """Reference points (nq, 2) or (nt, nq, 2) to physical (nt, nq, 2)."""
        if ref.ndim == 2:
            return self.origin[:, None, :] + np.einsum("kab,qb->kqa", self.B, ref)
        return self.origin[:, None, :] + np.einsum("kab,kqb->kqa", self.B, ref)

    def to_reference(self, phys, elems):
        """Physical points (n, q, 2) inside elements ``elems`` (n,) to reference coords."""
        d = phys - self.origin[elems][:, None, :]
        return np.einsum("kab,kqb->kqa", self.Binv[elems], d)


def _geometry(mesh: TriMesh) -> _Geometry:
    if "geometry" not in mesh._cache:
        mesh._cache["geometry"] = _Geometry(mesh)
    return mesh._cache["geometry"]


# ---------------------------------------------------------------------------
# Lagrange space


class FeSpace:
    """Continuous Lagrange space of degree 1-3 on ``mesh``.

    With ``dirichlet=True`` (default) all boundary nodes are eliminated and
    coefficient vectors live on the remaining free nodes.
    """

    kind = "lagrange"

    def __init__(self, mesh: TriMesh, degree: int = 1, dirichlet: bool = True):
        self.mesh = mesh
        self.degree = degree
        self.dirichlet = dirichlet
        self.element = LagrangeElement(degree)
        self.geom = _geometry(mesh)
        self._number_dofs()
        self._lock = threading.RLock()
        self._matrices = {}

    def _number_dofs(self):
        mesh, el = self.mesh, self.element
        keys = {}
        cell_dofs = np.empty((mesh.nt, el.nbasis), dtype=np.int64)
        coords = []
        support = []
        for k, tri in enumerate(mesh.triangles):
            for n, a in enumerate(el.multi_indices):
                key = tuple(sorted((int(tri[i]), int(a[i])) for i in range(3) if a[i] > 0))
                d = keys.get(key)
                if d is None:
                    d = keys[key] = len(coords)
                    coords.append(a @ mesh.vertices[tri] / el.degree)
                    support.append(tuple(v for v, _ in key))
                cell_dofs[k, n] = d
        self.cell_dofs = cell_dofs
        self.ndof_full = len(coords)
        self.dof_coords = np.array(coords)
        constrained = np.zeros(self.ndof_full, dtype=bool)
        if self.dirichlet:
            bverts = set(mesh.boundary_vertex_mask().nonzero()[0].tolist())
            bedges = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
            for d, sup in enumerate(support):
                if len(sup) == 1:
                    constrained[d] = sup[0] in bverts
                elif len(sup) == 2:
                    constrained[d] = tuple(sorted(sup)) in bedges
        self.free = np.flatnonzero(~constrained)
        self.full_to_free = -np.ones(self.ndof_full, dtype=np.int64)
        self.full_to_free[self.free] = np.arange(len(self.free))

    @property
    def dof_count(self) -> int:
        return len(self.free)

    def __repr__(self):
        return f"FeSpace(P{self.degree}, nt={self.mesh.nt}, ndofs={self.dof_count})"

    # -- evaluation --------------------------------------------------------

    def cell_coefficients(self, coeffs) -> np.ndarray:
        """Free coefficients (n,) or (n, m) to element arrays (nt, nb[, m])."""
        coeffs = np.asarray(coeffs)
        full = np.zeros((self.ndof_full,) + coeffs.shape[1:], dtype=complex)
        full[self.free] = coeffs
        return full[self.cell_dofs]

    def quadrature(self, order: int):
        """Reference points (nq, 2), physical weights (nt, nq), physical points (nt, nq, 2)."""
        pts, w = triangle_rule(order)
        return pts, 2.0 * self.geom.area[:, None] * w[None, :], self.geom.to_physical(pts)

    def evaluate(self, coeffs, ref_pts) -> np.ndarray:
        """Values at reference points, shared (nq, 2) or per element (nt, nq, 2)."""
        c = self.cell_coefficients(coeffs)
        phi = self.element.values(ref_pts)
        if phi.ndim == 2:
            return np.einsum("qb,kb...->kq...", phi, c)
        return np.einsum("kqb,kb...->kq...", phi, c)

    def phys_grads(self, ref_pts) -> np.ndarray:
        """Physical basis gradients (nt, nq, nb, 2)."""
        g = self.element.grads(ref_pts)
        if g.ndim == 3:
            return np.einsum("qbi,kia->kqba", g, self.geom.Binv)
        return np.einsum("kqbi,kia->kqba", g, self.geom.Binv)

    def evaluate_grad(self, coeffs, ref_pts, elems=None) -> np.ndarray:
        """Gradients (nt, nq, 2) at reference points."""
        c = self.cell_coefficients(coeffs)
        g = self.phys_grads(ref_pts)
        if elems is not None:
            c = c[elems]
        return np.einsum("kqba,kb->kqa", g, c)

    def evaluate_laplacian(self, coeffs, ref_pts) -> np.ndarray:
        """Elementwise Laplacian (nt, nq) of a discrete function."""
        c = self.cell_coefficients(coeffs)
        h = self.element.hessians(ref_pts)  # (nq, nb, 2, 2)
        Bi = self.geom.Binv
        # physical Hessian = Binv^T H Binv; its trace is the Laplacian
        lap = np.einsum("qbij,kia,kja->kqb", h, Bi, Bi)
        return np.einsum("kqb,kb->kq", lap, c)

    # -- matrices ----------------------------------------------------------

    def _assemble(self, local: np.ndarray) -> sp.csr_matrix:
        """Assemble element matrices (nt, nb, nb) onto the free dofs."""
        nb = self.element.nbasis
        rows = np.repeat(self.cell_dofs, nb, axis=1).ravel()
        cols = np.tile(self.cell_dofs, (1, nb)).ravel()
        r = self.full_to_free[rows]
        c = self.full_to_free[cols]
        keep = (r >= 0) & (c >= 0)
        n = self.dof_count
        return sp.csr_matrix((local.ravel()[keep], (r[keep], c[keep])), shape=(n, n))

    def _cached(self, name, builder):
        with self._lock:
            if name not in self._matrices:
                self._matrices[name] = builder()
            return self._matrices[name]

    def mass(self) -> sp.csr_matrix:
        def build():
            pts, w, _ = self.quadrature(2 * self.degree)
            phi = self.element.values(pts)
            loc = np.einsum("kq,qi,qj->kij", w, phi, phi)
            return self._assemble(loc)

        return self._cached("mass", build)

    def laplace(self) -> sp.csr_matrix:
        def build():
            pts, w, _ = self.quadrature(2 * self.degree)
            g = self.phys_grads(pts)
            loc = np.einsum("kq,kqia,kqja->kij", w, g, g)
            return self._assemble(loc)

        return self._cached("laplace", build)

    def weighted_mass(self, cell_values) -> sp.csr_matrix:
        """Mass matrix with a piecewise-constant (complex) weight."""
        pts, w, _ = self.quadrature(2 * self.degree)
        phi = self.element.values(pts)
        loc = np.einsum("kq,qi,qj->kij", w, phi, phi) * np.asarray(cell_values)[:, None, None]
        return self._assemble(loc.astype(complex))

    def h1_gram(self) -> sp.csr_matrix:
        """Gram matrix of the full H1 inner product ``(u, v) + (grad u, grad v)``."""
        return self._cached("h1", lambda: (self.mass() + self.laplace()).tocsr())

    def gram(self, kind: str = "H1") -> sp.csr_matrix:
        if kind.upper() == "H1":
            return self.h1_gram()
        if kind.upper() == "L2":
            return self.mass()
        raise ValueError(f"unknown inner product kind {kind!r}")


# ---------------------------------------------------------------------------
# lowest-order Raviart-Thomas space


class RTSpace:
    """Lowest-order Raviart-Thomas space; one normal-flux dof per edge.

    The local basis function for the edge opposite vertex ``p_i`` is
    ``s_i |e_i| / (2 |K|) (x - p_i)`` with sign ``s_i = +1`` on the first
    element adjacent to the edge and ``-1`` on the second.
    """

    kind = "raviart-thomas"

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self.geom = _geometry(mesh)
        edges, tri_edges = mesh.edges()
        self.cell_dofs = tri_edges
        owner = mesh.edge_elements()[:, 0]
        self.signs = np.where(owner[tri_edges] == np.arange(mesh.nt)[:, None], 1.0, -1.0)
        self.scale = self.signs * mesh.edge_lengths() / (2.0 * self.geom.area[:, None])

    @property
    def dof_count(self) -> int:
        return len(self.mesh.edges()[0])

    def values(self, phys_pts) -> np.ndarray:
        """Basis values (nt, nq, 3, 2) at physical points (nt, nq, 2)."""
        p = self.mesh.vertices[self.mesh.triangles]  # (nt, 3, 2)
        d = phys_pts[:, :, None, :] - p[:, None, :, :]
        return self.scale[:, None, :, None] * d

    def divergence(self) -> np.ndarray:
        """Elementwise constant divergence (nt, 3)."""
        return 2.0 * self.scale

    def cell_coefficients(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs)[self.cell_dofs]

    def evaluate(self, coeffs, phys_pts) -> np.ndarray:
        return np.einsum("kqba,kb->kqa", self.values(phys_pts), self.cell_coefficients(coeffs))

    def evaluate_div(self, coeffs) -> np.ndarray:
        return np.einsum("kb,kb->k", self.divergence(), self.cell_coefficients(coeffs))

    def _assemble(self, local, col_dofs=None, ncols=None, col_map=None):
        rows_d = self.cell_dofs
        nb_r = rows_d.shape[1]
        if col_dofs is None:
            col_dofs, ncols = rows_d, self.dof_count
        nb_c = col_dofs.shape[1]
        rows = np.repeat(rows_d, nb_c, axis=1).ravel()
        cols = np.tile(col_dofs, (1, nb_r)).ravel()
        if col_map is not None:
            cols = col_map[cols]
        keep = cols >= 0
        return sp.csr_matrix(
            (local.ravel()[keep], (rows[keep], cols[keep])), shape=(self.dof_count, ncols)
        )


@dataclass
class FieldVector:
    """Coefficients of a finite element function in ``space``."""

    space: object
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.space.dof_count,):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} does not match space "
                f"({self.space.dof_count} dofs)"
            )

    def __add__(self, other):
        _same_space(self, other)
        return FieldVector(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_space(self, other)
        return FieldVector(self.space, self.coeffs - other.coeffs)

    def __mul__(self, alpha):
        return FieldVector(self.space, alpha * self.coeffs)

    __rmul__ = __mul__


def _same_space(u, v):
    if u.space is not v.space:
        raise ValueError("field vectors belong to different spaces")


@dataclass(frozen=True)
class OperatorSpec:
    """Potential ``V`` of ``-Laplace + V``.

    ``potential`` is ``None``, a constant, or a callable ``V(x, y)`` that is
    sampled at element centroids (so it should be constant on elements).
    """

    potential: object = None

    def cell_values(self, mesh: TriMesh) -> np.ndarray:
        if self.potential is None:
            return np.zeros(mesh.nt, dtype=complex)
        if callable(self.potential):
            c = mesh.centroids()
            vals = np.asarray(self.potential(c[:, 0], c[:, 1]), dtype=complex)
            vals = np.broadcast_to(vals, (mesh.nt,)).copy()
        else:
            vals = np.full(mesh.nt, complex(self.potential))
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential must be finite")
        return vals

    def is_zero(self, mesh: TriMesh) -> bool:
        return not np.any(self.cell_values(mesh))


def assemble_forms(space: FeSpace, op: OperatorSpec | None = None):
    """Return ``(A_stiff, M_mass)``: the operator form ``(grad u, grad v) + (V u, v)``
    and the L2 mass matrix, both on the free dofs."""
    op = op or OperatorSpec()
    K = space.laplace().astype(complex)
    vals = op.cell_values(space.mesh)
    if np.any(vals):
        K = K + space.weighted_mass(vals)
    return K.tocsr(), space.mass()


# ---------------------------------------------------------------------------
# factorization helper


class _Factor:
    def __init__(self, matrix: sp.spmatrix):
        A = sp.csc_matrix(matrix, dtype=complex)
        try:
            self.lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularSystemError(f"factorization failed: {exc}", np.inf) from None
        inv = spla.LinearOperator(
            A.shape,
            matvec=self.lu.solve,
            rmatvec=lambda x: self.lu.solve(np.asarray(x, dtype=complex), trans="H"),
            dtype=complex,
        )
        anorm = spla.norm(A, 1)
        with np.errstate(all="ignore"):
            ainv = spla.onenormest(inv) if A.shape[0] > 4 else np.abs(
                np.linalg.inv(A.toarray())
            ).sum(axis=0).max()
        self.condition = float(anorm * ainv)
        if not np.isfinite(self.condition) or self.condition > COND_LIMIT:
            raise SingularSystemError(
                f"shifted system is numerically singular (condition estimate "
                f"{self.condition:.3e})",
                self.condition,
            )

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=complex)
        return self.lu.solve(rhs)


class _FactorCache:
    def __init__(self, build):
        self._build = build
        self._factors = {}
        self._lock = threading.Lock()

    def get(self, z: complex) -> _Factor:
        z = complex(z)
        with self._lock:
            f = self._factors.get(z)
        if f is None:
            f = _Factor(self._build(z))
            with self._lock:
                self._factors.setdefault(z, f)
        return f


# ---------------------------------------------------------------------------
# Galerkin resolvent


class GalerkinResolvent:
    """``R_h(z) f = u`` with ``(z M - K) u = M f`` on a Lagrange space."""

    backend = "cg"

    def __init__(self, space: FeSpace, op: OperatorSpec | None = None):
        self.space = space
        self.op = op or OperatorSpec()
        self.K, self.M = assemble_forms(space, self.op)
        self._cache = _FactorCache(lambda z: z * self.M - self.K)

    @property
    def dof_count(self) -> int:
        return self.space.dof_count

    def gram(self):
        return self.space.h1_gram()

    def operator_matrices(self):
        """Matrices of the operator form and of the L2 product (for Rayleigh-Ritz)."""
        return self.K, self.M

    def condition(self, z) -> float:
        return self._cache.get(z).condition

    def solve(self, z, f):
        """Apply the discrete resolvent to a vector or a block of columns."""
        return self._cache.get(z).solve(self.M @ np.asarray(f, dtype=complex))


def solve_resolvent_cg(space: FeSpace, op, z, f: FieldVector) -> FieldVector:
    """One Galerkin resolvent solve; builds a throwaway :class:`GalerkinResolvent`."""
    if f.space is not space:
        raise ValueError("right-hand side lives in a different space")
    return FieldVector(space, GalerkinResolvent(space, op).solve(z, f.coeffs))


# ---------------------------------------------------------------------------
# FOSLS resolvent


class FoslsResolvent:
    """Least-squares resolvent on ``RT0 x P1`` for ``-Laplace`` (no potential).

    Minimizes ``|q + grad u|^2 + |-div q + z u - f|^2`` in L2; the scalar part
    is ``R_h(z) f`` and the flux part ``R_h^q(z) f``.
    """

    backend = "fosls"

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self.space = FeSpace(mesh, 1, dirichlet=True)
        self.rt = RTSpace(mesh)
        self._build_blocks()
        self._cache = _FactorCache(self.normal_matrix)
        self._loads = {}
        self._lock = threading.Lock()

    @property
    def dof_count(self) -> int:
        return self.space.dof_count

    def gram(self):
        return self.space.h1_gram()

    def operator_matrices(self):
        return self.space.laplace().astype(complex), self.space.mass()

    def _build_blocks(self):
        V, rt = self.space, self.rt
        pts, w, x = V.quadrature(4)
        psi = rt.values(x)  # (nt, nq, 3, 2)
        div = rt.divergence()  # (nt, 3)
        phi = V.element.values(pts)  # (nq, 3)
        gphi = V.phys_grads(pts)  # (nt, nq, 3, 2)
        area = V.geom.area
        qq = np.einsum("kq,kqia,kqja->kij", w, psi, psi) + area[:, None, None] * div[
            :, :, None
        ] * div[:, None, :]
        cqu = np.einsum("kq,kqia,kqja->kij", w, psi, gphi)
        equ = np.einsum("kq,ki,qj->kij", w, div, phi)
        self.A_qq = rt._assemble(qq)
        self.C_qu = rt._assemble(cqu, V.cell_dofs, V.dof_count, V.full_to_free)
        self.E_qu = rt._assemble(equ, V.cell_dofs, V.dof_count, V.full_to_free)
        self.K = V.laplace()
        self.M = V.mass()

    def normal_matrix(self, z) -> sp.csr_matrix:
        """Hermitian positive definite matrix of the least-squares normal equations."""
        z = complex(z)
        qu = self.C_qu - z * self.E_qu
        uq = (self.C_qu - np.conj(z) * self.E_qu).T
        uu = self.K + abs(z) ** 2 * self.M
        return sp.bmat([[self.A_qq, qu], [uq, uu]], format="csr").astype(complex)

    def _load_matrices(self, fspace: FeSpace):
        """(rt_div_load, p1_load) maps from coefficients of ``fspace`` to load vectors."""
        key = id(fspace)
        with self._lock:
            if key in self._loads:
                return self._loads[key][1:]
        if fspace.mesh is not self.mesh:
            raise ValueError("data must live on the same mesh")
        pts, w, _ = self.space.quadrature(fspace.degree + 2)
        phi_f = fspace.element.values(pts)
        phi = self.space.element.values(pts)
        div = self.rt.divergence()
        loc_div = np.einsum("kq,ki,qj->kij", w, div, phi_f)
        loc_p1 = np.einsum("kq,qi,qj->kij", w, phi, phi_f)
        L_div = self.rt._assemble(loc_div, fspace.cell_dofs, fspace.dof_count, fspace.full_to_free)
        nb_r, nb_c = 3, fspace.element.nbasis
        rows = self.space.full_to_free[np.repeat(self.space.cell_dofs, nb_c, axis=1).ravel()]
        cols = fspace.full_to_free[np.tile(fspace.cell_dofs, (1, nb_r)).ravel()]
        keep = (rows >= 0) & (cols >= 0)
        L_p1 = sp.csr_matrix(
            (loc_p1.ravel()[keep], (rows[keep], cols[keep])),
            shape=(self.space.dof_count, fspace.dof_count),
        )
        with self._lock:
            self._loads[key] = (fspace, L_div, L_p1)
        return L_div, L_p1

    def solve_pair(self, z, f, fspace: FeSpace | None = None):
        """Return ``(q_h, u_h)`` coefficient arrays for data ``f`` in ``fspace``."""
        fspace = fspace or self.space
        z = complex(z)
        L_div, L_p1 = self._load_matrices(fspace)
        f = np.asarray(f, dtype=complex)
        rhs = np.concatenate([-(L_div @ f), np.conj(z) * (L_p1 @ f)])
        sol = self._cache.get(z).solve(rhs)
        nq = self.rt.dof_count
        return sol[:nq], sol[nq:]

    def solve(self, z, f, fspace: FeSpace | None = None):
        return self.solve_pair(z, f, fspace)[1]

    def condition(self, z) -> float:
        return self._cache.get(z).condition


def solve_resolvent_fosls(resolvent: FoslsResolvent, z, f: FieldVector):
    """FOSLS solve returning ``(q_h, u_h)`` as field vectors."""
    q, u = resolvent.solve_pair(z, f.coeffs, f.space)
    return FieldVector(resolvent.rt, q), FieldVector(resolvent.space, u)


# ---------------------------------------------------------------------------
# inner products and interpolation


def inner_product(space: FeSpace, kind: str, u: FieldVector, v: FieldVector) -> complex:
    """``(u, v)`` in L2 or H1, linear in ``u`` and antilinear in ``v``."""
    if u.space is not space or v.space is not space:
        raise ValueError("field vectors must belong to the given space")
    G = space.gram(kind)
    return complex(np.vdot(v.coeffs, G @ u.coeffs))


def interpolate(space: FeSpace, func: Callable) -> FieldVector:
    """Nodal interpolant of ``func(x, y)`` (values at constrained nodes are dropped)."""
    xy = space.dof_coords[space.free]
    vals = np.asarray(func(xy[:, 0], xy[:, 1]), dtype=complex)
    vals = np.broadcast_to(vals, (space.dof_count,)).copy()
    return FieldVector(space, vals)


def mixed_h1_gram(space: FeSpace, basis, funcs, grads, order: int = 10) -> np.ndarray:
    """H1 Gram matrix of discrete columns ``basis`` followed by analytic functions.

    ``funcs[i](x, y)`` and ``grads[i](x, y) -> (gx, gy)`` describe the
    analytic members; integrals use a rule of the given order.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=complex).T).T
    pts, w, x = space.quadrature(order)
    vals = [space.evaluate(basis[:, i], pts) for i in range(basis.shape[1])]
    grd = [space.evaluate_grad(basis[:, i], pts) for i in range(basis.shape[1])]
    for f, g in zip(funcs, grads):
        vals.append(np.asarray(f(x[..., 0], x[..., 1]), dtype=complex))
        gx, gy = g(x[..., 0], x[..., 1])
        grd.append(np.stack([gx, gy], axis=-1).astype(complex))
    n = len(vals)
    G = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            G[i, j] = np.sum(w * vals[j] * np.conj(vals[i])) + np.sum(
                w[..., None] * grd[j] * np.conj(grd[i])
            )
    return G
