"""Source-problem error estimators repurposed for filtered subspace iteration.

For a discrete function ``v_h`` and each filter pole ``z_k`` the resolvent
``u_h = R_h(z_k) v_h`` is computed and a computable residual of that source
problem is stored as an :class:`EstimatorField`.  The field keeps its data at
quadrature points (exact for the piecewise polynomials involved), so inner
products between fields of different inputs can be formed later.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem_core import FeSpace, FieldVector, FoslsResolvent, GalerkinResolvent, parallel_map
from .filters import RationalFilter
from .quadrature import line_rule

__all__ = [
    "EstimatorPart",
    "EstimatorField",
    "y_inner",
    "local_norms",
    "fosls_estimate",
    "residual_estimate",
    "FoslsEstimator",
    "ResidualEstimator",
]


@dataclass(frozen=True)
class EstimatorPart:
    """One L2 component of an estimator field.

    ``values`` has shape (nitems, nq, ncomp) and ``weights`` (nitems, nq);
    ``owner`` is a sparse (nt, nitems) matrix distributing the squared item
    norms to elements (rows sum of each column is 1).
    """

    label: str
    pole: complex
    values: np.ndarray
    weights: np.ndarray
    owner: sp.csr_matrix

    def item_squares(self) -> np.ndarray:
        return np.einsum("iq,iqc->i", self.weights, np.abs(self.values) ** 2)

    def matches(self, other: "EstimatorPart") -> bool:
        return (
            self.label == other.label
            and self.pole == other.pole
            and self.values.shape == other.values.shape
            and self.owner is other.owner
        )


@dataclass(frozen=True)
class EstimatorField:
    """Per-pole estimator payloads living in the product space ``Y``."""

    parts: tuple
    nt: int

    @property
    def npoles(self) -> int:
        return len({p.pole for p in self.parts})

    def norm(self) -> float:
        return float(np.sqrt(max(y_inner(self, self).real, 0.0)))

    def __mul__(self, alpha):
        return EstimatorField(
            tuple(
                EstimatorPart(p.label, p.pole, alpha * p.values, p.weights, p.owner)
                for p in self.parts
            ),
            self.nt,
        )

    __rmul__ = __mul__


def _check_compatible(f1: EstimatorField, f2: EstimatorField):
    if len(f1.parts) != len(f2.parts) or f1.nt != f2.nt:
        raise ValueError("estimator fields have different structure")
    for p1, p2 in zip(f1.parts, f2.parts):
        if not p1.matches(p2):
            raise ValueError("estimator fields have different structure")


def y_inner(f1: EstimatorField, f2: EstimatorField) -> complex:
    """Inner product of ``Y``: linear in ``f1``, antilinear in ``f2``."""
    _check_compatible(f1, f2)
    total = 0j
    for p1, p2 in zip(f1.parts, f2.parts):
        total += np.sum(p1.weights[..., None] * p1.values * np.conj(p2.values))
    return complex(total)


def local_norms(field: EstimatorField) -> np.ndarray:
    """Element indicators ``sqrt(sum over poles of the local squares)``."""
    sq = np.zeros(field.nt)
    for p in field.parts:
        sq += p.owner @ p.item_squares()
    return np.sqrt(sq)


def _element_owner(nt: int) -> sp.csr_matrix:
    return sp.identity(nt, format="csr")


# ---------------------------------------------------------------------------
# FOSLS estimator


class FoslsEstimator:
    """``E_k v = (0, v) - A_{z_k}(q_h, u_h)`` for every pole of ``filt``.

    The first component is the flux residual ``-(q_h + grad u_h)``, the second
    the scalar residual ``v + div q_h - z_k u_h``.
    """

    def __init__(self, filt: RationalFilter, resolvent: FoslsResolvent, fspace: FeSpace = None):
        self.filt = filt
        self.resolvent = resolvent
        self.fspace = fspace or resolvent.space
        self.mesh = resolvent.mesh
        self._owner = _element_owner(self.mesh.nt)
        order = 2 * max(self.fspace.degree, 1) + 2
        self._pts, self._w, self._x = self.resolvent.space.quadrature(order)

    def __call__(self, v) -> EstimatorField:
        return self.fields(np.asarray(v)[:, None])[0]

    def fields(self, V) -> list:
        V = np.asarray(V, dtype=complex)
        if V.ndim == 1:
            V = V[:, None]
        res, rt, P1 = self.resolvent, self.resolvent.rt, self.resolvent.space
        pts, w, x = self._pts, self._w, self._x
        vvals = [self.fspace.evaluate(V[:, i], pts) for i in range(V.shape[1])]

        def per_pole(zk):
            out = []
            for i in range(V.shape[1]):
                q, u = res.solve_pair(zk, V[:, i], self.fspace)
                flux = -(rt.evaluate(q, x) + P1.evaluate_grad(u, pts))
                scal = vvals[i] + rt.evaluate_div(q)[:, None] - zk * P1.evaluate(u, pts)
                out.append(
                    (
                        EstimatorPart("flux", zk, flux, w, self._owner),
                        EstimatorPart("scalar", zk, scal[..., None], w, self._owner),
                    )
                )
            return out

        per = parallel_map(per_pole, self.filt.poles)
        return [
            EstimatorField(tuple(p for pole in per for p in pole[i]), self.mesh.nt)
            for i in range(V.shape[1])
        ]


def fosls_estimate(filt: RationalFilter, resolvent: FoslsResolvent, v_h: FieldVector):
    """FOSLS estimator field of ``v_h`` (a Lagrange function on the resolvent's mesh)."""
    return FoslsEstimator(filt, resolvent, v_h.space)(v_h.coeffs)


# ---------------------------------------------------------------------------
# explicit residual estimator


class ResidualEstimator:
    """Explicit residual estimator of the Galerkin source problems.

    For every pole ``z_k`` and ``u_h = R_h(z_k) v``: element residual
    ``h_K (v - z_k u_h - Lap u_h + V u_h)`` on each element and weighted
    normal-derivative jump ``h_e^{1/2} [du_h/dn]`` on each interior edge, the
    latter shared half-and-half between its two elements.
    """

    def __init__(self, filt: RationalFilter, resolvent: GalerkinResolvent):
        self.filt = filt
        self.resolvent = resolvent
        self.space = space = resolvent.space
        mesh = self.mesh = space.mesh
        order = 2 * space.degree + 2
        self._pts, self._w, _ = space.quadrature(order)
        self._hK = mesh.diameters()
        self._pot = resolvent.op.cell_values(mesh)
        self._owner = _element_owner(mesh.nt)
        self._setup_edges(order)

    def _setup_edges(self, order):
        mesh, space = self.mesh, self.space
        edges, _ = mesh.edges()
        adj = mesh.edge_elements()
        interior = np.flatnonzero(adj[:, 1] >= 0)
        e = edges[interior]
        k1, k2 = adj[interior, 0], adj[interior, 1]
        a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
        t, wl = line_rule(order)
        phys = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        length = np.linalg.norm(b - a, axis=1)
        tangent = (b - a) / length[:, None]
        self._normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        self._edge_w = length[:, None] * wl[None, :]
        self._edge_scale = np.sqrt(length)
        self._k1, self._k2 = k1, k2
        geom = space.geom
        self._g1 = self._edge_grads(geom.to_reference(phys, k1), k1)
        self._g2 = self._edge_grads(geom.to_reference(phys, k2), k2)
        ne = len(interior)
        rows = np.concatenate([k1, k2])
        cols = np.concatenate([np.arange(ne), np.arange(ne)])
        self._edge_owner = sp.csr_matrix(
            (np.full(2 * ne, 0.5), (rows, cols)), shape=(mesh.nt, ne)
        )

    def _edge_grads(self, ref, elems):
        g = self.space.element.grads(ref)  # (ne, nq, nb, 2)
        return np.einsum("eqbi,eia->eqba", g, self.space.geom.Binv[elems])

    def __call__(self, v) -> EstimatorField:
        return self.fields(np.asarray(v)[:, None])[0]

    def fields(self, V) -> list:
        V = np.asarray(V, dtype=complex)
        if V.ndim == 1:
            V = V[:, None]
        space = self.space
        pts, w = self._pts, self._w
        hK = self._hK[:, None]
        vvals = [space.evaluate(V[:, i], pts) for i in range(V.shape[1])]

        def per_pole(zk):
            U = self.resolvent.solve(zk, V)
            out = []
            for i in range(V.shape[1]):
                u = U[:, i]
                uval = space.evaluate(u, pts)
                lap = space.evaluate_laplacian(u, pts) if space.degree > 1 else 0.0
                elem = hK * (vvals[i] - zk * uval - lap + self._pot[:, None] * uval)
                c = space.cell_coefficients(u)
                d1 = np.einsum("eqba,eb->eqa", self._g1, c[self._k1])
                d2 = np.einsum("eqba,eb->eqa", self._g2, c[self._k2])
                jump = np.einsum("eqa,ea->eq", d1 - d2, self._normal)
                edge = self._edge_scale[:, None] * jump
                out.append(
                    (
                        EstimatorPart("element", zk, elem[..., None], w, self._owner),
                        EstimatorPart(
                            "edge", zk, edge[..., None], self._edge_w, self._edge_owner
                        ),
                    )
                )
            return out

        per = parallel_map(per_pole, self.filt.poles)
        return [
            EstimatorField(tuple(p for pole in per for p in pole[i]), self.mesh.nt)
            for i in range(V.shape[1])
        ]


def residual_estimate(filt: RationalFilter, resolvent: GalerkinResolvent, v_h: FieldVector):
    """Residual estimator field of ``v_h``; ``resolvent`` fixes space and potential."""
    if v_h.space is not resolvent.space:
        raise ValueError("v_h must live in the resolvent's space")
    return ResidualEstimator(filt, resolvent)(v_h.coeffs)
