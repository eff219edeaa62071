"""Conforming triangular meshes with longest-edge bisection refinement.

Meshes are immutable: :func:`refine` returns a new :class:`TriMesh` whose
``parent`` array maps every child triangle to the triangle it came from.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TriMesh",
    "MarkSet",
    "structured_square",
    "structured_lshape",
    "from_polygon",
    "greedy_mark",
    "refine",
    "uniform_refine",
    "read_mesh",
    "write_mesh",
    "check_conforming",
]

DIRICHLET = 1


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangulation of a polygonal domain.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise
    boundary_edges : (nb, 2) int array
    boundary_tags : (nb,) int array
    parent : (nt,) int array or None
        Index of the parent triangle in the mesh this one was refined from.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray = None
    boundary_tags: np.ndarray = None
    parent: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2 or t.ndim != 2 or t.shape[1] != 3:
            raise ValueError("vertices must be (nv, 2) and triangles (nt, 3)")
        # orient counter-clockwise
        area = _signed_areas(v, t)
        if np.any(area == 0):
            raise ValueError("degenerate triangle in mesh")
        flip = area < 0
        if np.any(flip):
            t = t.copy()
            t[flip] = t[flip][:, [0, 2, 1]]
        be = self.boundary_edges
        tags = self.boundary_tags
        if be is None:
            be = _boundary_edges(t)
            tags = np.full(len(be), DIRICHLET, dtype=np.int64)
        be = np.asarray(be, dtype=np.int64).reshape(-1, 2)
        if tags is None:
            tags = np.full(len(be), DIRICHLET, dtype=np.int64)
        for name, arr in (("vertices", v), ("triangles", t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "boundary_edges", be)
        object.__setattr__(self, "boundary_tags", np.asarray(tags, dtype=np.int64))
        if self.parent is not None:
            object.__setattr__(self, "parent", np.asarray(self.parent, dtype=np.int64))

    @property
    def nv(self) -> int:
        return len(self.vertices)

    @property
    def nt(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        return np.abs(_signed_areas(self.vertices, self.triangles))

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edge_lengths(self) -> np.ndarray:
        """(nt, 3) lengths of local edges; local edge i is opposite vertex i."""
        p = self.vertices[self.triangles]
        return np.stack(
            [
                np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
                np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
            ],
            axis=1,
        )

    def diameters(self) -> np.ndarray:
        return self.edge_lengths().max(axis=1)

    def min_angles(self) -> np.ndarray:
        a, b, c = self.edge_lengths().T
        angs = []
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            cosang = np.clip((y**2 + z**2 - x**2) / (2 * y * z), -1.0, 1.0)
            angs.append(np.arccos(cosang))
        return np.min(np.stack(angs, axis=1), axis=1)

    def edges(self):
        """Unique edges and the element-to-edge map.

        Returns
        -------
        edges : (ne, 2) int array, each row sorted ascending
        tri_edges : (nt, 3) int array, local edge i is opposite local vertex i
        """
        if "edges" not in self._cache:
            t = self.triangles
            loc = np.stack(
                [t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1
            ).reshape(-1, 2)
            loc = np.sort(loc, axis=1)
            edges, inv = np.unique(loc, axis=0, return_inverse=True)
            self._cache["edges"] = (edges, inv.reshape(-1, 3))
        return self._cache["edges"]

    def edge_elements(self) -> np.ndarray:
        """(ne, 2) adjacent triangles per edge; -1 marks a boundary side."""
        if "edge_elements" not in self._cache:
            edges, tri_edges = self.edges()
            out = -np.ones((len(edges), 2), dtype=np.int64)
            for k in range(3):
                for tri, e in enumerate(tri_edges[:, k]):
                    slot = 0 if out[e, 0] < 0 else 1
                    out[e, slot] = tri
            self._cache["edge_elements"] = out
        return self._cache["edge_elements"]

    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.nv, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask


def _signed_areas(v, t):
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    )


def _boundary_edges(t):
    loc = np.sort(np.concatenate([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]]), axis=1)
    edges, counts = np.unique(loc, axis=0, return_counts=True)
    return edges[counts == 1]


def check_conforming(mesh: TriMesh) -> None:
    """Raise ``AssertionError`` unless the mesh is a valid conforming triangulation."""
    assert np.all(_signed_areas(mesh.vertices, mesh.triangles) > 0), "orientation"
    t = mesh.triangles
    loc = np.sort(np.concatenate([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]]), axis=1)
    edges, counts = np.unique(loc, axis=0, return_counts=True)
    assert counts.max() <= 2, "edge shared by more than two triangles"
    bnd = {tuple(e) for e in edges[counts == 1]}
    assert bnd == {tuple(sorted(e)) for e in mesh.boundary_edges}, "boundary edges"
    # a hanging node lies in the interior of some edge
    used = np.unique(t)
    assert len(used) == mesh.nv, "unreferenced vertices"
    v = mesh.vertices
    a, b = v[edges[:, 0]], v[edges[:, 1]]
    ab = b - a
    len2 = np.einsum("ij,ij->i", ab, ab)
    for p_idx in range(mesh.nv):
        p = v[p_idx]
        s = np.einsum("ij,ij->i", p - a, ab) / len2
        inside = (s > 1e-12) & (s < 1 - 1e-12)
        if not inside.any():
            continue
        d = np.abs((p - a)[inside, 0] * ab[inside, 1] - (p - a)[inside, 1] * ab[inside, 0])
        d /= np.sqrt(len2[inside])
        assert d.min() > 1e-12 * np.sqrt(len2[inside]).max(), f"hanging node {p_idx}"


def structured_square(n: int) -> TriMesh:
    """Unit square cut into ``n * n`` cells, each split into two right triangles."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            v0 = j * (n + 1) + i
            v1, v2, v3 = v0 + 1, v0 + n + 2, v0 + n + 1
            tris.append((v0, v1, v2))
            tris.append((v0, v2, v3))
    return TriMesh(verts, np.array(tris))


def structured_lshape(n: int) -> TriMesh:
    """Unit square minus its upper-right quarter; re-entrant corner at (1/2, 1/2).

    ``n`` (even) is the number of cells per side of the enclosing square.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be an even integer >= 2")
    sq = structured_square(n)
    c = sq.centroids()
    keep = ~((c[:, 0] > 0.5) & (c[:, 1] > 0.5))
    return _compact(sq.vertices, sq.triangles[keep])


def _compact(vertices, triangles) -> TriMesh:
    used = np.unique(triangles)
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(vertices[used], remap[triangles])


# ---------------------------------------------------------------------------
# polygon triangulation


def _segments_cross(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _is_simple(poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = poly[j], poly[(j + 1) % n]
            if _segments_cross(a, b, c, d):
                return False
    # repeated vertices
    return len(np.unique(np.round(poly, 14), axis=0)) == n


def _ear_clip(poly: np.ndarray):
    """Triangulate a simple CCW polygon; picks the best-shaped ear each step."""
    idx = list(range(len(poly)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def min_angle(a, b, c):
        pts = [a, b, c]
        best = np.pi
        for k in range(3):
            u = pts[(k + 1) % 3] - pts[k]
            w = pts[(k + 2) % 3] - pts[k]
            cosang = np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w))
            best = min(best, np.arccos(np.clip(cosang, -1, 1)))
        return best

    while len(idx) > 3:
        best_k, best_q = None, -1.0
        m = len(idx)
        for k in range(m):
            ia, ib, ic = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = poly[ia], poly[ib], poly[ic]
            if cross(a, b, c) <= 1e-14:
                continue
            ok = True
            for j in idx:
                if j in (ia, ib, ic):
                    continue
                p = poly[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    ok = False
                    break
            if ok:
                q = min_angle(a, b, c)
                if q > best_q:
                    best_k, best_q = k, q
        if best_k is None:
            raise ValueError("polygon could not be triangulated (is it simple?)")
        m = len(idx)
        tris.append((idx[best_k - 1], idx[best_k], idx[(best_k + 1) % m]))
        idx.pop(best_k)
    tris.append(tuple(idx))
    return np.array(tris)


def from_polygon(vertices, hmax: float) -> TriMesh:
    """Triangulate a simple polygon, then bisect uniformly until every edge <= hmax."""
    poly = np.asarray(vertices, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise ValueError("polygon must be a (n >= 3, 2) array")
    if not _is_simple(poly):
        raise ValueError("polygon is not simple (self-intersecting or repeated vertices)")
    area2 = np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    if area2 < 0:
        poly = poly[::-1].copy()
    mesh = TriMesh(poly, _ear_clip(poly))
    while mesh.diameters().max() > hmax:
        long = mesh.diameters() > hmax
        mesh = refine(mesh, MarkSet(frozenset(np.flatnonzero(long).tolist()), 0.0))
    return TriMesh(mesh.vertices, mesh.triangles)


# ---------------------------------------------------------------------------
# marking and refinement


@dataclass(frozen=True)
class MarkSet:
    """Triangles selected for refinement."""

    marked: frozenset
    theta: float

    def __len__(self):
        return len(self.marked)

    def __contains__(self, k):
        return k in self.marked

    def as_array(self) -> np.ndarray:
        return np.array(sorted(self.marked), dtype=np.int64)


def greedy_mark(eta, theta: float = 0.9) -> MarkSet:
    """Mark every element with ``eta_K >= theta * max(eta)``."""
    eta = np.asarray(eta, dtype=float)
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if np.any(eta < 0) or not np.all(np.isfinite(eta)):
        raise ValueError("indicators must be finite and non-negative")
    emax = eta.max(initial=0.0)
    if emax <= 0:
        raise ValueError("all indicators vanish; nothing to refine")
    return MarkSet(frozenset(np.flatnonzero(eta >= theta * emax).tolist()), theta)


def _longest_local_edge(mesh: TriMesh) -> np.ndarray:
    """Local index (opposite vertex) of each triangle's longest edge.

    Ties within a relative 1e-12 go to the edge with the smallest sorted
    vertex pair.
    """
    lens = mesh.edge_lengths()
    t = mesh.triangles
    out = np.empty(len(t), dtype=np.int64)
    for k in range(len(t)):
        lmax = lens[k].max()
        cands = [i for i in range(3) if lens[k, i] >= lmax * (1 - 1e-12)]
        if len(cands) == 1:
            out[k] = cands[0]
        else:
            out[k] = min(
                cands,
                key=lambda i: tuple(sorted((t[k, (i + 1) % 3], t[k, (i + 2) % 3]))),
            )
    return out


def refine(mesh: TriMesh, marks: MarkSet) -> TriMesh:
    """Bisect marked triangles across their longest edge and close conformity.

    Any triangle with a bisected edge is itself bisected across its longest
    edge (which is then also bisected); this closure repeats until stable.
    Each triangle is then split into 2, 3 or 4 children: the longest-edge
    cut first, then the children holding another bisected edge are halved.
    """
    t = mesh.triangles
    edges, tri_edges = mesh.edges()
    longest = _longest_local_edge(mesh)
    ref_edge = tri_edges[np.arange(len(t)), longest]
    split = np.zeros(len(edges), dtype=bool)
    marked = marks.as_array()
    if len(marked) and (marked.min() < 0 or marked.max() >= len(t)):
        raise IndexError("marked triangle index out of range")
    split[ref_edge[marked]] = True
    # closure: a triangle with any split edge must split its longest edge
    changed = True
    while changed:
        has_split = split[tri_edges].any(axis=1)
        need = has_split & ~split[ref_edge]
        changed = bool(need.any())
        for k in np.flatnonzero(need):
            split[ref_edge[k]] = True

    verts = [mesh.vertices]
    mid = -np.ones(len(edges), dtype=np.int64)
    idx = np.flatnonzero(split)
    mid[idx] = mesh.nv + np.arange(len(idx))
    verts.append(0.5 * (mesh.vertices[edges[idx, 0]] + mesh.vertices[edges[idx, 1]]))
    new_v = np.vstack(verts)

    new_t, parent = [], []
    for k in range(len(t)):
        if not split[tri_edges[k]].any():
            new_t.append(tuple(t[k]))
            parent.append(k)
            continue
        i = longest[k]
        a, b, c = t[k, i], t[k, (i + 1) % 3], t[k, (i + 2) % 3]
        m = mid[tri_edges[k, i]]
        # children (a, b, m) and (a, m, c); ccw because (a, b, c) is ccw
        e_ab = tri_edges[k, (i + 2) % 3]
        e_ca = tri_edges[k, (i + 1) % 3]
        for child, e_other in (((a, b, m), e_ab), ((a, m, c), e_ca)):
            if split[e_other]:
                mo = mid[e_other]
                if child[2] == m:
                    # child (a, b, m): other edge a-b
                    new_t.append((a, mo, m))
                    new_t.append((mo, b, m))
                else:
                    # child (a, m, c): other edge c-a
                    new_t.append((a, m, mo))
                    new_t.append((mo, m, c))
                parent.extend([k, k])
            else:
                new_t.append(child)
                parent.append(k)
    return TriMesh(new_v, np.array(new_t), parent=np.array(parent))


def uniform_refine(mesh: TriMesh, times: int = 1) -> TriMesh:
    for _ in range(times):
        mesh = refine(mesh, MarkSet(frozenset(range(mesh.nt)), 0.0))
    return mesh


# ---------------------------------------------------------------------------
# text format


def write_mesh(mesh: TriMesh, path) -> None:
    lines = [f"{mesh.nv} {mesh.nt} {len(mesh.boundary_edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    lines += [f"{a} {b} {tag}" for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        nv, nt, nb = (int(x) for x in rows[0])
        v = np.array([[float(x) for x in r] for r in rows[1 : 1 + nv]])
        t = np.array([[int(x) for x in r] for r in rows[1 + nv : 1 + nv + nt]])
        b = np.array(
            [[int(x) for x in r] for r in rows[1 + nv + nt : 1 + nv + nt + nb]]
        ).reshape(-1, 3)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed mesh file {path}: {exc}") from None
    if len(v) != nv or len(t) != nt or len(b) != nb:
        raise ValueError(f"malformed mesh file {path}: section sizes do not match header")
    return TriMesh(v, t, b[:, :2], b[:, 2])
