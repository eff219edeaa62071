"""Tests for triangulations, marking and refinement."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustergap.mesh2d import (
    MarkSet,
    TriMesh,
    check_conforming,
    from_polygon,
    greedy_mark,
    read_mesh,
    refine,
    structured_lshape,
    structured_square,
    uniform_refine,
    write_mesh,
)


def marks(*idx):
    return MarkSet(frozenset(idx), 0.5)


class TestConstruction:
    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_square(self, n):
        m = structured_square(n)
        assert m.nt == 2 * n * n and m.nv == (n + 1) ** 2
        assert abs(m.areas().sum() - 1) < 1e-14
        check_conforming(m)

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_lshape(self, n):
        m = structured_lshape(n)
        assert abs(m.areas().sum() - 0.75) < 1e-14
        assert m.nt == 3 * n * n // 2
        check_conforming(m)

    def test_lshape_odd_rejected(self):
        with pytest.raises(ValueError):
            structured_lshape(3)

    def test_orientation_fixed(self):
        m = TriMesh(np.array([[0, 0], [1, 0], [0, 1]]), np.array([[0, 2, 1]]))
        assert m.areas()[0] > 0

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            TriMesh(np.array([[0, 0], [1, 0], [2, 0]]), np.array([[0, 1, 2]]))

    def test_boundary_vertices_of_square(self):
        m = structured_square(3)
        v = m.vertices
        on_bnd = (v.min(axis=1) == 0) | (v.max(axis=1) == 1)
        np.testing.assert_array_equal(m.boundary_vertex_mask(), on_bnd)

    def test_edge_lengths_opposite_vertex(self):
        m = TriMesh(np.array([[0.0, 0], [3, 0], [0, 4]]), np.array([[0, 1, 2]]))
        np.testing.assert_allclose(m.edge_lengths()[0], [5, 4, 3])
        assert m.diameters()[0] == 5

    def test_edge_elements(self):
        m = structured_square(2)
        edges, _ = m.edges()
        ee = m.edge_elements()
        nbnd = np.sum(ee[:, 1] < 0)
        assert nbnd == len(m.boundary_edges) == 8
        assert len(edges) == 16


class TestPolygon:
    def test_unit_square(self):
        m = from_polygon([[0, 0], [1, 0], [1, 1], [0, 1]], 0.3)
        check_conforming(m)
        assert abs(m.areas().sum() - 1) < 1e-12
        assert m.diameters().max() <= 0.3

    def test_clockwise_input(self):
        m = from_polygon([[0, 0], [0, 1], [1, 1], [1, 0]], 1.0)
        assert abs(m.areas().sum() - 1) < 1e-12

    def test_lshape_polygon(self):
        poly = [[0, 0], [1, 0], [1, 0.5], [0.5, 0.5], [0.5, 1], [0, 1]]
        m = from_polygon(poly, 0.2)
        check_conforming(m)
        assert abs(m.areas().sum() - 0.75) < 1e-12

    def test_self_intersecting(self):
        with pytest.raises(ValueError):
            from_polygon([[0, 0], [1, 1], [1, 0], [0, 1]], 0.5)


class TestMarking:
    def test_greedy(self):
        ms = greedy_mark([1.0, 0.5, 0.95, 0.1], 0.9)
        assert set(ms.marked) == {0, 2}

    def test_max_always_marked(self):
        assert 3 in greedy_mark([0.1, 0.2, 0.3, 0.4], 0.99)

    @pytest.mark.parametrize("eta", [[0.0, 0.0], [1.0, -1.0], [np.nan, 1.0]])
    def test_invalid(self, eta):
        with pytest.raises(ValueError):
            greedy_mark(eta)

    @pytest.mark.parametrize("theta", [0.0, 1.0])
    def test_theta_range(self, theta):
        with pytest.raises(ValueError):
            greedy_mark([1.0], theta)


class TestRefine:
    def test_single_mark_conforming(self):
        m = refine(structured_square(4), marks(5))
        check_conforming(m)
        assert abs(m.areas().sum() - 1) < 1e-14

    def test_nothing_marked(self):
        m0 = structured_square(2)
        m = refine(m0, MarkSet(frozenset(), 0.5))
        assert m.nt == m0.nt

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            refine(structured_square(2), marks(100))

    def test_uniform_bisects_every_triangle_once(self):
        m0 = structured_square(2)
        m = uniform_refine(m0)
        assert m.nt == 2 * m0.nt
        np.testing.assert_array_equal(np.bincount(m.parent), 2)
        assert uniform_refine(m0, 2).diameters().max() == pytest.approx(0.5 * m0.diameters().max())

    def test_parent_map(self):
        m0 = structured_square(3)
        m = refine(m0, marks(0, 7))
        np.testing.assert_allclose(np.bincount(m.parent, weights=m.areas(), minlength=m0.nt), m0.areas())

    def test_angles_bounded_under_repeated_corner_refinement(self):
        m = structured_square(2)
        amin = m.min_angles().min()
        for _ in range(12):
            c = m.centroids()
            k = int(np.argmin(np.hypot(c[:, 0], c[:, 1])))
            m = refine(m, marks(k))
            check_conforming(m)
        # longest-edge bisection keeps angles bounded below
        assert m.min_angles().min() >= 0.5 * amin

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(0, 10_000), min_size=1, max_size=6), st.integers(1, 3))
    def test_random_marks_conforming(self, seeds, rounds):
        m = structured_lshape(4)
        for r in range(rounds):
            idx = {s % m.nt for s in seeds}
            m = refine(m, MarkSet(frozenset(idx), 0.5))
        check_conforming(m)
        assert abs(m.areas().sum() - 0.75) < 1e-12


class TestIO:
    def test_roundtrip(self, tmp_path):
        m = refine(structured_lshape(4), marks(3))
        write_mesh(m, tmp_path / "m.txt")
        m2 = read_mesh(tmp_path / "m.txt")
        np.testing.assert_array_equal(m.vertices, m2.vertices)
        np.testing.assert_array_equal(m.triangles, m2.triangles)
        np.testing.assert_array_equal(m.boundary_tags, m2.boundary_tags)

    def test_malformed(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("3 1 0\n0 0\n1 0\n")
        with pytest.raises(ValueError):
            read_mesh(p)
