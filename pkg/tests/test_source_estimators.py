"""Tests for the FOSLS and residual source estimators."""
import numpy as np
import pytest

from clustergap.fem_core import FeSpace, FoslsResolvent, GalerkinResolvent, OperatorSpec, interpolate
from clustergap.filters import ContourCircle, butterworth
from clustergap.mesh2d import structured_lshape, structured_square
from clustergap.source_estimators import (
    FoslsEstimator,
    ResidualEstimator,
    fosls_estimate,
    local_norms,
    residual_estimate,
    y_inner,
)

PI = np.pi
FILT = butterworth(ContourCircle(5 * PI**2, 5, 4))
SMOOTH = lambda x, y: np.sin(PI * x) * np.sin(2 * PI * y) + x * y * (1 - x) * (1 - y)


def _estimators(n=4, degree=2):
    m = structured_square(n)
    V = FeSpace(m, degree)
    yield "residual", V, ResidualEstimator(FILT, GalerkinResolvent(V))
    R = FoslsResolvent(m)
    yield "fosls", R.space, FoslsEstimator(FILT, R)


@pytest.fixture(params=["residual", "fosls"])
def setup(request):
    for name, V, est in _estimators():
        if name == request.param:
            return V, est


class TestFieldAlgebra:
    def test_linearity(self, setup):
        V, est = setup
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((2, V.dof_count)) + 1j * rng.standard_normal((2, V.dof_count))
        alpha = 0.3 - 2j
        lhs = est(a + alpha * b)
        fa, fb = est(a), est(b)
        for probe in (fa, fb):
            assert abs(
                y_inner(lhs, probe) - y_inner(fa, probe) - alpha * y_inner(fb, probe)
            ) < 1e-10 * lhs.norm() * probe.norm()

    def test_block_matches_single(self, setup):
        V, est = setup
        X = np.random.default_rng(1).standard_normal((V.dof_count, 2))
        f_block = est.fields(X)[1]
        f_single = est(X[:, 1])
        assert abs(f_block.norm() - f_single.norm()) < 1e-12 * f_single.norm()

    def test_hermitian_inner_product(self, setup):
        V, est = setup
        rng = np.random.default_rng(2)
        f1, f2 = est.fields(rng.standard_normal((V.dof_count, 2)))
        assert abs(y_inner(f1, f2) - np.conj(y_inner(f2, f1))) < 1e-12
        assert y_inner(f1, f1).real > 0

    def test_scalar_multiple(self, setup):
        V, est = setup
        f = est(np.ones(V.dof_count))
        assert abs((f * 2j).norm() - 2 * f.norm()) < 1e-12 * f.norm()

    def test_local_norms_sum(self, setup):
        V, est = setup
        f = est(np.random.default_rng(3).standard_normal(V.dof_count))
        eta = local_norms(f)
        assert eta.shape == (V.mesh.nt,)
        assert abs(np.sqrt(np.sum(eta**2)) - f.norm()) < 1e-12 * f.norm()

    def test_one_part_group_per_pole(self, setup):
        V, est = setup
        f = est(np.ones(V.dof_count))
        assert f.npoles == 4
        assert len(f.parts) == 8

    def test_incompatible_fields(self):
        (_, V, e1), (_, V2, e2) = list(_estimators())
        with pytest.raises(ValueError):
            y_inner(e1(np.ones(V.dof_count)), e2(np.ones(V2.dof_count)))


class TestResidualEstimator:
    @pytest.mark.parametrize("degree", [1, 2])
    def test_rate_for_smooth_data(self, degree):
        # error of each source problem is O(h^p) in H1
        etas = []
        for n in (8, 16):
            V = FeSpace(structured_square(n), degree)
            est = ResidualEstimator(FILT, GalerkinResolvent(V))
            etas.append(est(interpolate(V, SMOOTH).coeffs).norm())
        assert np.log2(etas[0] / etas[1]) > degree - 0.35

    def test_corner_dominates_on_lshape(self):
        V = FeSpace(structured_lshape(8), 1)
        f = ResidualEstimator(FILT, GalerkinResolvent(V))(interpolate(V, lambda x, y: 1 + 0 * x).coeffs)
        eta = local_norms(f)
        c = V.mesh.centroids()
        near = np.hypot(c[:, 0] - 0.5, c[:, 1] - 0.5) < 0.2
        assert eta[near].mean() > eta[~near].mean()

    def test_potential_enters_element_term(self):
        V = FeSpace(structured_square(4), 1)
        v = interpolate(V, SMOOTH).coeffs
        f0 = ResidualEstimator(FILT, GalerkinResolvent(V))(v)
        f1 = ResidualEstimator(FILT, GalerkinResolvent(V, OperatorSpec(5j)))(v)
        assert abs(f0.norm() - f1.norm()) > 1e-6

    def test_convenience(self):
        V = FeSpace(structured_square(4), 2)
        R = GalerkinResolvent(V)
        v = interpolate(V, SMOOTH)
        assert residual_estimate(FILT, R, v).norm() == pytest.approx(ResidualEstimator(FILT, R)(v.coeffs).norm())
        with pytest.raises(ValueError):
            residual_estimate(FILT, R, interpolate(FeSpace(V.mesh, 1), SMOOTH))


class TestFoslsEstimator:
    def test_first_order_rate_for_small_poles(self):
        filt = butterworth(ContourCircle(0, 2, 4))
        etas = []
        for n in (8, 16, 32):
            R = FoslsResolvent(structured_square(n))
            etas.append(FoslsEstimator(filt, R)(interpolate(R.space, SMOOTH).coeffs).norm())
        assert np.log2(etas[1] / etas[2]) > 0.9

    def test_preasymptotic_for_large_poles(self):
        # |z_k|^2 weights the L2 part, so nothing is gained until h |z_k|^(1/2) is small
        etas = []
        for n in (8, 32):
            R = FoslsResolvent(structured_square(n))
            etas.append(FoslsEstimator(FILT, R)(interpolate(R.space, SMOOTH).coeffs).norm())
        assert etas[1] > 0.8 * etas[0]

    def test_is_least_squares_minimum(self):
        # the estimator equals the minimal value of the least-squares functional,
        # so it cannot exceed the functional at the zero pair, which is ||v||
        m = structured_square(6)
        R = FoslsResolvent(m)
        v = interpolate(R.space, SMOOTH)
        f = FoslsEstimator(FILT, R)(v.coeffs)
        vnorm2 = np.vdot(v.coeffs, R.space.mass() @ v.coeffs).real
        per_pole = {}
        for p in f.parts:
            per_pole[p.pole] = per_pole.get(p.pole, 0.0) + p.item_squares().sum()
        assert all(val <= vnorm2 * (1 + 1e-12) for val in per_pole.values())

    def test_p2_input(self):
        m = structured_square(4)
        R = FoslsResolvent(m)
        V2 = FeSpace(m, 2)
        f = fosls_estimate(FILT, R, interpolate(V2, SMOOTH))
        assert np.isfinite(f.norm()) and f.norm() > 0
