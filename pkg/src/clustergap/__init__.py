"""Rational-filter eigensolvers and eigenspace gap estimators for eigenvalue clusters."""
from .cluster_gap import GapEstimate, estimate_cluster_gap, subspace_gap
from .fem_core import FeSpace, FieldVector, FoslsResolvent, GalerkinResolvent, OperatorSpec
from .feast_solver import ClusterResult, DenseBackend, feast_iterate, hausdorff
from .filters import ContourCircle, RationalFilter, butterworth, cayley, inverse_image
from .mesh2d import TriMesh, greedy_mark, refine, structured_lshape, structured_square
from .source_estimators import EstimatorField, FoslsEstimator, ResidualEstimator

__all__ = [
    "ClusterResult",
    "ContourCircle",
    "DenseBackend",
    "EstimatorField",
    "FeSpace",
    "FieldVector",
    "FoslsEstimator",
    "FoslsResolvent",
    "GalerkinResolvent",
    "GapEstimate",
    "OperatorSpec",
    "RationalFilter",
    "ResidualEstimator",
    "TriMesh",
    "butterworth",
    "cayley",
    "estimate_cluster_gap",
    "feast_iterate",
    "greedy_mark",
    "hausdorff",
    "inverse_image",
    "refine",
    "structured_lshape",
    "structured_square",
    "subspace_gap",
]
