"""Differentially private range-query mechanisms and evaluation harness."""

from .core import (
    DataVector,
    Domain,
    PrivacyBudget,
    RangeQuery,
    Shape,
    Workload,
    answer_workload,
    coarsen,
    make_identity_workload,
    make_prefix_workload,
    make_random_range_workload,
    make_total_workload,
    shape_of,
)
from .mechanisms import AlgorithmSpec, MechanismResult, algorithm_names, build_algorithm
from .rng import RngStream

__all__ = [
    "AlgorithmSpec",
    "DataVector",
    "Domain",
    "MechanismResult",
    "PrivacyBudget",
    "RangeQuery",
    "RngStream",
    "Shape",
    "Workload",
    "algorithm_names",
    "answer_workload",
    "build_algorithm",
    "coarsen",
    "make_identity_workload",
    "make_prefix_workload",
    "make_random_range_workload",
    "make_total_workload",
    "shape_of",
]

__version__ = "0.1.0"
