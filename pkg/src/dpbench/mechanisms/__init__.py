"""Mechanism implementations and the by-name registry."""

from .base import (
    AlgorithmSpec,
    MechanismResult,
    algorithm_names,
    build_algorithm,
    register,
)
from . import data_independent, data_dependent_1d, spatial_2d, tuned  # noqa: F401

__all__ = [
    "AlgorithmSpec",
    "MechanismResult",
    "algorithm_names",
    "build_algorithm",
    "register",
]
