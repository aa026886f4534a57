"""Shared mechanism result type and the algorithm registry.

Every mechanism returns a :class:`MechanismResult` carrying cell estimates,
workload answers, and a per-stage budget ledger whose entries sum bit-exactly
to the epsilon the mechanism was given (audited by the budget check suite).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..core import DataVector, Workload
from ..rng import RngStream


@dataclass(frozen=True)
class MechanismResult:
    """Private cell estimates plus derived workload answers."""

    cell_estimates: np.ndarray
    answers: np.ndarray
    stages: tuple[tuple[str, float], ...]

    def __post_init__(self):
        cells = np.asarray(self.cell_estimates, dtype=np.float64).reshape(-1).copy()
        answers = np.asarray(self.answers, dtype=np.float64).reshape(-1).copy()
        cells.flags.writeable = False
        answers.flags.writeable = False
        object.__setattr__(self, "cell_estimates", cells)
        object.__setattr__(self, "answers", answers)
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def epsilon_spent(self) -> float:
        total = 0.0
        for _, eps in self.stages:
            total += eps
        return total


def result_from_cells(
    cells: np.ndarray, workload: Workload, stages
) -> MechanismResult:
    cells = np.asarray(cells, dtype=np.float64).reshape(-1)
    return MechanismResult(cells, workload.answer(cells), stages)


MechanismFn = Callable[..., MechanismResult]


@dataclass(frozen=True)
class AlgorithmSpec:
    """A named, parameterized mechanism ready to run inside the harness.

    ``needs_scale`` marks algorithms that consume the dataset scale as side
    information; ``side_info='noisy'`` replaces it with a privately estimated
    scale paid for out of the mechanism's own budget.
    """

    name: str
    fn: MechanismFn
    params: dict = field(default_factory=dict)
    dims: tuple[int, ...] = (1, 2)
    needs_scale: bool = False
    side_info: str = "true"  # or "noisy"

    def run(self, x: DataVector, workload: Workload, epsilon: float, rng: RngStream) -> MechanismResult:
        if x.domain.ndim not in self.dims:
            raise ValueError(f"{self.name} does not support {x.domain.ndim}D domains")
        params = dict(self.params)
        if not self.needs_scale:
            return self.fn(x, workload, epsilon, rng, **params)
        if self.side_info == "true":
            params.setdefault("assumed_scale", float(max(x.scale, 1)))
            return self.fn(x, workload, epsilon, rng, **params)
        # pay for the side information out of the budget
        from ..harness import estimate_scale_side

        noisy_scale, remaining, spent = estimate_scale_side(
            x, epsilon, rng=rng.child(0x51DE)
        )
        params.setdefault("assumed_scale", noisy_scale)
        result = self.fn(x, workload, remaining, rng, **params)
        # appended so the ledger's left-to-right sum stays bit-exact:
        # the mechanism's own stages sum to `remaining` first
        return replace(result, stages=result.stages + (("side_info", spent),))

    def with_params(self, **overrides) -> "AlgorithmSpec":
        merged = dict(self.params)
        merged.update(overrides)
        return replace(self, params=merged)


_REGISTRY: dict[str, Callable[..., AlgorithmSpec]] = {}


def register(name: str):
    def wrap(factory):
        _REGISTRY[name] = factory
        return factory

    return wrap


def algorithm_names() -> list[str]:
    return sorted(_REGISTRY)


def build_algorithm(name: str, **params) -> AlgorithmSpec:
    if name not in _REGISTRY:
        raise KeyError(f"unknown algorithm {name!r}; known: {algorithm_names()}")
    return _REGISTRY[name](**params)
