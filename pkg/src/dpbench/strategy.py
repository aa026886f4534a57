"""Generic linear-strategy measurement with least-squares reconstruction.

A strategy is a set of linear queries over cells.  Running it measures every
row with Laplace noise calibrated to the strategy's sensitivity (max column
L1 norm) and reconstructs cell estimates by least squares, which is unbiased
whenever the strategy spans the cell space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import DataVector
from .primitives import laplace_vector
from .rng import RngStream, as_generator


@dataclass(frozen=True)
class StrategySpec:
    """A dense matrix of linear queries (rows) over domain cells (columns)."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.size == 0:
            raise ValueError("strategy must be a non-empty 2D matrix")
        rows = rows.copy()
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def sensitivity(self) -> float:
        delta = float(np.abs(self.rows).sum(axis=0).max())
        if delta <= 0:
            raise ValueError("strategy sensitivity must be positive")
        return delta

    @cached_property
    def pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.rows)

    @cached_property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.rows))


def run_strategy(
    strategy: StrategySpec,
    x: DataVector,
    epsilon: float,
    rng: "RngStream | np.random.Generator",
) -> np.ndarray:
    """Measure the strategy rows and return least-squares cell estimates."""
    n = x.domain.size
    if strategy.rows.shape[1] != n:
        raise ValueError("strategy width does not match the domain")
    if strategy.rank < n:
        raise ValueError("strategy is rank deficient; cell estimates undefined")
    gen = as_generator(rng)
    answers = strategy.rows @ x.counts.astype(np.float64)
    noisy = answers + laplace_vector(strategy.sensitivity, epsilon, len(answers), gen)
    return strategy.pinv @ noisy


def identity_strategy(n: int) -> StrategySpec:
    return StrategySpec(np.eye(n))


def haar_strategy(n: int) -> StrategySpec:
    """Unnormalized Haar rows (entries +-1) plus the total row.

    Every cell appears once per level, so the sensitivity is 1 + log2(n).
    """
    if n & (n - 1) or n < 1:
        raise ValueError("n must be a power of two")
    rows = [np.ones(n)]
    span = n
    while span > 1:
        half = span // 2
        for start in range(0, n, span):
            row = np.zeros(n)
            row[start : start + half] = 1.0
            row[start + half : start + span] = -1.0
            rows.append(row)
        span = half
    return StrategySpec(np.array(rows))
