"""Histogram, workload, and privacy-budget model shared by all mechanisms.

Data is a non-negative integer histogram over a 1D or 2D domain of cells
(row-major in 2D).  Workloads are ordered lists of axis-aligned range queries
with inclusive 0-based bounds.  Exact answering uses prefix sums, so workloads
with thousands of queries stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream, as_generator


class DomainMismatchError(ValueError):
    """Two objects that must share a domain do not."""


@dataclass(frozen=True)
class Domain:
    """A grid of cells, one axis (1D) or two axes (2D, row-major)."""

    axis_sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.axis_sizes) not in (1, 2):
            raise ValueError(f"only 1D/2D domains supported, got {len(self.axis_sizes)} axes")
        if any(int(s) < 1 for s in self.axis_sizes):
            raise ValueError(f"axis sizes must be >= 1, got {self.axis_sizes}")
        object.__setattr__(self, "axis_sizes", tuple(int(s) for s in self.axis_sizes))

    @property
    def ndim(self) -> int:
        return len(self.axis_sizes)

    @property
    def size(self) -> int:
        n = 1
        for s in self.axis_sizes:
            n *= s
        return n


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype).reshape(-1).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DataVector:
    """Non-negative integer counts, one per cell (row-major for 2D)."""

    domain: Domain
    counts: np.ndarray

    def __post_init__(self):
        counts = _frozen_array(self.counts, np.int64)
        if counts.size != self.domain.size:
            raise DomainMismatchError(
                f"expected {self.domain.size} counts for domain {self.domain.axis_sizes}, "
                f"got {counts.size}"
            )
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def scale(self) -> int:
        return int(self.counts.sum())

    def as_grid(self) -> np.ndarray:
        return self.counts.reshape(self.domain.axis_sizes)


@dataclass(frozen=True)
class Shape:
    """A probability vector over the cells of a domain (counts / scale)."""

    domain: Domain
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen_array(self.probs, np.float64)
        if probs.size != self.domain.size:
            raise DomainMismatchError("probs length must equal the number of cells")
        if np.any(probs < 0):
            raise ValueError("probs must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probs must sum to 1, got {probs.sum()!r}")
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class RangeQuery:
    """Inclusive per-axis bounds [lo_j, hi_j], 0-based cell indices."""

    lows: tuple[int, ...]
    highs: tuple[int, ...]

    def __post_init__(self):
        if len(self.lows) != len(self.highs):
            raise ValueError("lows and highs must have equal length")
        object.__setattr__(self, "lows", tuple(int(v) for v in self.lows))
        object.__setattr__(self, "highs", tuple(int(v) for v in self.highs))
        for lo, hi in zip(self.lows, self.highs):
            if lo < 0 or lo > hi:
                raise ValueError(f"bad range bounds ({lo}, {hi})")


@dataclass(frozen=True)
class Workload:
    """An ordered list of range queries sharing one domain."""

    domain: Domain
    queries: tuple[RangeQuery, ...]
    # dense (q, ndim) bound arrays kept alongside for vectorized answering
    _lows: np.ndarray = field(repr=False, default=None)
    _highs: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not self.queries:
            raise ValueError("a workload needs at least one query")
        k = self.domain.ndim
        lows = np.array([q.lows for q in self.queries], dtype=np.int64)
        highs = np.array([q.highs for q in self.queries], dtype=np.int64)
        if lows.shape[1] != k:
            raise DomainMismatchError("query dimensionality does not match the domain")
        for axis, size in enumerate(self.domain.axis_sizes):
            if np.any(highs[:, axis] >= size):
                raise ValueError("query bounds exceed the domain")
        lows.flags.writeable = False
        highs.flags.writeable = False
        object.__setattr__(self, "queries", tuple(self.queries))
        object.__setattr__(self, "_lows", lows)
        object.__setattr__(self, "_highs", highs)

    def __len__(self) -> int:
        return len(self.queries)

    def answer(self, cells: np.ndarray) -> np.ndarray:
        """Exact answers of every query against a (real-valued) cell vector."""
        cells = np.asarray(cells, dtype=np.float64).reshape(self.domain.axis_sizes)
        if self.domain.ndim == 1:
            prefix = np.concatenate([[0.0], np.cumsum(cells)])
            return prefix[self._highs[:, 0] + 1] - prefix[self._lows[:, 0]]
        integral = np.zeros((cells.shape[0] + 1, cells.shape[1] + 1))
        integral[1:, 1:] = cells.cumsum(axis=0).cumsum(axis=1)
        r0, c0 = self._lows[:, 0], self._lows[:, 1]
        r1, c1 = self._highs[:, 0] + 1, self._highs[:, 1] + 1
        return integral[r1, c1] - integral[r0, c1] - integral[r1, c0] + integral[r0, c0]


@dataclass(frozen=True)
class PrivacyBudget:
    """A finite, positive epsilon."""

    epsilon: float

    def __post_init__(self):
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps <= 0:
            raise ValueError(f"epsilon must be positive and finite, got {eps!r}")
        object.__setattr__(self, "epsilon", eps)


def answer_workload(workload: Workload, x: DataVector) -> np.ndarray:
    """Exact workload answers: entry i sums x over query i's rectangle."""
    if workload.domain != x.domain:
        raise DomainMismatchError("workload and data use different domains")
    return workload.answer(x.counts)


def shape_of(x: DataVector) -> Shape:
    """Normalize a histogram to its shape.  Undefined for an empty histogram."""
    s = x.scale
    if s == 0:
        raise ValueError("shape is undefined for an all-zero histogram")
    return Shape(x.domain, x.counts / s)


def coarsen(x: DataVector, factors: tuple[int, ...] | int) -> DataVector:
    """Group adjacent cells by the given per-axis factor; preserves scale."""
    if isinstance(factors, int):
        factors = (factors,) * x.domain.ndim
    if len(factors) != x.domain.ndim:
        raise ValueError("one factor per axis required")
    new_sizes = []
    for size, f in zip(x.domain.axis_sizes, factors):
        f = int(f)
        if f < 1 or size % f != 0:
            raise ValueError(f"factor {f} does not divide axis size {size}")
        new_sizes.append(size // f)
    grid = x.as_grid()
    if x.domain.ndim == 1:
        grouped = grid.reshape(new_sizes[0], factors[0]).sum(axis=1)
    else:
        grouped = (
            grid.reshape(new_sizes[0], factors[0], new_sizes[1], factors[1])
            .sum(axis=(1, 3))
        )
    return DataVector(Domain(tuple(new_sizes)), grouped.reshape(-1))


def make_prefix_workload(n: int) -> Workload:
    """The n queries [0, i] on a 1D domain of n cells."""
    n = int(n)
    if n < 1:
        raise ValueError("domain size must be >= 1")
    queries = tuple(RangeQuery((0,), (i,)) for i in range(n))
    return Workload(Domain((n,)), queries)


def make_identity_workload(domain: Domain) -> Workload:
    """One singleton query per cell, in row-major order."""
    if domain.ndim == 1:
        queries = tuple(RangeQuery((i,), (i,)) for i in range(domain.size))
    else:
        rows, cols = domain.axis_sizes
        queries = tuple(
            RangeQuery((r, c), (r, c)) for r in range(rows) for c in range(cols)
        )
    return Workload(domain, queries)


def make_total_workload(domain: Domain) -> Workload:
    """The single full-domain query."""
    lo = tuple(0 for _ in domain.axis_sizes)
    hi = tuple(s - 1 for s in domain.axis_sizes)
    return Workload(domain, (RangeQuery(lo, hi),))


def make_random_range_workload(
    domain: Domain, count: int, seed: "int | RngStream"
) -> Workload:
    """Uniformly random ranges: per axis, two uniform cell indices, ordered.

    Deterministic given the seed.  2D ranges are uniform over ordered index
    pairs per axis (not over rectangle areas).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    stream = seed if isinstance(seed, RngStream) else RngStream(int(seed))
    gen = as_generator(stream)
    queries = []
    for _ in range(count):
        lows, highs = [], []
        for size in domain.axis_sizes:
            a, b = gen.integers(0, size, size=2)
            lows.append(min(a, b))
            highs.append(max(a, b))
        queries.append(RangeQuery(tuple(lows), tuple(highs)))
    return Workload(domain, tuple(queries))
