"""Dataset generation: shape-preserving resampling at a chosen scale,
synthetic training shapes, and histogram file ingestion.

Resampling isolates the shape (the normalized histogram) of a source dataset
and draws a fresh integral data vector of exactly the requested scale, so
scale, shape, and domain size can be varied independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DataVector, Domain, Shape, coarsen, shape_of
from .rng import RngStream, as_generator

# experiment grids; the desk presets stay below the full published sweep
SCALE_GRID = (10**3, 10**4, 10**5, 10**6, 10**7, 10**8)
DESK_SCALE_GRID = (10**3, 10**4, 10**5, 10**6)
DOMAIN_GRID_1D = (256, 512, 1024, 2048, 4096)
DOMAIN_GRID_2D = ((32, 32), (64, 64), (128, 128), (256, 256))


@dataclass(frozen=True)
class SourceDataset:
    """A named source histogram at its native domain and scale."""

    name: str
    data: DataVector

    @property
    def native_scale(self) -> int:
        return self.data.scale


def _shape_on_domain(source: SourceDataset, target: Domain) -> Shape:
    data = source.data
    if data.domain == target:
        return shape_of(data)
    if data.domain.ndim != target.ndim:
        raise ValueError("target domain must match the source dimensionality")
    factors = []
    for native, wanted in zip(data.domain.axis_sizes, target.axis_sizes):
        if native % wanted != 0:
            raise ValueError(
                f"target axis size {wanted} must divide the native size {native}"
            )
        factors.append(native // wanted)
    return shape_of(coarsen(data, tuple(factors)))


def generate(
    source: "SourceDataset | Shape",
    target_domain: Domain,
    m: int,
    rng: "RngStream | np.random.Generator",
) -> DataVector:
    """Draw m records with replacement from the source's shape.

    The output has exactly m records (multinomial sampling, realized via the
    generator's sequential conditional-binomial method).
    """
    if m < 1:
        raise ValueError("target scale must be >= 1")
    if isinstance(source, Shape):
        if source.domain != target_domain:
            raise ValueError("shape domain must equal the target domain")
        shape = source
    else:
        shape = _shape_on_domain(source, target_domain)
    gen = as_generator(rng)
    counts = gen.multinomial(int(m), shape.probs)
    return DataVector(target_domain, counts)


def synth_shape(kind: str, n: int, params: dict | None = None, rng=None) -> Shape:
    """Synthetic 1D training shapes: powerlaw, normal, or uniform."""
    del rng  # shapes are deterministic in their parameters
    if n < 1:
        raise ValueError("n must be >= 1")
    params = dict(params or {})
    cells = np.arange(n, dtype=np.float64)
    if kind == "uniform":
        weights = np.ones(n)
    elif kind == "powerlaw":
        exponent = float(params.pop("exponent", 1.0))
        if exponent < 0:
            raise ValueError("powerlaw exponent must be non-negative")
        weights = (cells + 1.0) ** (-exponent)
    elif kind == "normal":
        mu = float(params.pop("mu", n / 2.0))
        sigma = float(params.pop("sigma", n / 8.0))
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        weights = np.exp(-0.5 * ((cells - mu) / sigma) ** 2)
    else:
        raise ValueError(f"unknown shape kind {kind!r}")
    if params:
        raise ValueError(f"unexpected parameters {sorted(params)} for {kind!r}")
    return Shape(Domain((n,)), weights / weights.sum())


class HistogramFormatError(ValueError):
    """A histogram file does not follow the CSV format."""


def load_histogram_csv(path: "str | Path") -> SourceDataset:
    """Read a histogram file.

    Format: a header line ``n=<int>`` (1D) or ``rows=<int>,cols=<int>`` (2D)
    followed by comma-separated non-negative integer counts in row-major
    order, split across any number of lines.  UTF-8, LF line endings.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise HistogramFormatError(f"{path}: cannot read file: {exc}") from exc
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise HistogramFormatError(f"{path}: empty file")
    header = lines[0].replace(" ", "")
    if header.startswith("n="):
        try:
            sizes = (int(header[2:]),)
        except ValueError as exc:
            raise HistogramFormatError(f"{path}: bad 1D header {lines[0]!r}") from exc
    elif header.startswith("rows="):
        parts = dict(
            item.split("=", 1) for item in header.split(",") if "=" in item
        )
        try:
            sizes = (int(parts["rows"]), int(parts["cols"]))
        except (KeyError, ValueError) as exc:
            raise HistogramFormatError(f"{path}: bad 2D header {lines[0]!r}") from exc
    else:
        raise HistogramFormatError(
            f"{path}: header must be 'n=<int>' or 'rows=<int>,cols=<int>'"
        )
    domain = Domain(sizes)
    tokens = [tok for line in lines[1:] for tok in line.split(",") if tok.strip()]
    try:
        counts = [int(tok) for tok in tokens]
    except ValueError as exc:
        raise HistogramFormatError(f"{path}: non-integer count: {exc}") from exc
    if len(counts) != domain.size:
        raise HistogramFormatError(
            f"{path}: expected {domain.size} counts, found {len(counts)}"
        )
    if any(c < 0 for c in counts):
        raise HistogramFormatError(f"{path}: negative counts are not allowed")
    return SourceDataset(path.stem, DataVector(domain, np.array(counts)))


def geometric_witness(n: int) -> DataVector:
    """Counts halving cell by cell: 2^(n-1), ..., 2, 1."""
    if n < 1 or n > 62:
        raise ValueError("witness size must be in [1, 62] to fit 64-bit counts")
    counts = 2 ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return DataVector(Domain((n,)), counts)


def linear_witness(n: int) -> DataVector:
    """Counts growing linearly: 1, 2, ..., n."""
    return DataVector(Domain((n,)), np.arange(1, n + 1, dtype=np.int64))


def spiked_witness(n: int, scale: int = 10_000) -> DataVector:
    """All mass in the first cell."""
    counts = np.zeros(n, dtype=np.int64)
    counts[0] = scale
    return DataVector(Domain((n,)), counts)


def two_level_witness_1d(n: int = 64, high: int = 320, low: int = 100) -> DataVector:
    """Two-block data whose mass median sits strictly inside the last dense
    cell, so noisy median splits land on the block boundary deterministically
    and block-respecting partitions have zero bias."""
    if n % 4 != 0:
        raise ValueError("need n divisible by 4")
    quarter = n // 4
    if high <= 3 * low or (quarter > 2 and high >= 3 * quarter * low / (quarter - 2)):
        raise ValueError("high/low ratio must keep the median inside the dense block")
    counts = np.full(n, low, dtype=np.int64)
    counts[:quarter] = high
    return DataVector(Domain((n,)), counts)


def two_level_witness_2d(side: int = 8, high: int = 320, low: int = 100) -> DataVector:
    """2D version of the two-block witness: the top quarter of rows is
    dense, with the mass median inside the last dense row."""
    if side % 4 != 0:
        raise ValueError("need side divisible by 4")
    grid = np.full((side, side), low, dtype=np.int64)
    grid[: side // 4, :] = high
    return DataVector(Domain((side, side)), grid.reshape(-1))
