"""Hilbert curve order for square power-of-two grids.

Used to linearize 2D domains so that 1D partitioning mechanisms see
spatially clustered cells: consecutive curve positions are always
4-neighbors in the grid.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .transforms import next_power_of_two


@lru_cache(maxsize=None)
def hilbert_positions(side: int) -> np.ndarray:
    """(side, side) array mapping cell (row, col) to its curve position."""
    if side < 1 or side & (side - 1):
        raise ValueError("side must be a positive power of two")
    d = np.arange(side * side, dtype=np.int64)
    t = d.copy()
    x = np.zeros_like(d)
    y = np.zeros_like(d)
    s = 1
    while s < side:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        swap = ry == 0
        flip = swap & (rx == 1)
        x[flip] = s - 1 - x[flip]
        y[flip] = s - 1 - y[flip]
        xs = x[swap]
        x[swap] = y[swap]
        y[swap] = xs
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    positions = np.empty((side, side), dtype=np.int64)
    positions[x, y] = d
    positions.flags.writeable = False
    return positions


def pad_to_hilbert_grid(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad a 2D array to the enclosing power-of-two square.

    Returns (padded grid, curve positions of the padded grid).
    """
    grid = np.asarray(grid)
    side = next_power_of_two(max(grid.shape))
    padded = np.zeros((side, side), dtype=grid.dtype)
    padded[: grid.shape[0], : grid.shape[1]] = grid
    return padded, hilbert_positions(side)
