"""Native 2D mechanisms: fixed quadtree, uniform and adaptive grids, and the
noisy kd-tree, plus the Hilbert linearization used by the 1D mechanisms.

Grid sizes follow the published square-root rule sqrt(scale * epsilon / c),
which keeps the partition a function of the scale-epsilon product.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from ..core import DataVector, Domain, Workload
from ..hilbert import hilbert_positions, pad_to_hilbert_grid
from ..primitives import exact_stage_split, laplace_vector
from ..rng import RngStream, as_generator
from ..trees import build_tree, spread_leaves, tree_least_squares
from .base import AlgorithmSpec, MechanismResult, register, result_from_cells
from .data_independent import _measure_uniform_levels


def hilbert_linearize(x: DataVector) -> tuple[DataVector, np.ndarray]:
    """Permute a 2D histogram into Hilbert-curve order (padded to a square
    power-of-two side).  Returns the 1D vector and the position map whose
    entry [r, c] is the 1D index of cell (r, c)."""
    if x.domain.ndim != 2:
        raise ValueError("hilbert linearization needs a 2D domain")
    grid, positions = pad_to_hilbert_grid(x.as_grid())
    lin = np.zeros(positions.size, dtype=np.int64)
    lin[positions.reshape(-1)] = grid.reshape(-1)
    return DataVector(Domain((lin.size,)), lin), positions


def hilbert_restore(lin_cells: np.ndarray, positions: np.ndarray, domain: Domain) -> np.ndarray:
    """Map 1D estimates back to the (unpadded) 2D cell order."""
    rows, cols = domain.axis_sizes
    return np.asarray(lin_cells)[positions[:rows, :cols]].reshape(-1)


def quadtree_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    height: int = 10,
) -> MechanismResult:
    """Fixed quadtree with uniform per-level budget and consistency repair.

    With enough height the leaves are single cells and the mechanism is data
    independent; on larger domains leaves aggregate cells and the uniformity
    assumption introduces bias.
    """
    if x.domain.ndim != 2:
        raise ValueError("quadtree supports 2D domains only")
    if height < 1:
        raise ValueError("height must be >= 1")
    gen = as_generator(rng)
    tree = build_tree(x.domain.axis_sizes, 4, max_depth=height)
    stages = _measure_uniform_levels(tree, x.counts, epsilon, gen)
    tree_least_squares(tree)
    return result_from_cells(spread_leaves(tree), workload, stages)


def _grid_blocks(sizes: tuple[int, int], per_axis: tuple[int, int]):
    # equi-width blocks; remainder cells are absorbed into the last one
    def edges(size, parts):
        parts = max(1, min(parts, size))
        base = size // parts
        return [i * base for i in range(parts)] + [size]

    row_edges = edges(sizes[0], per_axis[0])
    col_edges = edges(sizes[1], per_axis[1])
    return [
        ((row_edges[i], row_edges[i + 1]), (col_edges[j], col_edges[j + 1]))
        for i in range(len(row_edges) - 1)
        for j in range(len(col_edges) - 1)
    ]


def ugrid_side(assumed_scale: float, epsilon: float, c: float) -> int:
    return max(1, round(math.sqrt(max(assumed_scale, 0.0) * epsilon / c)))


def ugrid_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    c: float = 10.0,
    assumed_scale: float | None = None,
) -> MechanismResult:
    """Equi-width grid whose side grows with sqrt(scale * epsilon / c)."""
    if x.domain.ndim != 2:
        raise ValueError("ugrid supports 2D domains only")
    if assumed_scale is None or assumed_scale <= 0:
        raise ValueError("ugrid needs a positive assumed scale")
    gen = as_generator(rng)
    side = ugrid_side(assumed_scale, epsilon, c)
    blocks = _grid_blocks(x.domain.axis_sizes, (side, side))
    grid = x.as_grid().astype(np.float64)
    noise = laplace_vector(1.0, epsilon, len(blocks), gen)
    cells = np.empty(x.domain.axis_sizes)
    for ((r0, r1), (c0, c1)), z in zip(blocks, noise):
        total = grid[r0:r1, c0:c1].sum() + z
        cells[r0:r1, c0:c1] = total / ((r1 - r0) * (c1 - c0))
    return result_from_cells(cells.reshape(-1), workload, (("counts", float(epsilon)),))


def agrid_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    c: float = 10.0,
    c2: float = 5.0,
    rho: float = 0.5,
    assumed_scale: float | None = None,
) -> MechanismResult:
    """Two-level grid: a coarse equi-width pass sizes a per-block fine grid
    from the block's noisy count, then the two levels are reconciled by
    least squares."""
    if x.domain.ndim != 2:
        raise ValueError("agrid supports 2D domains only")
    if assumed_scale is None or assumed_scale <= 0:
        raise ValueError("agrid needs a positive assumed scale")
    gen = as_generator(rng)
    eps_coarse, eps_fine = exact_stage_split(epsilon, [rho, 1.0 - rho])
    # published guidance: quarter of the uniform-grid side, floored at 10
    coarse_side = max(10, math.ceil(ugrid_side(assumed_scale, epsilon, c) / 4))
    blocks = _grid_blocks(x.domain.axis_sizes, (coarse_side, coarse_side))
    grid = x.as_grid().astype(np.float64)
    coarse_noise = laplace_vector(1.0, eps_coarse, len(blocks), gen)
    coarse_var = (1.0 / eps_coarse) ** 2
    fine_var = (1.0 / eps_fine) ** 2
    cells = np.empty(x.domain.axis_sizes)
    for ((r0, r1), (c0, c1)), z in zip(blocks, coarse_noise):
        block_noisy = grid[r0:r1, c0:c1].sum() + z
        fine_side = max(1, round(math.sqrt(max(block_noisy, 0.0) * eps_fine / c2)))
        sub = _grid_blocks((r1 - r0, c1 - c0), (fine_side, fine_side))
        fine_noise = laplace_vector(1.0, eps_fine, len(sub), gen)
        fine = np.array(
            [
                grid[r0 + a0 : r0 + a1, c0 + b0 : c0 + b1].sum() + w
                for ((a0, a1), (b0, b1)), w in zip(sub, fine_noise)
            ]
        )
        # least-squares reconciliation of the block total with its fine cells
        sum_var = len(sub) * fine_var
        combined = (block_noisy / coarse_var + fine.sum() / sum_var) / (
            1.0 / coarse_var + 1.0 / sum_var
        )
        fine += (combined - fine.sum()) / len(sub)
        for ((a0, a1), (b0, b1)), value in zip(sub, fine):
            cells[r0 + a0 : r0 + a1, c0 + b0 : c0 + b1] = value / ((a1 - a0) * (b1 - b0))
    stages = (("coarse", eps_coarse), ("fine", eps_fine))
    return result_from_cells(cells.reshape(-1), workload, stages)


def kd_split_boxes(
    noisy_cells: np.ndarray,
    axis_sizes: tuple[int, ...],
    max_leaves: int,
) -> list[tuple[tuple[int, int], ...]]:
    """FIFO median splits of noisy mass, alternating axes from axis 0.

    Splits at the lowest index reaching half the box mass; stops when
    ``max_leaves`` boxes exist or nothing is splittable.
    """
    grid = np.asarray(noisy_cells, dtype=np.float64).reshape(axis_sizes)
    ndim = grid.ndim
    root = tuple((0, s) for s in axis_sizes)
    final: list[tuple[tuple[int, int], ...]] = []
    queue: deque[tuple[tuple[tuple[int, int], ...], int]] = deque([(root, 0)])
    while queue and len(final) + len(queue) < max_leaves:
        box, depth = queue.popleft()
        extents = [hi - lo for lo, hi in box]
        if all(e == 1 for e in extents):
            final.append(box)
            continue
        axis = depth % ndim
        if extents[axis] == 1:
            axis = (axis + 1) % ndim
        lo, hi = box[axis]
        sub = grid[tuple(slice(l, h) for l, h in box)]
        marginal = sub.sum(axis=tuple(a for a in range(ndim) if a != axis))
        cum = np.cumsum(marginal)
        half = cum[-1] / 2.0
        # cum need not be monotone (noisy mass can be negative), so scan
        reached = np.flatnonzero(cum >= half)
        split = int(reached[0]) + 1 if reached.size else 1
        split = min(max(split, 1), extents[axis] - 1)
        for seg in ((lo, lo + split), (lo + split, hi)):
            child = tuple(seg if a == axis else box[a] for a in range(ndim))
            queue.append((child, depth + 1))
    final.extend(box for box, _ in queue)
    return final


def dpcube_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    rho: float = 0.5,
    n_p: int = 10,
) -> MechanismResult:
    """Noisy-count kd partition with fresh box counts and two-source
    averaging.

    Stage one buys noisy cell counts that both guide the median splits and
    contribute (summed per box) to the final estimate; stage two measures
    each box directly and the two estimates are averaged by inverse
    variance.
    """
    if n_p < 1:
        raise ValueError("need at least one box")
    gen = as_generator(rng)
    eps_cells, eps_boxes = exact_stage_split(epsilon, [rho, 1.0 - rho])
    noisy_cells = x.counts + laplace_vector(1.0, eps_cells, x.domain.size, gen)
    boxes = kd_split_boxes(noisy_cells, x.domain.axis_sizes, n_p)
    grid = x.as_grid().astype(np.float64)
    noisy_grid = noisy_cells.reshape(x.domain.axis_sizes)
    box_noise = laplace_vector(1.0, eps_boxes, len(boxes), gen)
    cells = np.empty(x.domain.axis_sizes)
    cell_var = (1.0 / eps_cells) ** 2
    box_var = (1.0 / eps_boxes) ** 2
    for box, z in zip(boxes, box_noise):
        sl = tuple(slice(lo, hi) for lo, hi in box)
        size = 1
        for lo, hi in box:
            size *= hi - lo
        stage1 = noisy_grid[sl].sum()  # variance grows with the box size
        stage2 = grid[sl].sum() + z
        w1, w2 = 1.0 / (size * cell_var), 1.0 / box_var
        combined = (stage1 * w1 + stage2 * w2) / (w1 + w2)
        cells[sl] = combined / size
    stages = (("cells", eps_cells), ("boxes", eps_boxes))
    return result_from_cells(cells.reshape(-1), workload, stages)


@register("quadtree")
def _quadtree(**params) -> AlgorithmSpec:
    params.setdefault("height", 10)
    return AlgorithmSpec("quadtree", quadtree_run, params, dims=(2,))


@register("ugrid")
def _ugrid(**params) -> AlgorithmSpec:
    params.setdefault("c", 10.0)
    return AlgorithmSpec("ugrid", ugrid_run, params, dims=(2,), needs_scale=True)


@register("agrid")
def _agrid(**params) -> AlgorithmSpec:
    params.setdefault("c", 10.0)
    params.setdefault("c2", 5.0)
    params.setdefault("rho", 0.5)
    return AlgorithmSpec("agrid", agrid_run, params, dims=(2,), needs_scale=True)


@register("dpcube")
def _dpcube(**params) -> AlgorithmSpec:
    params.setdefault("rho", 0.5)
    params.setdefault("n_p", 10)
    return AlgorithmSpec("dpcube", dpcube_run, params)
