"""Data-independent mechanisms: flat noise, wavelet strategy, and noisy
hierarchies with uniform or workload-tuned budget allocation.

All of these measure a fixed set of linear queries with Laplace noise and
reconstruct cells by least squares, so their error distribution does not
depend on the data.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ..core import DataVector, Workload
from ..hilbert import hilbert_positions, pad_to_hilbert_grid
from ..primitives import exact_stage_split, laplace_vector
from ..rng import RngStream, as_generator
from ..transforms import haar_forward, haar_inverse, haar_spans, next_power_of_two
from ..trees import NoisyTree, box_total, build_tree, integral_image, spread_leaves, tree_least_squares
from .base import AlgorithmSpec, MechanismResult, register, result_from_cells


def identity_run(
    x: DataVector, workload: Workload, epsilon: float, rng: RngStream
) -> MechanismResult:
    """Laplace noise on every cell count."""
    gen = as_generator(rng)
    cells = x.counts + laplace_vector(1.0, epsilon, x.domain.size, gen)
    return result_from_cells(cells, workload, (("cells", float(epsilon)),))


def wavelet_sensitivity(axis_sizes: tuple[int, ...]) -> float:
    """Sensitivity of the padded Haar strategy: prod_i (1 + log2 n_i)."""
    delta = 1.0
    for size in axis_sizes:
        delta *= 1.0 + math.log2(next_power_of_two(size))
    return delta


def privelet_run(
    x: DataVector, workload: Workload, epsilon: float, rng: RngStream
) -> MechanismResult:
    """Noisy Haar strategy: per-coefficient noise shrinks with the span.

    Measuring the +-1 wavelet rows with Laplace(delta/eps) noise and solving
    the (orthogonal) least squares is equivalent to perturbing the
    orthonormal coefficients by noise / sqrt(span), which is what we do.
    """
    gen = as_generator(rng)
    delta = wavelet_sensitivity(x.domain.axis_sizes)
    if x.domain.ndim == 1:
        coeffs = haar_forward(x.counts)
        spans = haar_spans(coeffs.size)
        noise = laplace_vector(delta, epsilon, coeffs.size, gen) / np.sqrt(spans)
        cells = haar_inverse(coeffs + noise, length=x.domain.size)
    else:
        rows, cols = x.domain.axis_sizes
        grid = x.as_grid().astype(np.float64)
        pr, pc = next_power_of_two(rows), next_power_of_two(cols)
        coeffs = np.apply_along_axis(haar_forward, 1, grid)
        coeffs = np.apply_along_axis(haar_forward, 0, coeffs)
        spans = np.outer(haar_spans(pr), haar_spans(pc))
        noise = laplace_vector(delta, epsilon, pr * pc, gen).reshape(pr, pc)
        noisy = coeffs + noise / np.sqrt(spans)
        back = np.apply_along_axis(lambda c: haar_inverse(c, length=cols), 1, noisy[:pr])
        back = np.apply_along_axis(lambda c: haar_inverse(c, length=rows), 0, back)
        cells = back[:rows, :cols].reshape(-1)
    return result_from_cells(cells, workload, (("coefficients", float(epsilon)),))


def _measure_uniform_levels(
    tree: NoisyTree, counts: np.ndarray, epsilon: float, gen: np.random.Generator
) -> tuple[tuple[str, float], ...]:
    """Measure every node, one equal epsilon share per level."""
    levels = tree.levels()
    parts = exact_stage_split(epsilon, [1.0 / len(levels)] * len(levels))
    integral = integral_image(counts, tree.axis_sizes)
    for level, eps_level in zip(levels, parts):
        noise = laplace_vector(1.0, eps_level, len(level), gen)
        for node, z in zip(level, noise):
            node.noisy = box_total(integral, node.box) + z
            node.noise_scale = 1.0 / eps_level
    return tuple((f"level_{d}", eps) for d, eps in enumerate(parts))


def h_run(
    x: DataVector, workload: Workload, epsilon: float, rng: RngStream, b: int = 2
) -> MechanismResult:
    """Noisy b-ary hierarchy with uniform per-level budget and inference."""
    gen = as_generator(rng)
    tree = build_tree(x.domain.axis_sizes, b)
    stages = _measure_uniform_levels(tree, x.counts, epsilon, gen)
    tree_least_squares(tree)
    return result_from_cells(spread_leaves(tree), workload, stages)


def _split_lengths(lengths: np.ndarray, b: int):
    """Vectorized nearly-equal split of many intervals at once."""
    parents = np.repeat(np.arange(lengths.size), np.minimum(b, lengths))
    n_children = np.minimum(b, lengths)
    base = lengths // n_children
    rem = lengths % n_children
    first = np.concatenate([[0], np.cumsum(n_children)[:-1]])
    rank = np.arange(parents.size) - first[parents]
    return parents, base[parents] + (rank < rem[parents]).astype(np.int64)


@lru_cache(maxsize=None)
def _tree_variance_profile_1d(n: int, b: int) -> float:
    """Average all-range variance proxy for a uniform-budget b-ary tree.

    Exact expected number of canonical-decomposition nodes over all
    n(n+1)/2 ranges, times the squared per-node noise factor (levels^2).
    """
    starts = np.array([0], dtype=np.int64)
    lengths = np.array([n], dtype=np.int64)
    contained = (starts + 1.0) * (n - (starts + lengths) + 1.0)
    used = contained.sum()  # root counts once, for the full range
    depth = 1
    while np.any(lengths > 1):
        live = lengths > 1
        done_start, done_len = starts[~live], lengths[~live]
        parents, child_len = _split_lengths(lengths[live], b)
        offsets = np.concatenate([[0], np.cumsum(child_len)[:-1]])
        parent_first = np.concatenate([[0], np.cumsum(np.minimum(b, lengths[live]))[:-1]])
        child_start = starts[live][parents] + offsets - offsets[parent_first[parents]]
        c_child = (child_start + 1.0) * (n - (child_start + child_len) + 1.0)
        c_parent = (starts[live] + 1.0) * (n - (starts[live] + lengths[live]) + 1.0)
        used += (c_child - c_parent[parents]).sum()
        starts = np.concatenate([child_start, done_start])
        lengths = np.concatenate([child_len, done_len])
        depth += 1
    avg_nodes = used / (n * (n + 1) / 2.0)
    return float(depth**2 * avg_nodes)


@lru_cache(maxsize=None)
def _tree_variance_profile_2d(rows: int, cols: int, g: int) -> float:
    """2D analogue over all axis-aligned rectangles for a g x g hierarchy."""
    tree = build_tree((rows, cols), g * g)
    total = rows * (rows + 1) / 2.0 * cols * (cols + 1) / 2.0

    def contained(box):
        (r0, r1), (c0, c1) = box
        return (r0 + 1.0) * (rows - r1 + 1.0) * (c0 + 1.0) * (cols - c1 + 1.0)

    used = contained(tree.root.box)
    depth = 0
    stack = [tree.root]
    while stack:
        node = stack.pop()
        depth = max(depth, node.depth)
        c_parent = contained(node.box)
        for child in node.children:
            used += contained(child.box) - c_parent
            stack.append(child)
    levels = depth + 1
    return float(levels**2 * used / total)


def hb_choose_branching(n_or_sizes, workload: Workload | None = None) -> int:
    """Branching factor minimizing the analytic all-range average variance.

    The objective is workload independent (it averages over every range
    query); ties break toward the smaller factor.
    """
    if isinstance(n_or_sizes, tuple) and len(n_or_sizes) == 2:
        rows, cols = n_or_sizes
        best_g, best_v = 2, math.inf
        for g in range(2, max(rows, cols) + 1):
            v = _tree_variance_profile_2d(rows, cols, g)
            if v < best_v - 1e-12:
                best_g, best_v = g, v
        return best_g * best_g
    n = int(n_or_sizes if not isinstance(n_or_sizes, tuple) else n_or_sizes[0])
    if n < 2:
        return 2
    best_b, best_v = 2, math.inf
    for b in range(2, n + 1):
        v = _tree_variance_profile_1d(n, b)
        if v < best_v - 1e-12:
            best_b, best_v = b, v
    return best_b


def hb_run(
    x: DataVector, workload: Workload, epsilon: float, rng: RngStream
) -> MechanismResult:
    """Hierarchy with the branching factor fitted to the domain size."""
    sizes = x.domain.axis_sizes
    b = hb_choose_branching(sizes if len(sizes) == 2 else sizes[0], workload)
    return h_run(x, workload, epsilon, rng, b=b)


def _level_usage(supports: np.ndarray) -> np.ndarray:
    """Canonical-cover node counts per depth of a complete binary tree.

    ``supports`` is a boolean (q, n) matrix with n a power of two.  A node is
    used by a query when its span lies inside the support but its parent's
    span does not.
    """
    q, n = supports.shape
    levels = n.bit_length()  # complete tree depth count
    full = [supports]
    while full[-1].shape[1] > 1:
        last = full[-1]
        full.append(last[:, 0::2] & last[:, 1::2])
    usage = np.zeros(levels, dtype=np.float64)
    for i, layer in enumerate(full):
        depth = levels - 1 - i
        if layer.shape[1] == 1:
            usage[depth] += layer.sum()
        else:
            parent = np.repeat(full[i + 1], 2, axis=1)
            usage[depth] += (layer & ~parent).sum()
    return usage


def greedy_level_weights(usage: np.ndarray) -> np.ndarray:
    """Per-level measurement weights tuned on a geometric (sqrt 2) grid.

    Minimizes (sum w)^2 * sum(usage / w^2), the analytic workload variance of
    canonical answering.  Levels the workload never uses stay unmeasured.
    """
    usage = np.asarray(usage, dtype=np.float64)
    active = usage > 0
    if not active.any():
        raise ValueError("workload uses no tree nodes")
    w = np.where(active, 1.0, 0.0)

    def cost(weights):
        s = weights[active].sum()
        return s * s * np.sum(usage[active] / weights[active] ** 2)

    best = cost(w)
    factor = math.sqrt(2.0)
    for _ in range(200):
        improved = False
        for d in np.flatnonzero(active):
            for mult in (factor, 1.0 / factor):
                trial = w.copy()
                trial[d] *= mult
                c = cost(trial)
                if c < best * (1.0 - 1e-12):
                    w, best = trial, c
                    improved = True
        if not improved:
            break
    return w / w.sum()


def _range_supports(workload: Workload, n_pad: int) -> np.ndarray:
    supports = np.zeros((len(workload), n_pad), dtype=bool)
    for i, qry in enumerate(workload.queries):
        supports[i, qry.lows[0] : qry.highs[0] + 1] = True
    return supports


def greedyh_core(
    counts: np.ndarray,
    supports: np.ndarray,
    epsilon: float,
    gen: np.random.Generator,
) -> np.ndarray:
    """Weighted binary hierarchy over an arbitrary-length count vector.

    Pads to a power of two, tunes per-level weights to the query supports,
    measures every node on an active level with noise Laplace(delta/(eps*w)),
    and returns the consistent singleton estimates (padding dropped).
    """
    n = counts.size
    n_pad = next_power_of_two(n)
    if supports.shape[1] != n_pad:
        padded = np.zeros((supports.shape[0], n_pad), dtype=bool)
        padded[:, :n] = supports[:, :n]
        supports = padded
    weights = greedy_level_weights(_level_usage(supports))
    delta = weights.sum()  # each cell is counted once per active level
    tree = build_tree((n_pad,), 2)
    padded_counts = np.zeros(n_pad)
    padded_counts[:n] = counts
    integral = integral_image(padded_counts, (n_pad,))
    for depth, level in enumerate(tree.levels()):
        if weights[depth] <= 0:
            continue
        scale = delta / (epsilon * weights[depth])
        noise = laplace_vector(delta, epsilon * weights[depth], len(level), gen)
        for node, z in zip(level, noise):
            node.noisy = box_total(integral, node.box) + z
            node.noise_scale = scale
    tree_least_squares(tree)
    return spread_leaves(tree)[:n]


def greedyh_run(
    x: DataVector, workload: Workload, epsilon: float, rng: RngStream, b: int = 2
) -> MechanismResult:
    """Binary hierarchy with per-level budget tuned greedily to the workload.

    2D inputs are linearized along a Hilbert curve first, so range queries
    stay clustered in the 1D order.
    """
    del b  # only the binary hierarchy is supported
    gen = as_generator(rng)
    if x.domain.ndim == 1:
        supports = _range_supports(workload, next_power_of_two(x.domain.size))
        cells = greedyh_core(x.counts.astype(np.float64), supports, epsilon, gen)
    else:
        grid, positions = pad_to_hilbert_grid(x.as_grid())
        lin = np.zeros(positions.max() + 1)
        lin[positions.reshape(-1)] = grid.reshape(-1)
        supports = np.zeros((len(workload), lin.size), dtype=bool)
        for i, qry in enumerate(workload.queries):
            block = positions[qry.lows[0] : qry.highs[0] + 1, qry.lows[1] : qry.highs[1] + 1]
            supports[i, block.reshape(-1)] = True
        lin_hat = greedyh_core(lin, supports, epsilon, gen)
        rows, cols = x.domain.axis_sizes
        cells = lin_hat[positions[:rows, :cols]].reshape(-1)
    return result_from_cells(cells, workload, (("tree", float(epsilon)),))


@register("identity")
def _identity(**params) -> AlgorithmSpec:
    return AlgorithmSpec("identity", identity_run, params)


@register("privelet")
def _privelet(**params) -> AlgorithmSpec:
    return AlgorithmSpec("privelet", privelet_run, params)


@register("h")
def _h(**params) -> AlgorithmSpec:
    params.setdefault("b", 2)
    return AlgorithmSpec("h", h_run, params)


@register("hb")
def _hb(**params) -> AlgorithmSpec:
    return AlgorithmSpec("hb", hb_run, params)


@register("greedy_h")
def _greedy_h(**params) -> AlgorithmSpec:
    return AlgorithmSpec("greedy_h", greedyh_run, params)
