"""Data-dependent mechanisms built on private partitioning, coefficient
selection, or multiplicative weights.

The partitioning family (PHP, SF, AHP, DAWA) privately groups cells into
buckets, measures bucket totals, and expands them assuming within-bucket
uniformity.  DAWA is the only one that also tunes its measurement strategy to
the workload (through the weighted binary hierarchy).  2D inputs for DAWA are
linearized along a Hilbert curve.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..core import DataVector, Domain, Workload
from ..hilbert import pad_to_hilbert_grid
from ..primitives import exact_stage_split, exponential_mechanism, laplace_vector
from ..rng import RngStream, as_generator
from ..transforms import (
    next_power_of_two,
    real_fourier_forward,
    real_fourier_inverse,
    topk_indices,
)
from .base import AlgorithmSpec, MechanismResult, register, result_from_cells
from .data_independent import greedyh_core

DEFAULT_EPSILON_LADDER = (1.0, 10.0, 100.0, 1000.0, 10000.0)


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Partition:
    """Disjoint contiguous buckets covering [0, n)."""

    bounds: tuple[int, ...]  # m + 1 increasing edges, bounds[0] = 0, bounds[-1] = n
    counts: tuple[float, ...] | None = None

    def __post_init__(self):
        bounds = tuple(int(b) for b in self.bounds)
        if len(bounds) < 2 or bounds[0] != 0 or any(
            b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])
        ):
            raise ValueError(f"invalid bucket bounds {bounds}")
        object.__setattr__(self, "bounds", bounds)
        if self.counts is not None:
            counts = tuple(float(c) for c in self.counts)
            if len(counts) != len(bounds) - 1:
                raise ValueError("one count per bucket required")
            object.__setattr__(self, "counts", counts)

    @property
    def num_buckets(self) -> int:
        return len(self.bounds) - 1

    def intervals(self) -> list[tuple[int, int]]:
        return list(zip(self.bounds[:-1], self.bounds[1:]))


def expand_uniform(partition: Partition, domain: Domain) -> np.ndarray:
    """Spread each bucket count uniformly over its cells."""
    if partition.counts is None:
        raise ValueError("partition carries no bucket counts")
    if partition.bounds[-1] != domain.size:
        raise ValueError("partition does not cover the domain")
    out = np.empty(domain.size)
    for (s, e), count in zip(partition.intervals(), partition.counts):
        out[s:e] = count / (e - s)
    return out


def _spread_groups(labels: np.ndarray, group_counts: np.ndarray) -> np.ndarray:
    """Uniform expansion for non-contiguous cell groupings."""
    sizes = np.bincount(labels, minlength=group_counts.size)
    return (group_counts / np.maximum(sizes, 1))[labels]


# ---------------------------------------------------------------------------
# uniform baseline


def uniform_run(
    x: DataVector, workload: Workload, epsilon: float, rng: RngStream
) -> MechanismResult:
    """Noisy total spread evenly: learns only the scale."""
    gen = as_generator(rng)
    noisy_total = x.scale + laplace_vector(1.0, epsilon, 1, gen)[0]
    cells = np.full(x.domain.size, noisy_total / x.domain.size)
    return result_from_cells(cells, workload, (("total", float(epsilon)),))


# ---------------------------------------------------------------------------
# PHP: recursive bisection via the exponential mechanism


def interval_deviation(values: np.ndarray) -> float:
    """Sum of absolute deviations from the interval mean."""
    values = np.asarray(values, dtype=np.float64)
    return float(np.abs(values - values.mean()).sum()) if values.size else 0.0


def _prefix_deviations(arr: np.ndarray) -> np.ndarray:
    """dev(arr[:t]) for t = 0..len; O(len^2) time, chunked memory."""
    n = arr.size
    out = np.zeros(n + 1)
    if n == 0:
        return out
    means = np.cumsum(arr) / np.arange(1, n + 1)
    chunk = max(1, min(n, 1 << 18 // max(n, 1)))
    for start in range(0, n, chunk):
        t_block = np.arange(start, min(start + chunk, n))
        diffs = np.abs(arr[None, :] - means[t_block, None])
        mask = np.arange(n)[None, :] <= t_block[:, None]
        out[t_block + 1] = (diffs * mask).sum(axis=1)
    return out


def php_partition(
    counts: np.ndarray,
    eps_partition: float,
    rng: "RngStream | np.random.Generator",
) -> Partition:
    """Recursive noisy bisection, at most floor(log2 n) splits in total.

    Buckets are bisected in FIFO order; each bisection point is drawn by the
    exponential mechanism with score equal to minus the absolute-deviation
    cost of the two halves.
    """
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.size
    gen = as_generator(rng)
    max_splits = int(math.floor(math.log2(n))) if n > 1 else 0
    final: list[tuple[int, int]] = []
    queue: deque[tuple[int, int]] = deque([(0, n)])
    splits = 0
    while queue and splits < max_splits:
        s, e = queue.popleft()
        if e - s == 1:
            final.append((s, e))
            continue
        arr = counts[s:e]
        left = _prefix_deviations(arr)
        right = _prefix_deviations(arr[::-1])[::-1]
        cuts = np.arange(1, e - s)  # split before arr[c]
        scores = -(left[cuts] + right[cuts])
        cut = exponential_mechanism(
            cuts, scores, eps_partition / max_splits, 2.0, gen
        )
        queue.append((s, s + int(cut)))
        queue.append((s + int(cut), e))
        splits += 1
    final.extend(queue)
    final.sort()
    return Partition(tuple([s for s, _ in final] + [n]))


def php_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    rho: float = 0.5,
) -> MechanismResult:
    """Bisection partition with rho * epsilon, bucket totals with the rest."""
    if x.domain.ndim != 1:
        raise ValueError("php supports 1D domains only")
    gen = as_generator(rng)
    eps_part, eps_count = exact_stage_split(epsilon, [rho, 1.0 - rho])
    counts = x.counts.astype(np.float64)
    partition = php_partition(counts, eps_part, gen)
    noise = laplace_vector(1.0, eps_count, partition.num_buckets, gen)
    bucket_counts = tuple(
        float(counts[s:e].sum()) + z
        for (s, e), z in zip(partition.intervals(), noise)
    )
    cells = expand_uniform(Partition(partition.bounds, bucket_counts), x.domain)
    stages = (("partition", eps_part), ("counts", eps_count))
    return result_from_cells(cells, workload, stages)


# ---------------------------------------------------------------------------
# EFPA: noisy truncated Fourier reconstruction


def efpa_scores(coeffs: np.ndarray, eps_measure: float) -> np.ndarray:
    """Score of keeping k coefficients, for k = 1..n (index k-1).

    Trades the expected measurement noise (2k / eps_measure) against the
    magnitude of the dropped tail; both terms scale linearly with the data,
    which keeps the selection scale-epsilon exchangeable.
    """
    magnitudes = np.sort(np.abs(coeffs))[::-1]
    tail = np.concatenate([np.cumsum(magnitudes[::-1])[::-1][1:], [0.0]])
    ks = np.arange(1, coeffs.size + 1)
    return -(2.0 * ks / eps_measure + tail)


def efpa_run(
    x: DataVector, workload: Workload, epsilon: float, rng: RngStream
) -> MechanismResult:
    """Keep a privately chosen number of top Fourier coefficients, perturb
    them, and invert.  Half the budget selects k, half measures."""
    if x.domain.ndim != 1:
        raise ValueError("efpa supports 1D domains only")
    gen = as_generator(rng)
    eps_select, eps_measure = exact_stage_split(epsilon, [0.5, 0.5])
    n = x.domain.size
    coeffs = real_fourier_forward(x.counts)
    scores = efpa_scores(coeffs, eps_measure)
    k = exponential_mechanism(
        np.arange(1, n + 1), scores, eps_select, math.sqrt(2.0 * n), gen
    )
    kept = topk_indices(coeffs, int(k))
    noisy = np.zeros(n)
    noisy[kept] = coeffs[kept] + laplace_vector(
        math.sqrt(float(k)), eps_measure, kept.size, gen
    )
    cells = real_fourier_inverse(noisy)
    stages = (("select_k", eps_select), ("coefficients", eps_measure))
    return result_from_cells(cells, workload, stages)


# ---------------------------------------------------------------------------
# SF: fixed bucket count, boundaries sampled against an SSE table


def _interval_sse(prefix: np.ndarray, prefix_sq: np.ndarray, s, e):
    """Sum of squared deviations from the mean of cells [s, e)."""
    total = prefix[e] - prefix[s]
    length = np.asarray(e, dtype=np.float64) - np.asarray(s, dtype=np.float64)
    return prefix_sq[e] - prefix_sq[s] - total * total / np.maximum(length, 1)


def sf_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    k: int | None = None,
    assumed_scale: float | None = None,
    upper_bound: float | None = None,
    budget_fraction=0.5,
) -> MechanismResult:
    """Mean-based structure-first histogram with k buckets.

    Boundaries are drawn sequentially by the exponential mechanism, each
    scored by the bucket's squared error plus the optimal cost of the
    remainder (from a dynamic program), with sensitivity bounded through the
    count cap F.  F defaults to the (side-information) scale.  The squared
    scores make this the one mechanism that is not scale-epsilon
    exchangeable.
    """
    if x.domain.ndim != 1:
        raise ValueError("sf supports 1D domains only")
    n = x.domain.size
    if k is None:
        k = math.ceil(n / 10)
    k = int(k)
    if k < 1 or k > n:
        raise ValueError(f"bucket count must be in [1, {n}], got {k}")
    cap = upper_bound if upper_bound is not None else assumed_scale
    if cap is None:
        raise ValueError("sf needs an upper bound F (or scale side information)")
    cap = max(float(cap), 1.0)
    rho = budget_fraction(k, cap) if callable(budget_fraction) else float(budget_fraction)
    gen = as_generator(rng)
    eps_struct, eps_count = exact_stage_split(epsilon, [rho, 1.0 - rho])
    counts = x.counts.astype(np.float64)
    prefix = np.concatenate([[0.0], np.cumsum(counts)])
    prefix_sq = np.concatenate([[0.0], np.cumsum(counts * counts)])

    boundaries = [0]
    if k > 1:
        # opt[r][t]: least SSE splitting [t, n) into r buckets
        opt = np.full((k + 1, n + 1), np.inf)
        opt[1, :n] = _interval_sse(prefix, prefix_sq, np.arange(n), n)
        opt[1, n] = np.inf
        for r in range(2, k + 1):
            for t in range(n - r + 1):
                s_cand = np.arange(t + 1, n - r + 2)
                costs = _interval_sse(prefix, prefix_sq, t, s_cand) + opt[r - 1, s_cand]
                opt[r, t] = costs.min()
        eps_each = eps_struct / (k - 1)
        sensitivity = 2.0 * cap + 1.0
        prev = 0
        for j in range(1, k):
            remaining = k - j
            t_cand = np.arange(prev + 1, n - remaining + 1)
            scores = -(
                _interval_sse(prefix, prefix_sq, prev, t_cand) + opt[remaining, t_cand]
            )
            prev = int(exponential_mechanism(t_cand, scores, eps_each, sensitivity, gen))
            boundaries.append(prev)
    bounds = tuple(boundaries + [n])
    noise = laplace_vector(1.0, eps_count, len(bounds) - 1, gen)
    bucket_counts = tuple(
        float(prefix[e] - prefix[s]) + z
        for (s, e), z in zip(zip(bounds[:-1], bounds[1:]), noise)
    )
    cells = expand_uniform(Partition(bounds, bucket_counts), x.domain)
    stages = (("structure", eps_struct), ("counts", eps_count))
    return result_from_cells(cells, workload, stages)


# ---------------------------------------------------------------------------
# AHP: threshold, sort, cluster


def greedy_cluster(values: np.ndarray, spread: float) -> np.ndarray:
    """Group cells whose (sorted) values stay within ``spread`` of the
    group's first member.  Returns a group label per cell."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    labels = np.empty(values.size, dtype=np.int64)
    group = -1
    group_start = None
    for idx in order:
        if group < 0 or values[idx] - group_start > spread:
            group += 1
            group_start = values[idx]
        labels[idx] = group
    return labels


def ahp_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    rho: float = 0.5,
    eta: float = 1.0,
) -> MechanismResult:
    """Noisy counts are thresholded at eta times the noise scale, sorted,
    and greedily clustered; cluster totals are then re-measured."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if eta < 0:
        raise ValueError("eta must be non-negative")
    gen = as_generator(rng)
    eps_part, eps_count = exact_stage_split(epsilon, [rho, 1.0 - rho])
    noisy = x.counts + laplace_vector(1.0, eps_part, x.domain.size, gen)
    threshold = eta / eps_part
    noisy = np.where(noisy < threshold, 0.0, noisy)
    labels = greedy_cluster(noisy, threshold)
    n_groups = int(labels.max()) + 1
    true_sums = np.bincount(labels, weights=x.counts, minlength=n_groups)
    group_counts = true_sums + laplace_vector(1.0, eps_count, n_groups, gen)
    cells = _spread_groups(labels, group_counts)
    stages = (("partition", eps_part), ("counts", eps_count))
    return result_from_cells(cells, workload, stages)


# ---------------------------------------------------------------------------
# MWEM: multiplicative weights with private query selection


def _query_masks(workload: Workload, domain: Domain) -> np.ndarray:
    masks = np.zeros((len(workload), domain.size), dtype=bool)
    grid_shape = domain.axis_sizes
    for i, qry in enumerate(workload.queries):
        mask = np.zeros(grid_shape, dtype=bool)
        if domain.ndim == 1:
            mask[qry.lows[0] : qry.highs[0] + 1] = True
        else:
            mask[qry.lows[0] : qry.highs[0] + 1, qry.lows[1] : qry.highs[1] + 1] = True
        masks[i] = mask.reshape(-1)
    return masks


def mwem_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    rounds: int = 10,
    assumed_scale: float | None = None,
    average_iterates: bool = True,
) -> MechanismResult:
    """Iteratively select a badly-approximated workload query, measure it,
    and apply a multiplicative-weights correction to the estimate.

    The estimate starts uniform at the (side-information) scale and keeps
    that total after every update.  The returned estimate averages the
    iterates unless ``average_iterates`` is False.
    """
    if rounds < 1:
        raise ValueError("need at least one round")
    if assumed_scale is None or assumed_scale <= 0:
        raise ValueError("mwem needs a positive assumed scale")
    gen = as_generator(rng)
    parts = exact_stage_split(epsilon, [1.0 / (2 * rounds)] * (2 * rounds))
    n = x.domain.size
    masks = _query_masks(workload, x.domain)
    truth = workload.answer(x.counts)
    estimate = np.full(n, assumed_scale / n)
    running = np.zeros(n)
    measured: set[int] = set()
    stages = []
    for t in range(rounds):
        eps_select, eps_measure = parts[2 * t], parts[2 * t + 1]
        approx = workload.answer(estimate)
        scores = np.abs(truth - approx)
        if len(measured) < len(workload):
            scores = scores.copy()
            scores[list(measured)] = -np.inf
        else:
            measured.clear()  # more rounds than queries: allow re-selection
        finite = np.isfinite(scores)
        candidates = np.flatnonzero(finite)
        qi = int(
            exponential_mechanism(candidates, scores[candidates], eps_select, 1.0, gen)
        )
        measured.add(qi)
        observed = truth[qi] + laplace_vector(1.0, eps_measure, 1, gen)[0]
        error = observed - approx[qi]
        estimate = estimate * np.exp(masks[qi] * (error / (2.0 * assumed_scale)))
        estimate *= assumed_scale / estimate.sum()
        running += estimate
        stages.append((f"select_{t}", eps_select))
        stages.append((f"measure_{t}", eps_measure))
    cells = running / rounds if average_iterates else estimate
    return result_from_cells(cells, workload, tuple(stages))


# ---------------------------------------------------------------------------
# DAWA: least-cost partition + workload-tuned hierarchy


def interval_cost_table(counts: np.ndarray, lengths=None) -> dict[int, np.ndarray]:
    """Absolute-deviation cost of every interval, grouped by length.

    Returns {length: costs per start}.  ``lengths=None`` means all lengths
    (the quadratic candidate set); pass the powers of two for the cheaper
    approximate candidate set.
    """
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.size
    if lengths is None:
        lengths = range(1, n + 1)
    table: dict[int, np.ndarray] = {}
    for length in lengths:
        if length > n:
            break
        if length == 1:
            table[1] = np.zeros(n)
            continue
        windows = np.lib.stride_tricks.sliding_window_view(counts, length)
        means = windows.mean(axis=1)
        table[length] = np.abs(windows - means[:, None]).sum(axis=1)
    return table


def least_cost_partition(
    cost_by_length: dict[int, np.ndarray], n: int, bucket_penalty: float
) -> tuple[int, ...]:
    """Interval DP minimizing sum(bucket cost) + penalty per bucket.

    Ties break toward fewer buckets, then toward the longer final bucket.
    Returns the bucket bounds (m + 1 edges).
    """
    best = np.full(n + 1, np.inf)
    nbuck = np.zeros(n + 1, dtype=np.int64)
    back = np.zeros(n + 1, dtype=np.int64)
    best[0] = 0.0
    dense = len(cost_by_length) == n
    if dense:
        # cost of [s, e) laid out as matrix[s, e - 1] for vectorized transitions
        matrix = np.full((n, n), np.inf)
        for length, costs in cost_by_length.items():
            starts = np.arange(costs.size)
            matrix[starts, starts + length - 1] = costs
    for e in range(1, n + 1):
        if dense:
            cand = best[:e] + matrix[:e, e - 1] + bucket_penalty
            low = cand.min()
            ties = np.flatnonzero(cand == low)
            s = int(ties[np.lexsort((ties, nbuck[ties]))[0]])
            best[e], nbuck[e], back[e] = cand[s], nbuck[s] + 1, s
            continue
        choice = None
        for length in sorted(cost_by_length):
            s = e - length
            if s < 0 or not np.isfinite(best[s]):
                continue
            total = best[s] + cost_by_length[length][s] + bucket_penalty
            key = (total, nbuck[s] + 1, s)
            if choice is None or key < choice:
                choice = key
        best[e], nbuck[e], back[e] = choice[0], choice[1], choice[2]
    bounds = [n]
    while bounds[-1] > 0:
        bounds.append(int(back[bounds[-1]]))
    return tuple(reversed(bounds))


def dawa_partition(
    x_counts: np.ndarray,
    eps_partition: float,
    rng: "RngStream | np.random.Generator",
    bucket_penalty: float,
    approx: bool = False,
) -> Partition:
    """Private least-cost partition from noise-perturbed interval costs.

    Per-interval Laplace noise uses the deviation cost's sensitivity for that
    interval length, (2 - 1/len - 1/n); singleton intervals have constant
    (zero) cost and stay noise free.  Costs are clamped at zero, and every
    bucket pays ``bucket_penalty`` in the objective.
    """
    counts = np.asarray(x_counts, dtype=np.float64)
    n = counts.size
    gen = as_generator(rng)
    if approx:
        lengths = []
        length = 1
        while length <= n:
            lengths.append(length)
            length *= 2
        table = interval_cost_table(counts, lengths)
    else:
        table = interval_cost_table(counts)
    noisy = {}
    for length in sorted(table):
        costs = table[length]
        if length == 1:
            noisy[1] = costs + bucket_penalty
            continue
        sens = 2.0 - 1.0 / length - 1.0 / n
        perturbed = costs + laplace_vector(sens, eps_partition, costs.size, gen)
        noisy[length] = np.maximum(perturbed + bucket_penalty, 0.0)
    # the penalty is already inside the stored costs; DP adds zero extra
    bounds = least_cost_partition(noisy, n, 0.0)
    return Partition(bounds)


def _bucket_supports_1d(workload: Workload, bounds: np.ndarray) -> np.ndarray:
    """Which buckets each 1D range query touches (contiguous runs)."""
    m = bounds.size - 1
    supports = np.zeros((len(workload), m), dtype=bool)
    lows = workload._lows[:, 0]
    highs = workload._highs[:, 0]
    first = np.searchsorted(bounds, lows, side="right") - 1
    last = np.searchsorted(bounds, highs, side="right") - 1
    for i in range(len(workload)):
        supports[i, first[i] : last[i] + 1] = True
    return supports


def dawa_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    rho: float = 0.25,
    b: int = 2,
    approx: bool = False,
) -> MechanismResult:
    """Least-cost partition, then the workload-tuned hierarchy on buckets."""
    del b  # bucket hierarchy is binary
    gen = as_generator(rng)
    eps_part, eps_count = exact_stage_split(epsilon, [rho, 1.0 - rho])
    if x.domain.ndim == 1:
        lin = x.counts.astype(np.float64)
        positions = None
    else:
        grid, positions = pad_to_hilbert_grid(x.as_grid())
        lin = np.zeros(positions.size)
        lin[positions.reshape(-1)] = grid.reshape(-1)
    partition = dawa_partition(lin, eps_part, gen, 1.0 / eps_count, approx=approx)
    bounds = np.array(partition.bounds)
    sizes = np.diff(bounds)
    bucket_truth = np.add.reduceat(lin, bounds[:-1])
    if positions is None:
        supports = _bucket_supports_1d(workload, bounds)
    else:
        supports = np.zeros((len(workload), sizes.size), dtype=bool)
        labels = np.searchsorted(bounds, np.arange(lin.size), side="right") - 1
        for i, qry in enumerate(workload.queries):
            pos = positions[
                qry.lows[0] : qry.highs[0] + 1, qry.lows[1] : qry.highs[1] + 1
            ]
            supports[i, labels[pos.reshape(-1)]] = True
    bucket_est = greedyh_core(bucket_truth, supports, eps_count, gen)
    lin_hat = np.repeat(bucket_est / sizes, sizes)
    if positions is None:
        cells = lin_hat
    else:
        rows, cols = x.domain.axis_sizes
        cells = lin_hat[positions[:rows, :cols]].reshape(-1)
    stages = (("partition", eps_part), ("counts", eps_count))
    return result_from_cells(cells, workload, stages)


# ---------------------------------------------------------------------------
# registry entries


@register("uniform")
def _uniform(**params) -> AlgorithmSpec:
    return AlgorithmSpec("uniform", uniform_run, params)


@register("php")
def _php(**params) -> AlgorithmSpec:
    params.setdefault("rho", 0.5)
    return AlgorithmSpec("php", php_run, params, dims=(1,))


@register("efpa")
def _efpa(**params) -> AlgorithmSpec:
    return AlgorithmSpec("efpa", efpa_run, params, dims=(1,))


@register("sf")
def _sf(**params) -> AlgorithmSpec:
    return AlgorithmSpec("sf", sf_run, params, dims=(1,), needs_scale=True)


@register("ahp")
def _ahp(**params) -> AlgorithmSpec:
    params.setdefault("rho", 0.5)
    params.setdefault("eta", 1.0)
    return AlgorithmSpec("ahp", ahp_run, params)


@register("mwem")
def _mwem(**params) -> AlgorithmSpec:
    params.setdefault("rounds", 10)
    return AlgorithmSpec("mwem", mwem_run, params, needs_scale=True)


@register("dawa")
def _dawa(**params) -> AlgorithmSpec:
    params.setdefault("rho", 0.25)
    return AlgorithmSpec("dawa", dawa_run, params)
