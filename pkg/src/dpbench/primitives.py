"""Differentially private building blocks: Laplace noise, exponential
mechanism, and budget composition helpers.

Laplace samples are drawn via the inverse CDF applied to a 64-bit uniform
from the Philox stream, so trial sequences are bit-reproducible across
platforms.
"""

from __future__ import annotations

import numpy as np

from .rng import RngStream, as_generator


class BudgetError(ValueError):
    """A requested composition would exceed the privacy budget."""


def laplace_vector(
    sensitivity: float,
    epsilon: float,
    length: int,
    rng: "RngStream | np.random.Generator",
) -> np.ndarray:
    """``length`` i.i.d. samples from Laplace(0, sensitivity / epsilon)."""
    if sensitivity <= 0 or epsilon <= 0:
        raise ValueError("sensitivity and epsilon must be positive")
    gen = as_generator(rng)
    scale = sensitivity / epsilon
    # inverse CDF on u ~ Uniform(-1/2, 1/2): x = -b * sgn(u) * log(1 - 2|u|)
    u = gen.random(int(length)) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def softmax_probabilities(scores, epsilon: float, score_sensitivity: float) -> np.ndarray:
    """Selection distribution of the exponential mechanism, log-sum-exp stable."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("need at least one candidate")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if score_sensitivity <= 0:
        raise ValueError("score sensitivity must be positive")
    logits = (epsilon / (2.0 * score_sensitivity)) * scores
    logits -= logits.max()
    weights = np.exp(logits)
    return weights / weights.sum()


def exponential_mechanism(
    candidates,
    scores,
    epsilon: float,
    score_sensitivity: float,
    rng: "RngStream | np.random.Generator",
):
    """Pick a candidate with probability proportional to
    exp(epsilon * score / (2 * score_sensitivity)).

    Higher scores are better.  ``epsilon = 0`` degrades to a uniform choice.
    Callers whose analysis already absorbs the factor of 2 should rescale
    ``score_sensitivity`` accordingly.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty candidate set")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    probs = softmax_probabilities(scores, epsilon, score_sensitivity)
    gen = as_generator(rng)
    idx = int(np.searchsorted(np.cumsum(probs), gen.random(), side="right"))
    idx = min(idx, len(candidates) - 1)
    return candidates[idx]


def split_budget(epsilon: float, fractions) -> tuple[float, ...]:
    """Sequential composition: part i = epsilon * fraction i.

    Rejects allocations whose fractions sum above 1.
    """
    fractions = [float(f) for f in fractions]
    if any(f < 0 for f in fractions):
        raise BudgetError("fractions must be non-negative")
    if sum(fractions) > 1.0 + 1e-12:
        raise BudgetError(f"fractions sum to {sum(fractions)}, exceeding the budget")
    return tuple(epsilon * f for f in fractions)


def exact_stage_split(epsilon: float, fractions) -> tuple[float, ...]:
    """Stage budgets that sum back to ``epsilon`` exactly in floating point.

    All stages but the last are epsilon * fraction; the last absorbs the
    floating-point remainder (nudged by at most one ulp) so that the audited
    ledger identity sum(stages) == epsilon holds bit-exactly.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) < 1:
        raise BudgetError("need at least one stage")
    if any(f <= 0 for f in fractions):
        raise BudgetError("stage fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise BudgetError("stage fractions must sum to 1")
    if len(fractions) == 1:
        return (float(epsilon),)
    parts = [epsilon * f for f in fractions[:-1]]
    running = 0.0
    for p in parts:
        running += p
    last = epsilon - running
    if last <= 0:
        raise BudgetError("degenerate split: last stage would be non-positive")
    # nudge the remainder so the left-to-right float sum is exact
    for _ in range(4):
        if running + last == epsilon:
            break
        last = np.nextafter(last, np.inf if running + last < epsilon else -np.inf)
    assert running + last == epsilon
    return tuple(parts) + (float(last),)
