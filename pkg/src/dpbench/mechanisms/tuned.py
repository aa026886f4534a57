"""Starred variants: free parameters resolved from a learned table.

The table maps the epsilon * scale signal to parameter settings, so the
choice is data independent (it never looks at the input histogram).  Without
a learned table a built-in fallback keyed on the signal decade is used.
"""

from __future__ import annotations

import math

from ..core import DataVector, Workload
from ..rng import RngStream
from .base import AlgorithmSpec, MechanismResult, register
from .data_dependent_1d import ahp_run, mwem_run

# fallback rounds per log10(epsilon * scale); more signal supports more rounds
DEFAULT_MWEM_ROUNDS = {1: 2, 2: 2, 3: 5, 4: 10, 5: 30, 6: 100, 7: 150, 8: 200}
DEFAULT_AHP_PARAMS = {"rho": 0.5, "eta": 1.0}


def _signal_bucket(epsilon: float, scale: float) -> int:
    return round(math.log10(max(epsilon * scale, 1e-12)))


def mwem_star_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    assumed_scale: float | None = None,
    table=None,
    average_iterates: bool = True,
) -> MechanismResult:
    """Multiplicative weights with the round count looked up by signal."""
    if assumed_scale is None or assumed_scale <= 0:
        raise ValueError("mwem_star needs a positive assumed scale")
    if table is not None:
        theta = table.lookup(epsilon, assumed_scale, x.domain.size)
        rounds = int(theta["rounds"])
    else:
        bucket = _signal_bucket(epsilon, assumed_scale)
        key = min(DEFAULT_MWEM_ROUNDS, key=lambda b: abs(b - bucket))
        rounds = DEFAULT_MWEM_ROUNDS[key]
    return mwem_run(
        x,
        workload,
        epsilon,
        rng,
        rounds=rounds,
        assumed_scale=assumed_scale,
        average_iterates=average_iterates,
    )


def ahp_star_run(
    x: DataVector,
    workload: Workload,
    epsilon: float,
    rng: RngStream,
    assumed_scale: float | None = None,
    table=None,
) -> MechanismResult:
    """Threshold-and-cluster with (rho, eta) looked up by signal."""
    scale_hint = assumed_scale if assumed_scale and assumed_scale > 0 else max(x.scale, 1)
    if table is not None:
        theta = table.lookup(epsilon, scale_hint, x.domain.size)
    else:
        theta = DEFAULT_AHP_PARAMS
    return ahp_run(x, workload, epsilon, rng, rho=float(theta["rho"]), eta=float(theta["eta"]))


@register("mwem_star")
def _mwem_star(**params) -> AlgorithmSpec:
    return AlgorithmSpec("mwem_star", mwem_star_run, params, needs_scale=True)


@register("ahp_star")
def _ahp_star(**params) -> AlgorithmSpec:
    return AlgorithmSpec("ahp_star", ahp_star_run, params, needs_scale=True)
