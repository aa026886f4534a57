"""Trial execution, error measurement, statistical comparison, property
checks (consistency, scale-epsilon exchangeability), and parameter tuning.

Error is the scaled average per-query error: the L2 distance between the
true and noisy workload answers divided by (scale * query count).  Trials
pool 5 generated data vectors x 10 runs by default; reports carry the mean,
the nearest-rank 95th percentile, and the standard error.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from .core import DataVector, Domain, Shape, Workload, answer_workload
from .datagen import SourceDataset, generate
from .mechanisms.base import AlgorithmSpec
from .primitives import exact_stage_split, laplace_vector
from .rng import RngStream, as_generator

DEFAULT_EPSILON_LADDER = (1.0, 10.0, 100.0, 1000.0, 10000.0)


def scaled_error(y_hat: np.ndarray, workload: Workload, x: DataVector) -> float:
    """L2 residual against the exact answers, scaled by 1 / (scale * q)."""
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y_hat.size != len(workload):
        raise ValueError("answer vector length does not match the workload")
    s = x.scale
    if s <= 0:
        raise ValueError("scaled error is undefined for empty data")
    truth = answer_workload(workload, x)
    return float(np.linalg.norm(truth - y_hat) / (s * len(workload)))


@dataclass(frozen=True)
class ErrorSample:
    error: float
    vector_id: int
    run_id: int


@dataclass(frozen=True)
class TrialReport:
    algorithm: str
    shape_id: str
    scale: int
    domain: tuple[int, ...]
    epsilon: float
    samples: tuple[ErrorSample, ...]
    failures: int = 0

    @property
    def errors(self) -> np.ndarray:
        return np.array([s.error for s in self.samples])

    @property
    def mean(self) -> float:
        return float(self.errors.mean())

    @property
    def p95(self) -> float:
        ordered = np.sort(self.errors)
        rank = math.ceil(0.95 * ordered.size)  # nearest-rank percentile
        return float(ordered[max(rank - 1, 0)])

    @property
    def stderr(self) -> float:
        errs = self.errors
        if errs.size < 2:
            return 0.0
        return float(errs.std(ddof=1) / math.sqrt(errs.size))


def _one_trial(payload):
    alg, x, workload, epsilon, stream, vector_id, run_id = payload
    try:
        result = alg.run(x, workload, epsilon, stream)
        return vector_id, run_id, scaled_error(result.answers, workload, x), None
    except Exception as exc:  # recorded per sample, not fatal
        return vector_id, run_id, math.nan, repr(exc)


def run_trials(
    alg: AlgorithmSpec,
    source: "Shape | SourceDataset",
    scale: int,
    domain: Domain,
    workload: Workload,
    epsilon: float,
    n_vectors: int = 5,
    n_runs: int = 10,
    seed: "int | RngStream" = 0,
    workers: int = 1,
    shape_id: str | None = None,
) -> TrialReport:
    """Sample ``n_vectors`` data vectors and run the algorithm ``n_runs``
    times on each; aggregation is order independent."""
    stream = seed if isinstance(seed, RngStream) else RngStream(int(seed))
    if shape_id is None:
        shape_id = source.name if isinstance(source, SourceDataset) else "shape"
    vectors = [
        generate(source, domain, scale, stream.child(0xDA7A, v))
        for v in range(n_vectors)
    ]
    payloads = [
        (alg, vectors[v], workload, epsilon, stream.child(0x7219, v, r), v, r)
        for v in range(n_vectors)
        for r in range(n_runs)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_one_trial, payloads))
    else:
        raw = [_one_trial(p) for p in payloads]
    raw.sort(key=lambda item: (item[0], item[1]))
    samples = tuple(
        ErrorSample(err, v, r) for v, r, err, note in raw if math.isfinite(err)
    )
    failures = sum(1 for _, _, err, _ in raw if not math.isfinite(err))
    return TrialReport(
        alg.name, shape_id, int(scale), domain.axis_sizes, float(epsilon), samples, failures
    )


# ---------------------------------------------------------------------------
# statistical comparison


def welch_p_value(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided Welch t-test; degenerate zero-variance pairs compare
    exactly."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.std(ddof=1) == 0.0 and b.std(ddof=1) == 0.0:
        return 1.0 if a.mean() == b.mean() else 0.0
    return float(scipy_stats.ttest_ind(a, b, equal_var=False).pvalue)


def competitive_set(samples_by_algorithm: dict[str, np.ndarray], alpha: float = 0.05) -> set[str]:
    """Algorithms not significantly worse than the best mean, Bonferroni
    corrected at alpha / (n_algs - 1)."""
    if len(samples_by_algorithm) < 2:
        return set(samples_by_algorithm)
    means = {name: float(np.mean(s)) for name, s in samples_by_algorithm.items()}
    best = min(means, key=lambda name: (means[name], name))
    corrected = alpha / (len(samples_by_algorithm) - 1)
    winners = {best}
    for name, samples in samples_by_algorithm.items():
        if name == best:
            continue
        if welch_p_value(samples, samples_by_algorithm[best]) >= corrected:
            winners.add(name)
    return winners


def regret(mean_errors: dict[str, "list[float]"]) -> dict[str, float]:
    """Geometric mean of each algorithm's error ratio to the per-setting
    best."""
    names = sorted(mean_errors)
    lengths = {len(mean_errors[name]) for name in names}
    if len(lengths) != 1:
        raise ValueError("every algorithm needs a mean for every setting")
    matrix = np.array([mean_errors[name] for name in names], dtype=np.float64)
    best = matrix.min(axis=0)
    if np.any(best <= 0):
        bad = int(np.flatnonzero(best <= 0)[0])
        raise ValueError(f"oracle-best error is zero in setting {bad}; ratio undefined")
    ratios = matrix / best
    return {name: float(np.exp(np.mean(np.log(ratios[i])))) for i, name in enumerate(names)}


def bias_variance(
    answer_samples: np.ndarray, truth: np.ndarray, scale: float
) -> tuple[float, float]:
    """Scaled bias norm of the mean answer, and mean per-query variance."""
    answers = np.asarray(answer_samples, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if answers.ndim != 2 or answers.shape[0] < 2:
        raise ValueError("need at least two answer samples")
    bias = float(np.linalg.norm(answers.mean(axis=0) - truth) / (scale * truth.size))
    variance = float(answers.var(axis=0, ddof=1).mean())
    return bias, variance


# ---------------------------------------------------------------------------
# property checks


@dataclass(frozen=True)
class ExchangeabilityVerdict:
    algorithm: str
    passed: bool
    p_value: float
    mean_small: float
    mean_large: float
    alpha: float


def check_exchangeability(
    alg: AlgorithmSpec,
    shape: Shape,
    m1: int,
    eps1: float,
    workload: Workload,
    c: float = 10.0,
    trials: int = 200,
    alpha: float = 0.01,
    seed: "int | RngStream" = 0,
) -> ExchangeabilityVerdict:
    """Compare scaled errors at (m1, eps1) and (c * m1, eps1 / c).

    The same integral witness is used at both scales (the second is an exact
    c-fold copy), so the shapes match exactly as the definition requires.
    """
    if c <= 0 or int(c) != c:
        raise ValueError("the scale factor must be a positive integer")
    stream = seed if isinstance(seed, RngStream) else RngStream(int(seed))
    x1 = generate(shape, shape.domain, m1, stream.child(0x17))
    x2 = DataVector(x1.domain, x1.counts * int(c))
    errs = ([], [])
    for t in range(trials):
        r1 = alg.run(x1, workload, eps1, stream.child(1, t))
        errs[0].append(scaled_error(r1.answers, workload, x1))
        r2 = alg.run(x2, workload, eps1 / c, stream.child(2, t))
        errs[1].append(scaled_error(r2.answers, workload, x2))
    p = welch_p_value(np.array(errs[0]), np.array(errs[1]))
    return ExchangeabilityVerdict(
        alg.name, p >= alpha, p, float(np.mean(errs[0])), float(np.mean(errs[1])), alpha
    )


@dataclass(frozen=True)
class ConsistencyVerdict:
    algorithm: str
    passed: bool
    ladder: tuple[float, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    floor: float

    @property
    def top_mean(self) -> float:
        return self.means[-1]


def check_consistency(
    alg: AlgorithmSpec,
    x: DataVector,
    workload: Workload,
    ladder: tuple[float, ...] = DEFAULT_EPSILON_LADDER,
    trials: int = 5,
    floor: float = 1e-3,
    seed: "int | RngStream" = 0,
) -> ConsistencyVerdict:
    """Error must fall below ``floor`` at the top epsilon and decrease along
    the ladder (within noise); a persistent plateau fails."""
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("epsilon ladder must be increasing")
    stream = seed if isinstance(seed, RngStream) else RngStream(int(seed))
    means, stderrs = [], []
    for i, eps in enumerate(ladder):
        errs = []
        for t in range(trials):
            result = alg.run(x, workload, eps, stream.child(i, t))
            errs.append(scaled_error(result.answers, workload, x))
        errs = np.array(errs)
        means.append(float(errs.mean()))
        stderrs.append(float(errs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0)
    decreasing = all(
        means[i + 1] <= means[i] + 3.0 * (stderrs[i] + stderrs[i + 1])
        for i in range(len(means) - 1)
    )
    passed = means[-1] <= floor and decreasing
    return ConsistencyVerdict(
        alg.name, passed, tuple(float(e) for e in ladder), tuple(means), tuple(stderrs), floor
    )


# ---------------------------------------------------------------------------
# side information and free-parameter repair


def estimate_scale_side(
    x: DataVector,
    epsilon: float,
    rho_total: float = 0.05,
    rng: "RngStream | np.random.Generator" = RngStream(0),
) -> tuple[float, float, float]:
    """Noisy scale estimate bought with a rho_total slice of the budget.

    Returns (noisy scale, remaining epsilon, epsilon spent); the remainder is
    exactly (1 - rho_total) * epsilon.
    """
    if not 0.0 < rho_total < 1.0:
        raise ValueError("rho_total must lie in (0, 1)")
    remaining, spent = exact_stage_split(epsilon, [1.0 - rho_total, rho_total])
    gen = as_generator(rng)
    noisy = max(1.0, x.scale + laplace_vector(1.0, spent, 1, gen)[0])
    return noisy, remaining, spent


@dataclass(frozen=True)
class ParamTable:
    """Learned parameters keyed by (log10 signal bucket, domain size).

    The signal is the epsilon * scale product; lookups fall back to the
    nearest bucket and nearest domain size, so every query resolves.
    """

    entries: dict = field(default_factory=dict)

    def put(self, product: float, n: int, theta: dict) -> None:
        self.entries[(round(math.log10(product)), int(n))] = dict(theta)

    def lookup(self, epsilon: float, scale: float, n: int) -> dict:
        if not self.entries:
            raise KeyError("empty parameter table")
        bucket = round(math.log10(max(epsilon * scale, 1e-12)))
        key = min(
            self.entries,
            key=lambda k: (abs(k[0] - bucket), abs(k[1] - n), k),
        )
        return dict(self.entries[key])

    def to_json(self) -> str:
        import json

        payload = [
            {"bucket": k[0], "n": k[1], "theta": v}
            for k, v in sorted(self.entries.items())
        ]
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ParamTable":
        import json

        table = cls()
        for row in json.loads(text):
            table.entries[(int(row["bucket"]), int(row["n"]))] = dict(row["theta"])
        return table


def tune_params(
    build,
    grid: "list[dict]",
    training_shapes: "list[Shape]",
    products: "list[float]",
    workload: Workload,
    trials: int = 3,
    base_epsilon: float = 0.1,
    seed: "int | RngStream" = 0,
) -> ParamTable:
    """Grid-search parameters per signal bucket on synthetic shapes.

    ``build(theta)`` must return an AlgorithmSpec.  For each epsilon * scale
    product, the theta minimizing the mean scaled error across the training
    shapes is stored.  Training shapes must be synthetic; evaluation data
    never enters here.
    """
    if not grid:
        raise ValueError("empty parameter grid")
    if not training_shapes:
        raise ValueError("no training shapes")
    stream = seed if isinstance(seed, RngStream) else RngStream(int(seed))
    n = training_shapes[0].domain.size
    table = ParamTable()
    for pi, product in enumerate(products):
        scale = max(1, round(product / base_epsilon))
        best_theta, best_err = None, math.inf
        for gi, theta in enumerate(grid):
            alg = build(theta)
            errs = []
            for si, shape in enumerate(training_shapes):
                x = generate(shape, shape.domain, scale, stream.child(pi, si))
                for t in range(trials):
                    result = alg.run(x, workload, base_epsilon, stream.child(pi, gi, si, t))
                    errs.append(scaled_error(result.answers, workload, x))
            mean_err = float(np.mean(errs))
            if mean_err < best_err:
                best_theta, best_err = theta, mean_err
        table.put(product, n, best_theta)
    return table
