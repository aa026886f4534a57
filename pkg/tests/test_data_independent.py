import numpy as np
import pytest

from dpbench.core import (
    DataVector,
    Domain,
    answer_workload,
    make_identity_workload,
    make_prefix_workload,
    make_total_workload,
)
from dpbench.mechanisms.data_independent import (
    _level_usage,
    _range_supports,
    _tree_variance_profile_1d,
    greedy_level_weights,
    greedyh_run,
    h_run,
    hb_choose_branching,
    hb_run,
    identity_run,
    privelet_run,
    wavelet_sensitivity,
)
from dpbench.rng import RngStream
from dpbench.trees import build_tree


def mean_answers(run, x, workload, eps, trials, seed, **kw):
    stream = RngStream(seed)
    total = np.zeros(len(workload))
    for t in range(trials):
        total += run(x, workload, eps, stream.child(t), **kw).answers
    return total / trials


class TestIdentity:
    def test_unbiased_on_prefix(self):
        n, eps, trials = 16, 1.0, 10_000
        x = DataVector(Domain((n,)), np.arange(n))
        w = make_prefix_workload(n)
        truth = answer_workload(w, x)
        mean = mean_answers(identity_run, x, w, eps, trials, seed=31)
        # prefix query over L cells has variance L * 2 / eps^2
        stderr = np.sqrt(2.0 * np.arange(1, n + 1) / eps**2 / trials)
        assert np.all(np.abs(mean - truth) < 3 * stderr + 1e-9)

    def test_prefix_squared_error_formula(self):
        # sum over prefixes of length * Laplace variance = (2/eps^2) n(n+1)/2
        n, eps, trials = 256, 0.1, 500
        x = DataVector(Domain((n,)), np.full(n, 390, dtype=np.int64))
        w = make_prefix_workload(n)
        truth = answer_workload(w, x)
        stream = RngStream(32)
        sq = [
            np.sum((identity_run(x, w, eps, stream.child(t)).answers - truth) ** 2)
            for t in range(trials)
        ]
        expected = (2.0 / eps**2) * n * (n + 1) / 2.0
        assert abs(np.mean(sq) / expected - 1.0) < 0.05

    def test_scaled_error_halves_when_scale_doubles(self):
        from dpbench.harness import scaled_error

        n, eps, trials = 64, 1.0, 400
        w = make_prefix_workload(n)
        stream = RngStream(33)
        means = []
        for scale_factor in (1, 2):
            x = DataVector(Domain((n,)), np.full(n, 100 * scale_factor))
            errs = [
                scaled_error(identity_run(x, w, eps, stream.child(scale_factor, t)).answers, w, x)
                for t in range(trials)
            ]
            means.append(np.mean(errs))
        assert means[0] / means[1] == pytest.approx(2.0, rel=0.1)


class TestPrivelet:
    def test_sensitivity_constants(self):
        assert wavelet_sensitivity((1024,)) == 11.0
        assert wavelet_sensitivity((32, 32)) == 36.0

    def test_unbiased(self):
        n, trials = 32, 4000
        x = DataVector(Domain((n,)), np.arange(n))
        w = make_prefix_workload(n)
        truth = answer_workload(w, x)
        mean = mean_answers(privelet_run, x, w, 1.0, trials, seed=34)
        assert np.max(np.abs(mean - truth) / (np.abs(truth) + 10)) < 0.1

    def test_beats_identity_on_prefix_at_1024(self):
        n, eps, trials = 1024, 0.1, 500
        x = DataVector(Domain((n,)), np.full(n, 10))
        w = make_prefix_workload(n)
        truth = answer_workload(w, x)
        stream = RngStream(35)
        mse = {"identity": 0.0, "privelet": 0.0}
        for t in range(trials):
            mse["identity"] += np.sum(
                (identity_run(x, w, eps, stream.child(0, t)).answers - truth) ** 2
            )
            mse["privelet"] += np.sum(
                (privelet_run(x, w, eps, stream.child(1, t)).answers - truth) ** 2
            )
        assert mse["privelet"] < mse["identity"]

    def test_2d_roundtrip_is_unbiased_at_high_epsilon(self):
        x = DataVector(Domain((4, 8)), np.arange(32))
        w = make_identity_workload(x.domain)
        res = privelet_run(x, w, 1e7, RngStream(36))
        assert np.max(np.abs(res.answers - x.counts)) < 1e-3


class TestHierarchies:
    def test_h_n2_measures_two_levels_at_half_budget(self):
        x = DataVector(Domain((2,)), [1, 2])
        w = make_prefix_workload(2)
        res = h_run(x, w, 1.0, RngStream(37))
        assert [name for name, _ in res.stages] == ["level_0", "level_1"]
        assert res.stages[0][1] == 0.5 and res.stages[1][1] == 0.5

    def test_h_post_inference_consistency(self):
        # verified via the tree module; here check answers stay finite/sane
        x = DataVector(Domain((64,)), np.arange(64))
        w = make_prefix_workload(64)
        res = h_run(x, w, 1e6, RngStream(38))
        assert np.allclose(res.answers, answer_workload(w, x), atol=0.5)

    def test_default_branching_is_two(self):
        from dpbench.mechanisms import build_algorithm

        assert build_algorithm("h").params["b"] == 2

    def test_hb_n2_picks_two(self):
        assert hb_choose_branching(2) == 2

    @pytest.mark.parametrize("n", [16, 64])
    def test_hb_matches_enumeration_oracle(self, n):
        # oracle route: enumerate every range, greedily decompose it on the
        # actual tree, average the node counts, scale by levels^2
        def canonical_count(node, lo, hi):
            s, e = node.box[0]
            if lo <= s and e - 1 <= hi:
                return 1
            if e <= lo or s > hi:
                return 0
            return sum(canonical_count(c, lo, hi) for c in node.children)

        def profile(b):
            tree = build_tree((n,), b)
            levels = len(tree.levels())
            counts = [
                canonical_count(tree.root, lo, hi)
                for lo in range(n)
                for hi in range(lo, n)
            ]
            return levels**2 * np.mean(counts)

        best = min(range(2, n + 1), key=lambda b: (round(profile(b), 9), b))
        assert hb_choose_branching(n) == best

    @pytest.mark.parametrize("n", [256, 1024])
    def test_hb_matches_formula_argmin(self, n):
        values = {b: _tree_variance_profile_1d(n, b) for b in range(2, n + 1)}
        best = min(values, key=lambda b: (values[b], b))
        assert hb_choose_branching(n) == best

    def test_hb_beats_identity_at_large_domain(self):
        n = 1024
        b = hb_choose_branching(n)
        flat = (n + 2) / 3.0  # one level, average range length
        assert _tree_variance_profile_1d(n, b) < flat

    def test_hb_runs_2d(self):
        x = DataVector(Domain((8, 8)), np.arange(64))
        from dpbench.core import make_random_range_workload

        w = make_random_range_workload(x.domain, 50, 1)
        res = hb_run(x, w, 1e6, RngStream(39))
        assert np.allclose(res.answers, answer_workload(w, x), atol=1.0)


class TestGreedyH:
    def test_total_workload_concentrates_on_root(self):
        w = make_total_workload(Domain((64,)))
        usage = _level_usage(_range_supports(w, 64))
        weights = greedy_level_weights(usage)
        assert weights[0] >= 0.9 * weights.sum()

    def test_identity_workload_concentrates_on_leaves(self):
        w = make_identity_workload(Domain((64,)))
        usage = _level_usage(_range_supports(w, 64))
        weights = greedy_level_weights(usage)
        assert weights[-1] >= 0.9 * weights.sum()

    def test_unbiased(self):
        n, trials = 32, 4000
        x = DataVector(Domain((n,)), np.arange(n))
        w = make_prefix_workload(n)
        truth = answer_workload(w, x)
        mean = mean_answers(greedyh_run, x, w, 1.0, trials, seed=40)
        assert np.max(np.abs(mean - truth) / (np.abs(truth) + 10)) < 0.12

    def test_2d_hilbert_path_answers_exactly_at_high_epsilon(self):
        x = DataVector(Domain((8, 8)), np.arange(64))
        from dpbench.core import make_random_range_workload

        w = make_random_range_workload(x.domain, 100, 2)
        res = greedyh_run(x, w, 1e7, RngStream(41))
        assert np.max(np.abs(res.answers - answer_workload(w, x))) < 1e-2


class TestShapeIndependence:
    def test_error_distribution_ignores_shape(self):
        # two datasets of equal scale and domain: scaled-error means must be
        # statistically indistinguishable for a data-independent mechanism
        from dpbench.harness import scaled_error, welch_p_value

        n, eps, trials = 64, 0.5, 200
        gen = np.random.default_rng(42)
        spiky = np.zeros(n, dtype=np.int64)
        spiky[0] = 6400
        flat = np.full(n, 100, dtype=np.int64)
        w = make_prefix_workload(n)
        stream = RngStream(43)
        errors = []
        for which, counts in enumerate((spiky, flat)):
            x = DataVector(Domain((n,)), counts)
            errors.append(
                np.array(
                    [
                        scaled_error(hb_run(x, w, eps, stream.child(which, t)).answers, w, x)
                        for t in range(trials)
                    ]
                )
            )
        assert welch_p_value(errors[0], errors[1]) >= 0.01
