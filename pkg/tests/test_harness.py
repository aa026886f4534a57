import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpbench.core import (
    DataVector,
    Domain,
    answer_workload,
    make_identity_workload,
    make_prefix_workload,
)
from dpbench.datagen import linear_witness, spiked_witness, synth_shape
from dpbench.harness import (
    ParamTable,
    bias_variance,
    check_consistency,
    check_exchangeability,
    competitive_set,
    estimate_scale_side,
    regret,
    run_trials,
    scaled_error,
    tune_params,
    welch_p_value,
)
from dpbench.mechanisms import build_algorithm
from dpbench.rng import RngStream


class TestScaledError:
    def test_hand_example(self):
        x = DataVector(Domain((2,)), [3, 1])
        w = make_identity_workload(Domain((2,)))
        assert scaled_error([4.0, 0.0], w, x) == pytest.approx(math.sqrt(2) / 8)

    def test_exact_answers_zero(self):
        x = DataVector(Domain((3,)), [1, 2, 3])
        w = make_prefix_workload(3)
        assert scaled_error(answer_workload(w, x), w, x) == 0.0

    def test_doubling_scale_at_fixed_residual_halves(self):
        w = make_identity_workload(Domain((2,)))
        x1 = DataVector(Domain((2,)), [3, 1])
        x2 = DataVector(Domain((2,)), [6, 2])
        e1 = scaled_error(answer_workload(w, x1) + 1.0, w, x1)
        e2 = scaled_error(answer_workload(w, x2) + 1.0, w, x2)
        assert e1 == pytest.approx(2 * e2)

    def test_empty_data_rejected(self):
        x = DataVector(Domain((2,)), [0, 0])
        w = make_prefix_workload(2)
        with pytest.raises(ValueError):
            scaled_error([0.0, 0.0], w, x)

    @given(st.integers(1, 50))
    @settings(max_examples=30, deadline=None)
    def test_invariant_under_joint_scaling(self, c):
        w = make_prefix_workload(4)
        x1 = DataVector(Domain((4,)), [1, 2, 3, 4])
        x2 = DataVector(Domain((4,)), [c, 2 * c, 3 * c, 4 * c])
        y1 = answer_workload(w, x1) + np.array([1.0, -2.0, 0.5, 3.0])
        y2 = answer_workload(w, x2) + c * np.array([1.0, -2.0, 0.5, 3.0])
        assert scaled_error(y1, w, x1) == pytest.approx(scaled_error(y2, w, x2))


class TestRunTrials:
    def test_five_by_ten_gives_fifty_samples(self):
        shape = synth_shape("uniform", 16)
        report = run_trials(
            build_algorithm("identity"),
            shape,
            1000,
            Domain((16,)),
            make_prefix_workload(16),
            0.5,
            seed=1,
        )
        assert len(report.samples) == 50
        assert report.p95 >= min(s.error for s in report.samples)
        assert min(s.error for s in report.samples) <= report.mean <= max(
            s.error for s in report.samples
        )

    def test_identical_seed_identical_report(self):
        shape = synth_shape("powerlaw", 32, {"exponent": 1.0})
        args = (
            build_algorithm("identity"),
            shape,
            500,
            Domain((32,)),
            make_prefix_workload(32),
            1.0,
        )
        a = run_trials(*args, seed=7)
        b = run_trials(*args, seed=7)
        assert a == b

    def test_workers_do_not_change_results(self):
        shape = synth_shape("uniform", 16)
        args = (
            build_algorithm("identity"),
            shape,
            500,
            Domain((16,)),
            make_prefix_workload(16),
            1.0,
        )
        seq = run_trials(*args, n_vectors=2, n_runs=3, seed=3, workers=1)
        par = run_trials(*args, n_vectors=2, n_runs=3, seed=3, workers=2)
        assert seq == par

    def test_identity_mean_matches_analytic_oracle(self):
        # E ||residual||_2 is tightly concentrated at
        # sqrt(sum of per-query variances) for 256 pooled queries
        n, eps, scale = 256, 0.1, 100_000
        shape = synth_shape("uniform", n)
        report = run_trials(
            build_algorithm("identity"),
            shape,
            scale,
            Domain((n,)),
            make_prefix_workload(n),
            eps,
            n_vectors=5,
            n_runs=20,
            seed=11,
        )
        expected = math.sqrt((2.0 / eps**2) * n * (n + 1) / 2.0) / (scale * n)
        assert report.mean == pytest.approx(expected, rel=0.05)

    def test_mechanism_failure_recorded_not_fatal(self):
        from dpbench.mechanisms.base import AlgorithmSpec

        calls = {"n": 0}

        def flaky(x, workload, epsilon, rng):
            calls["n"] += 1
            raise RuntimeError("boom")

        report = run_trials(
            AlgorithmSpec("flaky", flaky),
            synth_shape("uniform", 4),
            100,
            Domain((4,)),
            make_prefix_workload(4),
            1.0,
            n_vectors=1,
            n_runs=3,
            seed=5,
        )
        assert report.failures == 3 and len(report.samples) == 0


class TestCompetitiveSet:
    def test_identical_samples_all_competitive(self):
        samples = np.array([1.0, 1.1, 0.9, 1.05, 0.95] * 10)
        winners = competitive_set({"a": samples, "b": samples.copy(), "c": samples.copy()})
        assert winners == {"a", "b", "c"}

    def test_outlier_excluded(self):
        gen = np.random.default_rng(6)
        base = 1.0 + 0.01 * gen.normal(size=50)
        worse = 10.0 + 0.01 * gen.normal(size=50)
        winners = competitive_set({"good": base, "bad": worse})
        assert winners == {"good"}

    def test_bonferroni_correction_applied(self):
        # construct a pair whose Welch p-value sits between 0.05/2 and 0.05;
        # it must be excluded in a 2-way comparison but included in a 3-way
        gen = np.random.default_rng(7)
        a = gen.normal(size=60)
        for delta in np.linspace(0.1, 1.0, 200):
            b = a + delta
            p = welch_p_value(a, b)
            if 0.05 / 2 <= p < 0.05:
                break
        else:
            pytest.fail("no suitable delta found")
        assert competitive_set({"a": a, "b": b}) == {"a"}
        filler = a + 20.0
        assert "b" in competitive_set({"a": a, "b": b, "c": filler})

    def test_zero_variance_pairs_compare_exactly(self):
        same = np.full(10, 2.0)
        other = np.full(10, 3.0)
        assert competitive_set({"a": same, "b": same.copy()}) == {"a", "b"}
        assert competitive_set({"a": same, "b": other}) == {"a"}


class TestRegret:
    def test_single_algorithm_regret_one(self):
        assert regret({"only": [0.5, 1.0, 2.0]}) == {"only": 1.0}

    def test_hand_example_sqrt_two(self):
        out = regret({"a": [1.0, 4.0], "b": [2.0, 2.0]})
        assert out["a"] == pytest.approx(math.sqrt(2))
        assert out["b"] == pytest.approx(math.sqrt(2))

    def test_oracle_best_composite_is_one(self):
        errors = {"a": [1.0, 4.0], "b": [2.0, 2.0], "best": [1.0, 2.0]}
        assert regret(errors)["best"] == 1.0

    def test_zero_oracle_error_rejected(self):
        with pytest.raises(ValueError):
            regret({"a": [0.0, 1.0], "b": [1.0, 1.0]})

    def test_unbalanced_settings_rejected(self):
        with pytest.raises(ValueError):
            regret({"a": [1.0], "b": [1.0, 2.0]})


class TestBiasVariance:
    def test_unbiased_mechanism_bias_near_zero(self):
        gen = np.random.default_rng(8)
        truth = np.array([10.0, 20.0])
        samples = truth + gen.normal(size=(5000, 2))
        bias, variance = bias_variance(samples, truth, scale=10.0)
        assert bias < 3 * (1.0 / math.sqrt(5000)) / 10.0
        assert variance == pytest.approx(1.0, rel=0.1)

    def test_flat_estimate_bias_bounded_away_from_zero(self):
        x = spiked_witness(16, scale=160)
        w = make_identity_workload(Domain((16,)))
        truth = answer_workload(w, x)
        flat = np.full((10, 16), 10.0)
        bias, _ = bias_variance(flat, truth, scale=float(x.scale))
        # closed form: ||truth - 10||_2 / (160 * 16)
        assert bias == pytest.approx(np.linalg.norm(truth - 10.0) / (160.0 * 16.0))

    def test_exact_constant_samples(self):
        truth = np.array([1.0, 2.0, 3.0])
        samples = np.tile(truth, (4, 1))
        assert bias_variance(samples, truth, scale=2.0) == (0.0, 0.0)


class TestPropertyChecks:
    def test_exchangeability_identity_passes(self):
        shape = synth_shape("powerlaw", 32, {"exponent": 1.0})
        verdict = check_exchangeability(
            build_algorithm("identity"),
            shape,
            m1=1000,
            eps1=0.5,
            workload=make_prefix_workload(32),
            trials=60,
            seed=2,
        )
        assert verdict.passed

    def test_consistency_fail_on_round_starved_mwem(self):
        verdict = check_consistency(
            build_algorithm("mwem"),
            linear_witness(64),
            make_prefix_workload(64),
            trials=3,
            seed=3,
        )
        assert not verdict.passed and verdict.top_mean > 1e-2

    def test_ladder_must_increase(self):
        with pytest.raises(ValueError):
            check_consistency(
                build_algorithm("identity"),
                linear_witness(8),
                make_prefix_workload(8),
                ladder=(10.0, 1.0),
            )


class TestSideInformation:
    def test_default_rho_and_exact_remainder(self):
        x = DataVector(Domain((4,)), [10, 20, 30, 40])
        noisy, remaining, spent = estimate_scale_side(x, 2.0, rng=RngStream(9))
        assert remaining == 0.95 * 2.0
        assert remaining + spent == 2.0

    def test_noisy_scale_mean_matches_clamped_laplace(self):
        # with scale far above the noise, the clamp at 1 never binds and the
        # estimator is unbiased
        x = DataVector(Domain((2,)), [500, 500])
        stream = RngStream(10)
        draws = [estimate_scale_side(x, 1.0, rng=stream.child(t))[0] for t in range(10_000)]
        scale = 1.0 / 0.05  # Laplace scale of the estimate
        stderr = math.sqrt(2 * scale**2 / 10_000)
        assert abs(np.mean(draws) - 1000.0) < 3 * stderr

    def test_rho_bounds(self):
        x = DataVector(Domain((2,)), [1, 1])
        with pytest.raises(ValueError):
            estimate_scale_side(x, 1.0, rho_total=1.5)


class TestParamTable:
    def test_nearest_bucket_lookup(self):
        table = ParamTable()
        table.put(1e3, 64, {"rounds": 5})
        table.put(1e6, 64, {"rounds": 100})
        assert table.lookup(0.1, 1e4, 64) == {"rounds": 5}
        assert table.lookup(10.0, 1e6, 64) == {"rounds": 100}
        assert table.lookup(0.1, 1e3, 128) == {"rounds": 5}  # nearest n

    def test_json_roundtrip(self):
        table = ParamTable()
        table.put(1e4, 32, {"rho": 0.5, "eta": 1.0})
        back = ParamTable.from_json(table.to_json())
        assert back.entries == table.entries

    def test_degenerate_single_point_grid(self):
        shape = synth_shape("uniform", 8)
        table = tune_params(
            lambda theta: build_algorithm("mwem", **theta),
            [{"rounds": 4}],
            [shape],
            [1e3, 1e5],
            make_prefix_workload(8),
            trials=1,
            seed=4,
        )
        assert all(theta == {"rounds": 4} for theta in table.entries.values())

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            tune_params(
                lambda theta: build_algorithm("mwem", **theta),
                [],
                [synth_shape("uniform", 8)],
                [1e3],
                make_prefix_workload(8),
            )


class TestCompetitiveInvariant:
    def test_always_contains_min_mean_algorithm(self):
        gen = np.random.default_rng(44)
        for trial in range(20):
            groups = {
                f"alg{i}": gen.normal(loc=gen.uniform(1, 3), scale=0.5, size=30)
                for i in range(4)
            }
            winners = competitive_set(groups)
            best = min(groups, key=lambda k: groups[k].mean())
            assert best in winners


class TestMechanismOutputsFinite:
    def test_every_1d_mechanism_answers_full_workload(self):
        from dpbench.mechanisms import algorithm_names

        x = DataVector(Domain((32,)), np.arange(1, 33))
        w = make_prefix_workload(32)
        stream = RngStream(45)
        for name in algorithm_names():
            alg = build_algorithm(name)
            if 1 not in alg.dims:
                continue
            res = alg.run(x, w, 0.7, stream.child(hash(name) & 0xFFFF))
            assert len(res.answers) == len(w)
            assert np.all(np.isfinite(res.answers))
