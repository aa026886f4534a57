import json

import pytest

from dpbench.cli import main
from dpbench.config import ConfigError, parse_config, preset_config
from dpbench.reporting import (
    read_summary_csv,
    read_trials_csv,
    write_summary_csv,
    write_trials_csv,
)

TINY_CONFIG = """
[run]
seed = 99
epsilons = 0.5
vectors = 2
runs = 3
[data]
shapes = powerlaw:1.0, uniform
domains = 32
scales = 1e3, 1e4
[algorithms]
identity =
uniform =
hb =
"""

TINY_TUNE = """
[run]
seed = 17
[data]
shapes = uniform
domains = 16
scales = 1e3
[algorithms]
mwem_star =
[tune]
algorithm = mwem_star
grid = rounds:2,8
shapes = powerlaw:1.0
products = 1e2, 1e4
domain = 16
trials = 1
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "bench.cfg"
    path.write_text(TINY_CONFIG)
    return path


class TestRun:
    def test_smoke_and_outputs(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(tiny_config), "--out", str(out)]) == 0
        for name in ("trials.csv", "summary.csv", "regret.csv"):
            assert (out / name).exists()
        rows = read_summary_csv(out / "summary.csv")
        # 2 shapes x 2 scales x 3 algorithms
        assert len(rows) == 12
        assert any(r["competitive"] for r in rows)

    def test_rerun_byte_identical(self, tiny_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(tiny_config), "--out", str(out1)])
        main(["run", "--config", str(tiny_config), "--out", str(out2)])
        for name in ("trials.csv", "summary.csv", "regret.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_seed_override_changes_outputs(self, tiny_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(tiny_config), "--out", str(out1)])
        main(["run", "--config", str(tiny_config), "--out", str(out2), "--seed", "123"])
        assert (out1 / "trials.csv").read_bytes() != (out2 / "trials.csv").read_bytes()

    def test_env_var_output_dir(self, tiny_config, tmp_path, monkeypatch):
        monkeypatch.setenv("DPBENCH_OUT", str(tmp_path / "envout"))
        assert main(["run", "--config", str(tiny_config)]) == 0
        assert (tmp_path / "envout" / "summary.csv").exists()

    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 1

    def test_invalid_config_reports_diagnostic(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[run]\nseed = 1\n[data]\nshapes = uniform\n")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
        assert "missing" in capsys.readouterr().err

    def test_prefix_workload_rejected_on_2d(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(TINY_CONFIG.replace("domains = 32", "domains = 8x8"))
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


class TestTune:
    def test_emits_param_table(self, tmp_path):
        cfg = tmp_path / "tune.cfg"
        cfg.write_text(TINY_TUNE)
        out = tmp_path / "out"
        assert main(["tune", "--config", str(cfg), "--out", str(out)]) == 0
        rows = json.loads((out / "params_mwem_star.json").read_text())
        assert {r["bucket"] for r in rows} == {2, 4}
        assert all("rounds" in r["theta"] for r in rows)

    def test_refuses_evaluation_data_in_training(self, tmp_path):
        histogram = tmp_path / "eval.csv"
        histogram.write_text("n=4\n1,2,3,4\n")
        cfg = tmp_path / "tune.cfg"
        cfg.write_text(TINY_TUNE.replace("shapes = powerlaw:1.0", f"shapes = file:{histogram}"))
        assert main(["tune", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_empty_training_list_rejected(self, tmp_path):
        cfg = tmp_path / "tune.cfg"
        cfg.write_text(TINY_TUNE.replace("shapes = powerlaw:1.0", "shapes ="))
        assert main(["tune", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


class TestCheck:
    def test_budget_suite_passes(self, tmp_path):
        out = tmp_path / "out"
        assert main(["check", "budget", "--out", str(out)]) == 0
        text = (out / "check_budget.csv").read_text()
        assert "identity" in text and ",1," in text


class TestReport:
    def test_exports_from_summary(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(tiny_config), "--out", str(out)])
        assert main(["report", "--summary", str(out / "summary.csv"), "--out", str(out)]) == 0
        scale_csv = (out / "error_vs_scale.csv").read_text().splitlines()
        assert scale_csv[0] == "algorithm,scale,mean_error"
        assert len(scale_csv) == 1 + 3 * 2  # 3 algorithms x 2 scales
        spread = (out / "shape_spread.csv").read_text().splitlines()
        assert spread[0] == "algorithm,scale,shape,error,mean_over_shapes"

    def test_empty_summary_gives_headers_only(self, tmp_path):
        from dpbench.reporting import SUMMARY_COLUMNS

        empty = tmp_path / "summary.csv"
        empty.write_text(",".join(SUMMARY_COLUMNS) + "\n")
        out = tmp_path / "out"
        assert main(["report", "--summary", str(empty), "--out", str(out)]) == 0
        assert (out / "error_vs_scale.csv").read_text() == "algorithm,scale,mean_error\n"

    def test_missing_columns_diagnostic(self, tmp_path, capsys):
        bad = tmp_path / "summary.csv"
        bad.write_text("algorithm,shape\n")
        assert main(["report", "--summary", str(bad), "--out", str(tmp_path / "o")]) == 3
        assert "missing columns" in capsys.readouterr().err


class TestRoundtrips:
    def test_trials_csv_roundtrip(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(tiny_config), "--out", str(out)])
        reports = read_trials_csv(out / "trials.csv")
        rewritten = tmp_path / "again.csv"
        write_trials_csv(reports, rewritten)
        assert read_trials_csv(rewritten) == reports

    def test_summary_csv_roundtrip_lossless(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(tiny_config), "--out", str(out)])
        first = read_summary_csv(out / "summary.csv")
        reports = read_trials_csv(out / "trials.csv")
        keys = {
            (r["algorithm"], r["shape"], r["scale"], r["domain"], r["epsilon"])
            for r in first
            if r["competitive"]
        }
        write_summary_csv(reports, keys, tmp_path / "again.csv")
        second = read_summary_csv(tmp_path / "again.csv")
        assert {(r["algorithm"], r["shape"], r["scale"]) for r in first} == {
            (r["algorithm"], r["shape"], r["scale"]) for r in second
        }
        by_key = {(r["algorithm"], r["shape"], r["scale"], r["epsilon"]): r for r in first}
        for row in second:
            match = by_key[(row["algorithm"], row["shape"], row["scale"], row["epsilon"])]
            assert row["mean"] == match["mean"] and row["p95"] == match["p95"]


class TestPresets:
    def test_all_presets_parse(self):
        for name in ("desk-1d", "desk-2d", "paper-1d", "paper-2d", "tune-mwem", "tune-ahp"):
            cfg = preset_config(name)
            assert cfg.seed is not None

    def test_paper_grid_matches_published_sweep(self):
        cfg = preset_config("paper-1d")
        assert len(cfg.scales) == 6 and max(cfg.scales) == 10**8
        assert len(cfg.domains) == 5 and (4096,) in cfg.domains
        cfg2 = preset_config("paper-2d")
        assert len(cfg2.scales) == 6 and len(cfg2.domains) == 4
        assert (256, 256) in cfg2.domains

    def test_seed_is_mandatory(self):
        with pytest.raises(ConfigError):
            parse_config("[data]\nshapes = uniform\ndomains = 8\nscales = 10\n[algorithms]\nidentity =\n")


class TestCheckExitCodes:
    def test_asserted_failure_exits_two(self, tmp_path, monkeypatch):
        import dpbench.cli as cli
        from dpbench.suites import SuiteRow

        monkeypatch.setattr(
            cli,
            "consistency_suite",
            lambda trials, seed: [SuiteRow("consistency", "fake", True, False, "forced")],
        )
        assert cli.main(["check", "consistency", "--out", str(tmp_path)]) == 2

    def test_recorded_failure_does_not_fail_run(self, tmp_path, monkeypatch):
        import dpbench.cli as cli
        from dpbench.suites import SuiteRow

        monkeypatch.setattr(
            cli,
            "consistency_suite",
            lambda trials, seed: [SuiteRow("consistency", "fake", False, False, "forced")],
        )
        assert cli.main(["check", "consistency", "--out", str(tmp_path)]) == 0
