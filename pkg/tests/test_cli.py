import json
from pathlib import Path

import numpy as np
import pytest

from irldr import cli, config as config_mod
from irldr.config import ConfigError, load_config


def micro_config(tmp_path: Path, **overrides) -> Path:
    cfg = {
        "seed": 3,
        "out_dir": str(tmp_path / "run"),
        "data": {"source": "synth", "archetype": "ac_only", "synth_seed": 11, "n_days": 12},
        "split": {"mode": "days", "train_days": [6], "test_days": [7]},
        "price": {"mode": "constant", "value": 1.0},
        "true_reward": {"discomfort_mode": "absolute", "normalized_deviations": True},
        "dqn": {"episodes": 25},
        "irl": {"max_iterations": 1, "iteration_episodes": 20},
    }
    for key, value in overrides.items():
        if isinstance(value, dict):
            cfg.setdefault(key, {}).update(value)
        else:
            cfg[key] = value
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def run_pipeline(tmp_path, *stages):
    cfg = micro_config(tmp_path)
    for stage in stages:
        assert cli.main([stage, "--config", str(cfg)]) == 0
    return tmp_path / "run"


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"surprise": 1}')
        with pytest.raises(ConfigError, match="unknown config key: surprise"):
            load_config(path)

    def test_nested_unknown_key_is_qualified(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"dqn": {"momentum": 0.9}}')
        with pytest.raises(ConfigError, match="dqn.momentum"):
            load_config(path)

    def test_defaults_are_validated(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{}")
        cfg = load_config(path)
        assert cfg["dqn"]["episodes"] == 1500
        assert cfg["irl"]["max_iterations"] == 10

    def test_bad_archetype(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"data": {"archetype": "villa"}}')
        with pytest.raises(ConfigError, match="archetype"):
            load_config(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="valid JSON"):
            load_config(path)


class TestExitCodes:
    def test_missing_config_exits_2(self, capsys):
        assert cli.main(["simulate-expert", "--config", "/does/not/exist.json"]) == 2
        assert "/does/not/exist.json" in capsys.readouterr().err

    def test_evaluate_without_expert_exits_2(self, tmp_path, capsys):
        cfg = micro_config(tmp_path)
        assert cli.main(["evaluate", "--config", str(cfg)]) == 2
        assert "simulate-expert" in capsys.readouterr().err

    def test_learn_reward_without_expert_exits_2(self, tmp_path, capsys):
        cfg = micro_config(tmp_path)
        assert cli.main(["learn-reward", "--config", str(cfg)]) == 2
        err = capsys.readouterr().err
        assert "expert" in err


class TestSimulateExpert:
    def test_artifacts_exist(self, tmp_path):
        out = run_pipeline(tmp_path, "simulate-expert")
        assert (out / "expert" / "expert_net.bin").exists()
        assert (out / "expert" / "training_curve.csv").exists()
        assert (out / "expert" / "trajectories" / "expert_day006.csv").exists()
        manifest = json.loads((out / "expert" / "manifest.json").read_text())
        assert manifest["command"] == "simulate-expert"
        assert "expert_net.bin" in manifest["artifacts"]

    def test_training_curve_has_one_row_per_episode(self, tmp_path):
        out = run_pipeline(tmp_path, "simulate-expert")
        lines = (out / "expert" / "training_curve.csv").read_text().splitlines()
        assert lines[0] == "episode,epsilon,reward,mean_reward_100"
        assert len(lines) == 1 + 25

    def test_trajectory_csv_has_96_rows(self, tmp_path):
        out = run_pipeline(tmp_path, "simulate-expert")
        lines = (out / "expert" / "trajectories" / "expert_day006.csv").read_text().splitlines()
        assert len(lines) == 1 + 96


class TestLearnReward:
    def test_result_json_is_consistent(self, tmp_path):
        out = run_pipeline(tmp_path, "simulate-expert", "learn-reward")
        payload = json.loads((out / "irl" / "irl_result.json").read_text())
        n = payload["iterations_run"]
        assert len(payload["alpha_history"]) == n
        assert len(payload["min_margin_history"]) == n
        assert all(abs(a) <= 1 + 1e-9 for alpha in payload["alpha_history"] for a in alpha)
        assert payload["stop_reason"] in ("max_iterations", "margin_converged")
        assert (out / "irl" / "learned_net.bin").exists()


class TestEvaluate:
    def test_metric_and_plot_artifacts(self, tmp_path):
        out = run_pipeline(tmp_path, "simulate-expert", "learn-reward", "evaluate")
        per_day = (out / "eval" / "metrics_per_day.csv").read_text().splitlines()
        assert per_day[0] == "day,date,mae,mse,pearson"
        assert len(per_day) == 2  # one test day
        summary = (out / "eval" / "metrics_summary.csv").read_text().splitlines()
        assert summary[0] == "metric,average,minimum,maximum,median"
        assert {row.split(",")[0] for row in summary[1:]} == {"MAE", "MSE", "Pearson"}
        provision = (out / "eval" / "provision.csv").read_text().splitlines()
        assert len(provision) == 1 + 96  # 96 rows per day per policy pair
        assert (out / "eval" / "provision_day007.svg").exists()
        assert (out / "eval" / "reward_comparison.csv").exists()

    def test_schedule_grid_encoding_ranges(self, tmp_path):
        out = run_pipeline(tmp_path, "simulate-expert", "learn-reward", "evaluate")
        for label in ("expert", "learned"):
            lines = (out / "eval" / f"schedule_{label}_day007.csv").read_text().splitlines()
            rows = [line.split(",") for line in lines[1:]]
            by_name = {row[0]: np.array([float(v) for v in row[1:]]) for row in rows}
            for name in ("ev", "washing_machine", "dishwasher", "dryer"):
                assert set(np.unique(by_name[name])) <= {-1.0, 0.0, 1.0}
            assert np.all(by_name["ac"] >= 0.0) and np.all(by_name["ac"] <= 1.0)

    def test_identical_policies_give_zero_mae(self, tmp_path):
        cfg_path = micro_config(tmp_path)
        assert cli.main(["simulate-expert", "--config", str(cfg_path)]) == 0
        assert cli.main(["learn-reward", "--config", str(cfg_path)]) == 0
        out = tmp_path / "run"
        # point the learned checkpoint at the expert weights
        for suffix in (".bin", ".json"):
            src = out / "expert" / ("expert_net" + suffix)
            dst = out / "irl" / ("learned_net" + suffix)
            dst.write_bytes(src.read_bytes())
        assert cli.main(["evaluate", "--config", str(cfg_path)]) == 0
        per_day = (out / "eval" / "metrics_per_day.csv").read_text().splitlines()
        for row in per_day[1:]:
            assert float(row.split(",")[2]) == 0.0


class TestBenchExact:
    def test_report_contents_and_determinism(self, tmp_path):
        cfg_path = micro_config(tmp_path, bench_exact={"lambda_sweep": [3.0, 1e6]})
        assert cli.main(["bench-exact", "--config", str(cfg_path)]) == 0
        out = tmp_path / "run" / "bench"
        payload = json.loads((out / "bench_exact.json").read_text())
        assert payload["best_agreement"] >= 0.95
        by_lambda = {r["lambda"]: r for r in payload["results"]}
        assert by_lambda[1e6]["r_l1_norm"] == pytest.approx(0.0, abs=1e-6)
        first = (out / "bench_exact.csv").read_bytes()
        assert cli.main(["bench-exact", "--config", str(cfg_path)]) == 0
        assert (out / "bench_exact.csv").read_bytes() == first


class TestReproducibility:
    def test_rerun_is_byte_identical(self, tmp_path):
        cfg_path = micro_config(tmp_path)
        for stage in ("simulate-expert", "learn-reward"):
            assert cli.main([stage, "--config", str(cfg_path)]) == 0
        out = tmp_path / "run"
        snapshot = {
            p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()
        }
        for stage in ("simulate-expert", "learn-reward"):
            assert cli.main([stage, "--config", str(cfg_path)]) == 0
        for rel, blob in snapshot.items():
            assert (out / rel).read_bytes() == blob, rel

    def test_seed_override_changes_training(self, tmp_path):
        cfg_path = micro_config(tmp_path)
        assert cli.main(["simulate-expert", "--config", str(cfg_path)]) == 0
        out = tmp_path / "run"
        first = (out / "expert" / "expert_net.bin").read_bytes()
        assert cli.main(["simulate-expert", "--config", str(cfg_path), "--seed", "99"]) == 0
        assert (out / "expert" / "expert_net.bin").read_bytes() != first
