import json
import os

import pytest

from pdppo.cli import main

TINY_TRAIN = {
    "env": "bandit",
    "total_steps": 48,
    "agent_config": {"window": 16, "epochs": 2, "minibatch_size": 8, "hidden_sizes": [8]},
}


def write_config(tmp_path, extra=None, name="config.json"):
    cfg = dict(TINY_TRAIN)
    if extra:
        cfg.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestTrain:
    def test_basic_run_writes_artifacts(self, tmp_path, capsys):
        code = main(["train", "--config", write_config(tmp_path), "--agent", "pdppo",
                     "--seed", "1", "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "runs" / "pdppo_seed1.csv").exists()
        assert (tmp_path / "out" / "config.json").exists()
        assert "pdppo seed=1" in capsys.readouterr().out

    def test_unknown_agent_is_usage_error(self, tmp_path, capsys):
        code = main(["train", "--agent", "dqn", "--out", str(tmp_path)])
        assert code == 2

    def test_unknown_flag_is_usage_error(self, tmp_path):
        assert main(["train", "--bogus", "1"]) == 2

    def test_bad_config_file_is_usage_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["train", "--config", str(bad)]) == 2
        assert main(["train", "--config", str(tmp_path / "missing.json")]) == 2

    def test_bad_config_value_is_usage_error(self, tmp_path):
        path = write_config(tmp_path, {"agent": "nonsense"})
        assert main(["train", "--config", path, "--out", str(tmp_path / "o")]) == 2

    def test_repeat_invocation_bitwise_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["train", "--config", cfg, "--agent", "ppo", "--seed", "7",
                     "--out", str(tmp_path / "a")]) == 0
        assert main(["train", "--config", cfg, "--agent", "ppo", "--seed", "7",
                     "--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "runs" / "ppo_seed7.csv").read_bytes()
        b = (tmp_path / "b" / "runs" / "ppo_seed7.csv").read_bytes()
        assert a == b


class TestFlagPrecedence:
    def test_flag_beats_env_var_beats_config_beats_default(self, tmp_path, monkeypatch):
        # config sets seed 10; env var says 20; flag says 30
        cfg = write_config(tmp_path, {"base_seed": 10})
        out = tmp_path / "o1"
        monkeypatch.setenv("PDPPO_SEED", "20")
        assert main(["train", "--config", cfg, "--agent", "ppo", "--seed", "30",
                     "--out", str(out)]) == 0
        assert (out / "runs" / "ppo_seed30.csv").exists()

        out2 = tmp_path / "o2"
        assert main(["train", "--config", cfg, "--agent", "ppo", "--out", str(out2)]) == 0
        assert (out2 / "runs" / "ppo_seed20.csv").exists()  # env var wins without flag

        monkeypatch.delenv("PDPPO_SEED")
        out3 = tmp_path / "o3"
        assert main(["train", "--config", cfg, "--agent", "ppo", "--out", str(out3)]) == 0
        assert (out3 / "runs" / "ppo_seed10.csv").exists()  # config wins without env var

        out4 = tmp_path / "o4"
        cfg_noseed = write_config(tmp_path, name="noseed.json")
        assert main(["train", "--config", cfg_noseed, "--agent", "ppo", "--out", str(out4)]) == 0
        assert (out4 / "runs" / "ppo_seed0.csv").exists()  # built-in default


class TestBench:
    def test_two_methods_two_seeds(self, tmp_path):
        cfg = write_config(tmp_path, {"methods": ["pdppo", "ppo"], "n_runs": 2, "base_seed": 0})
        out = tmp_path / "bench"
        code = main(["bench", "--config", cfg, "--out", str(out)])
        assert code == 0
        for method in ("pdppo", "ppo"):
            for seed in (0, 1):
                assert (out / "runs" / f"{method}_seed{seed}.csv").exists()
            assert (out / f"aggregate_{method}.csv").exists()
        report = json.loads((out / "report.json").read_text())
        assert set(report["methods"]) == {"pdppo", "ppo"}
        pair = [t for t in report["tests"]
                if {t["method_a"], t["method_b"]} == {"pdppo", "ppo"}
                and t["metric"] == "total_cumulative_reward"]
        assert pair and 0.0 <= pair[0]["p"] <= 1.0

    def test_bad_method_list(self, tmp_path):
        cfg = write_config(tmp_path, {"methods": ["pdppo", "dqn"]})
        assert main(["bench", "--config", cfg, "--out", str(tmp_path / "x")]) == 2

    def test_config_required(self):
        assert main(["bench"]) == 2


class TestEval:
    def test_greedy_eval_from_checkpoint(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["train", "--config", cfg, "--agent", "pdppo", "--seed", "2",
                     "--out", str(out)]) == 0
        ckpt = out / "runs" / "pdppo_seed2.ckpt.npz"
        code = main(["eval", "--checkpoint", str(ckpt), "--episodes", "5", "--seed", "0"])
        assert code == 0
        out_text = capsys.readouterr().out
        assert "greedy average episode reward" in out_text

    def test_missing_checkpoint_is_usage_error(self, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "nope.npz")]) == 2


class TestEnvCheck:
    @pytest.mark.parametrize("env", ["frozenlake", "lotsizing"])
    def test_suites_pass(self, env, capsys):
        code = main(["env-check", "--env", env, "--trials", "300"])
        out = capsys.readouterr().out
        assert code == 0, out
        assert "PASS" in out
        assert "FAIL" not in out

    def test_unknown_env_is_usage_error(self):
        assert main(["env-check", "--env", "pong"]) == 2

    def test_lotsizing_reports_oracle_delta(self, capsys):
        assert main(["env-check", "--env", "lotsizing", "--trials", "300"]) == 0
        assert "max |delta|" in capsys.readouterr().out


class TestEntryPoint:
    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_no_command_is_usage_error(self):
        assert main([]) == 2
