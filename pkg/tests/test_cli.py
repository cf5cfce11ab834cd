"""Command-line interface tests: argument plumbing, override parsing,
and the documented exit-code contract."""

import json

import pytest

from seqcredit import cli
from seqcredit.errors import TheoryCheckFailure


def write_config(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return str(path)


class TestOverrideParsing:
    def test_values_parse_as_json_with_string_fallback(self):
        parsed = cli._parse_overrides(["seeds=3", "eta=0.5", "anchor_method=c3", "K_values=[2,4]"])
        assert parsed == {"seeds": 3, "eta": 0.5, "anchor_method": "c3", "K_values": [2, 4]}

    def test_missing_key_is_rejected(self):
        from seqcredit.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            cli._parse_overrides(["=3"])
        with pytest.raises(ConfigurationError):
            cli._parse_overrides(["seeds"])


class TestExitCodes:
    def test_success_returns_zero_and_writes_outputs(self, tmp_path, capsys):
        config = write_config(tmp_path, {"seeds": 2, "K_values": [2], "N": 8})
        code = cli.main([
            "mse-vs-k", "--config", config, "--out", str(tmp_path / "results"),
        ])
        captured = capsys.readouterr()
        assert code == 0, captured.err
        assert (tmp_path / "results" / "mse-vs-k" / "results.csv").exists()
        assert "results.csv" in captured.out

    def test_unknown_config_key_returns_one(self, tmp_path, capsys):
        config = write_config(tmp_path, {"seeds": 2, "bogus_knob": 1})
        code = cli.main(["mse-vs-k", "--config", config, "--out", str(tmp_path / "r")])
        assert code == 1
        assert "configuration error" in capsys.readouterr().err

    def test_malformed_json_returns_one(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        code = cli.main(["mse-vs-k", "--config", str(path), "--out", str(tmp_path / "r")])
        assert code == 1

    def test_missing_config_file_returns_one(self, tmp_path):
        code = cli.main([
            "mse-vs-k", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "r"),
        ])
        assert code == 1

    def test_budget_error_returns_three(self, tmp_path, capsys):
        # anchoring on capo at 3 iterations leaves 3N calls, below one
        # c3 iteration's cost of N(1 + K * M_c3) = 5N at K=2
        config = write_config(tmp_path, {
            "seeds": 1,
            "K_values": [2],
            "lambda_values": [0.0],
            "rho_values": [0.0],
            "methods": ["capo", "c3"],
            "anchor_method": "capo",
            "anchor_iterations": 3,
            "N": 8,
            "L": 4,
        })
        code = cli.main(["optim", "--config", config, "--out", str(tmp_path / "r")])
        assert code == 3
        assert "resource error" in capsys.readouterr().err

    def test_theory_check_failure_returns_two(self, tmp_path, monkeypatch):
        def explode(cfg, out_root, warnings=None):
            raise TheoryCheckFailure("margin below zero")

        monkeypatch.setattr(cli, "run_experiment", explode)
        code = cli.main(["theory-check", "--out", str(tmp_path / "r")])
        assert code == 2

    def test_cli_flags_override_config_file(self, tmp_path):
        config = write_config(tmp_path, {"seeds": 5, "K_values": [2], "N": 8})
        code = cli.main([
            "mse-vs-k", "--config", config, "--out", str(tmp_path / "r"), "--seeds", "2",
        ])
        assert code == 0
        with open(tmp_path / "r" / "mse-vs-k" / "config.echo.json") as handle:
            echo = json.load(handle)
        assert echo["seeds"] == 2

    def test_override_flag_reaches_the_config(self, tmp_path):
        code = cli.main([
            "mse-vs-k", "--out", str(tmp_path / "r"),
            "--override", "seeds=2", "--override", "K_values=[2]", "--override", "N=8",
        ])
        assert code == 0
        with open(tmp_path / "r" / "mse-vs-k" / "config.echo.json") as handle:
            echo = json.load(handle)
        assert echo["seeds"] == 2 and echo["K_values"] == [2] and echo["N"] == 8


class TestTheoryCheckCommand:
    def test_tiny_battery_passes_end_to_end(self, tmp_path, capsys):
        code = cli.main([
            "theory-check", "--out", str(tmp_path / "r"),
            "--override", "n_instances=2", "--override", "reps=200",
        ])
        out = capsys.readouterr().out
        assert code == 0, out
        assert out.count("[PASS]") == 9, f"expected 9 passing lines, got:\n{out}"
