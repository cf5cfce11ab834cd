"""Experiment harness tests: config merging, output schema, determinism,
and worker-count invariance, all at toy scale."""

import csv
import json

import numpy as np
import pytest

from seqcredit.errors import ConfigurationError
from seqcredit.experiments import (
    CSV_COLUMNS,
    EXPERIMENTS,
    ExperimentConfig,
    build_config,
    run_experiment,
)


def tiny_mse_config(**extra):
    values = {
        "seeds": 2,
        "K_values": [2],
        "N": 8,
        **extra,
    }
    cfg, warns = build_config("mse-vs-k", file_values=values)
    return cfg, warns


class TestBuildConfig:
    def test_defaults_cover_every_experiment(self):
        for experiment in EXPERIMENTS:
            cfg, _ = build_config(experiment)
            assert cfg.experiment == experiment
            assert isinstance(cfg, ExperimentConfig)

    def test_precedence_file_then_override_then_cli(self):
        cfg, _ = build_config(
            "mse-vs-k",
            file_values={"seeds": 5, "N": 8},
            overrides={"seeds": 7},
            cli_values={"seeds": 9},
        )
        assert cfg.seeds == 9, "CLI flag must beat override and file"
        assert cfg.N == 8, "untouched file values must survive"

    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ConfigurationError):
            build_config("mse-vs-k", file_values={"seeds": 3, "n_rollouts": 8})
        with pytest.raises(ConfigurationError):
            build_config("optim", overrides={"anchor": "c3"})

    def test_experiment_name_mismatch_is_rejected(self):
        with pytest.raises(ConfigurationError):
            build_config("mse-vs-k", file_values={"experiment": "optim"})

    def test_type_coercion_is_strict(self):
        with pytest.raises(ConfigurationError):
            build_config("mse-vs-k", file_values={"seeds": True})
        with pytest.raises(ConfigurationError):
            build_config("mse-vs-k", file_values={"seeds": 2.5})
        with pytest.raises(ConfigurationError):
            build_config("mse-vs-k", file_values={"record_traces": "yes"})
        cfg, _ = build_config("mse-vs-k", file_values={"seeds": 4.0})
        assert cfg.seeds == 4

    def test_grid_fields_accept_lists(self):
        cfg, _ = build_config("optim", file_values={"K_values": [2, 6], "rho_values": [0, 2.0]})
        assert cfg.K_values == (2, 6)
        assert cfg.rho_values == (0.0, 2.0)

    def test_bad_methods_are_rejected(self):
        with pytest.raises(ConfigurationError):
            build_config("optim", file_values={"methods": ["capo", "qmix"]})
        with pytest.raises(ConfigurationError):
            build_config("optim", file_values={"anchor_method": "qmix"})

    def test_soft_preconditions_warn_but_proceed(self):
        cfg, warns = build_config("mse-vs-k", file_values={"rho_values": [1.0], "seeds": 2})
        assert cfg.rho_values == (1.0,)
        assert warns, "a deviating grid should produce a warning"


class TestRunExperiment:
    def test_writes_schema_conformant_csv(self, tmp_path):
        cfg, warns = tiny_mse_config()
        out_dir = run_experiment(cfg, tmp_path, warns)
        csv_path = out_dir / "results.csv"
        assert csv_path.exists()
        with open(csv_path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = list(reader)
        assert header == list(CSV_COLUMNS), f"header {header}"
        assert rows, "no data rows written"
        methods = {row[header.index("method")] for row in rows}
        assert methods == {"capo", "magrpo", "hagrpo", "c3"}
        metrics = {row[header.index("metric")] for row in rows}
        assert metrics == {"mse", "mse_avg"}
        # per-agent rows carry 1-based agent ids; averages leave agent blank
        agents = {row[header.index("agent")] for row in rows}
        assert "" in agents and "1" in agents and "2" in agents

    def test_echoes_config_and_warnings(self, tmp_path):
        cfg, warns = tiny_mse_config()
        out_dir = run_experiment(cfg, tmp_path, warns)
        with open(out_dir / "config.echo.json") as handle:
            echo = json.load(handle)
        assert echo["experiment"] == "mse-vs-k"
        assert echo["seeds"] == 2
        assert echo["K_values"] == [2]
        assert "version" in echo and "warnings" in echo
        assert (out_dir / "summary.md").exists()

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg, warns = tiny_mse_config()
        first = run_experiment(cfg, tmp_path / "a", warns)
        second = run_experiment(cfg, tmp_path / "b", warns)
        a = (first / "results.csv").read_bytes()
        b = (second / "results.csv").read_bytes()
        assert a == b, "identical configs must reproduce identical bytes"

    def test_worker_count_does_not_change_results(self, tmp_path):
        cfg1, _ = tiny_mse_config()
        cfg2, _ = tiny_mse_config(workers=2)
        serial = run_experiment(cfg1, tmp_path / "serial")
        parallel = run_experiment(cfg2, tmp_path / "parallel")
        a = (serial / "results.csv").read_bytes()
        b = (parallel / "results.csv").read_bytes()
        assert a == b, "scheduling must not leak into results"

    def test_rows_use_crlf_line_endings(self, tmp_path):
        cfg, warns = tiny_mse_config()
        out_dir = run_experiment(cfg, tmp_path, warns)
        raw = (out_dir / "results.csv").read_bytes()
        assert b"\r\n" in raw, "CSV should use RFC-4180 CRLF endings"

    def test_theory_check_emits_one_row_per_check(self, tmp_path):
        cfg, _ = build_config("theory-check", file_values={"n_instances": 2, "reps": 200})
        out_dir = run_experiment(cfg, tmp_path)
        with open(out_dir / "results.csv", newline="") as handle:
            reader = csv.DictReader(handle)
            rows = list(reader)
        by_check = {}
        for row in rows:
            by_check.setdefault(row["method"], set()).add(row["metric"])
        assert len(by_check) == 9, f"expected 9 checks, saw {sorted(by_check)}"
        for name, metrics in by_check.items():
            assert {"margin", "passed", "n_cases"} <= metrics, (
                f"check {name} missing metrics: {metrics}"
            )

    def test_training_experiment_emits_auc_rows(self, tmp_path):
        cfg, warns = build_config(
            "ablation",
            file_values={
                "seeds": 2,
                "K_values": [2],
                "lambda_values": [0.5],
                "rho_values": [0.0],
                "N": 8,
                "L": 4,
                "anchor_iterations": 2,
            },
        )
        out_dir = run_experiment(cfg, tmp_path, warns)
        with open(out_dir / "results.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert {r["method"] for r in rows} == {"capo", "capo_direct"}
        assert {r["metric"] for r in rows} == {"auc"}
        for row in rows:
            value = float(row["value"])
            assert np.isfinite(value) and value >= 0.0
