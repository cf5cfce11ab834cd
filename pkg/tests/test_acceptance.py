"""Acceptance suite: one test per headline property of the laboratory.

Each test runs the relevant experiment at its shipped scale, checks the
published claim it encodes, and reports a single CRITERION line through
the terminal-summary hook. Expensive runs are session fixtures shared
between tests. Elapsed times are reported, never asserted: the stated
budgets assume a multi-worker desktop and this suite may run on one
core.
"""

import csv
import math
import subprocess
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest

from seqcredit.checks import (
    check_fictitious_unbiasedness,
    check_gauge_invariance,
    check_variance_bound,
    run_all_checks,
)
from seqcredit.experiments import build_config, run_experiment

from conftest import CRITERION_LINES

MASTER_SEED = 1729


def _report(ok: bool, number: int, stats: str) -> str:
    line = f"CRITERION {number} {'PASS' if ok else 'FAIL'} - {stats}"
    CRITERION_LINES.append(line)
    print(line)
    return line


def _load_rows(out_dir: Path) -> list[dict]:
    with open(out_dir / "results.csv", newline="") as handle:
        return list(csv.DictReader(handle))


def _metric_by_seed(rows, metric, **coords):
    """metric values keyed by seed, filtered on string-equal coordinates."""
    want = {k: str(v) for k, v in coords.items()}
    out = {}
    for row in rows:
        if row["metric"] != metric:
            continue
        if any(row[k] != v for k, v in want.items()):
            continue
        out[int(row["seed"])] = float(row["value"])
    return out


def _seed_mean(rows, metric, **coords) -> float:
    vals = _metric_by_seed(rows, metric, **coords)
    assert vals, f"no rows for {metric} {coords}"
    return float(np.mean(list(vals.values())))


def _paired(avals: dict, bvals: dict) -> tuple[float, float]:
    """Mean and SE of a - b over the seeds both carry."""
    seeds = sorted(set(avals) & set(bvals))
    assert len(seeds) >= 2, "need at least two paired seeds"
    diff = np.array([avals[s] - bvals[s] for s in seeds])
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(len(diff)))


def _run(experiment: str, tmp_path_factory, **overrides):
    cfg, warns = build_config(experiment, overrides=overrides or None)
    t0 = time.perf_counter()
    out_dir = run_experiment(cfg, tmp_path_factory.mktemp(f"acc_{experiment}"))
    return out_dir, time.perf_counter() - t0


@pytest.fixture(scope="session")
def mse_k_run(tmp_path_factory):
    return _run("mse-vs-k", tmp_path_factory, master_seed=MASTER_SEED)


@pytest.fixture(scope="session")
def mse_lambda_run(tmp_path_factory):
    return _run("mse-vs-lambda", tmp_path_factory, master_seed=MASTER_SEED)


@pytest.fixture(scope="session")
def optim_run(tmp_path_factory):
    return _run("optim", tmp_path_factory, master_seed=MASTER_SEED)


@pytest.fixture(scope="session")
def ablation_run(tmp_path_factory):
    return _run("ablation", tmp_path_factory, master_seed=MASTER_SEED)


class TestCriterion1:
    def test_theorem_suite(self):
        t0 = time.perf_counter()
        results = run_all_checks(n_instances=100, master_seed=MASTER_SEED, reps=2000)
        elapsed = time.perf_counter() - t0
        failed = [r.name for r in results if not r.passed]
        worst = min(r.margin for r in results)
        ok = not failed
        _report(
            ok, 1,
            f"{len(results) - len(failed)}/{len(results)} theorem checks pass, "
            f"worst margin {worst:+.3e}, {elapsed:.0f}s",
        )
        assert ok, f"failed checks: {failed}"


class TestCriterion2:
    def test_mse_vs_k_orderings(self, mse_k_run):
        out_dir, elapsed = mse_k_run
        rows = _load_rows(out_dir)
        at16 = {
            m: _seed_mean(rows, "mse_avg", K=16, method=m)
            for m in ("capo", "c3", "magrpo", "hagrpo")
        }
        ordering = at16["capo"] < at16["c3"] < at16["magrpo"] < at16["hagrpo"]
        ma_ratio = at16["magrpo"] / at16["capo"]
        ha_ratio = at16["hagrpo"] / at16["capo"]
        growth_capo = at16["capo"] / _seed_mean(rows, "mse_avg", K=2, method="capo")
        growth_ma = at16["magrpo"] / _seed_mean(rows, "mse_avg", K=2, method="magrpo")
        ok = ordering and ma_ratio >= 5 and ha_ratio >= 5 and growth_capo <= growth_ma / 2
        _report(
            ok, 2,
            f"K=16 MSE capo {at16['capo']:.3f} < c3 {at16['c3']:.3f} < "
            f"magrpo {at16['magrpo']:.3f} < hagrpo {at16['hagrpo']:.3f}; "
            f"MA/CAPO {ma_ratio:.1f}, HA/CAPO {ha_ratio:.1f} (both >= 5); "
            f"growth {growth_capo:.2f} <= {growth_ma / 2:.2f}; {elapsed:.0f}s",
        )
        assert ordering, f"K=16 ordering violated: {at16}"
        assert ma_ratio >= 5, f"MA/CAPO ratio {ma_ratio:.2f} < 5"
        assert ha_ratio >= 5, f"HA/CAPO ratio {ha_ratio:.2f} < 5"
        assert growth_capo <= growth_ma / 2, (
            f"capo growth {growth_capo:.2f} exceeds half of MA's {growth_ma:.2f}"
        )


class TestCriterion3:
    def test_per_agent_flatness(self, mse_k_run):
        out_dir, _ = mse_k_run
        rows = _load_rows(out_dir)
        capo = [
            _seed_mean(rows, "mse", K=16, method="capo", agent=a)
            for a in range(1, 17)
        ]
        flat = max(capo) / min(capo)
        ha16 = _seed_mean(rows, "mse", K=16, method="hagrpo", agent=16)
        ha2 = _seed_mean(rows, "mse", K=16, method="hagrpo", agent=2)
        drift_ratio = ha16 / ha2
        ok = flat <= 3 and drift_ratio >= 3
        _report(
            ok, 3,
            f"CAPO per-agent max/min {flat:.2f} <= 3; "
            f"HA-GRPO post-drift agent16/agent2 {drift_ratio:.2f} >= 3",
        )
        assert flat <= 3, f"capo flatness ratio {flat:.2f} > 3"
        assert drift_ratio >= 3, f"hagrpo agent16/agent2 {drift_ratio:.2f} < 3"


class TestCriterion4:
    def test_mse_vs_lambda(self, mse_lambda_run):
        out_dir, elapsed = mse_lambda_run
        rows = _load_rows(out_dir)
        grid = (0.0, 0.25, 0.5, 0.75, 1.0)
        curve = [_seed_mean(rows, "mse_avg", lambda_int=lam, method="capo") for lam in grid]
        monotone = all(b > a for a, b in zip(curve, curve[1:]))
        minimal = all(
            curve[i]
            <= min(
                _seed_mean(rows, "mse_avg", lambda_int=lam, method=m)
                for m in ("c3", "magrpo", "hagrpo")
            )
            for i, lam in enumerate(grid)
        )
        ok = monotone and minimal
        _report(
            ok, 4,
            "CAPO MSE over lambda grid ["
            + ", ".join(f"{v:.3f}" for v in curve)
            + f"] strictly increasing and minimal at every point; {elapsed:.0f}s",
        )
        assert monotone, f"capo curve not strictly increasing: {curve}"
        assert minimal, "capo is not the minimum-MSE method at some lambda"


class TestCriterion5:
    def test_optimization_orderings(self, optim_run):
        out_dir, elapsed = optim_run
        rows = _load_rows(out_dir)
        methods = ("capo", "magrpo", "hagrpo", "c3")
        ks = (2, 6, 10)

        pooled = {
            (K, m): np.mean([
                float(r["value"])
                for r in rows
                if r["metric"] == "auc" and r["method"] == m and r["K"] == str(K)
            ])
            for K in ks
            for m in methods
        }

        # (a) paired by (lambda, rho, seed) at K=2
        key = lambda r: (r["lambda_int"], r["rho"], r["seed"])
        k2 = {
            m: {
                key(r): float(r["value"])
                for r in rows
                if r["metric"] == "auc" and r["method"] == m and r["K"] == "2"
            }
            for m in ("capo", "magrpo")
        }
        mean_a, se_a = _paired(k2["magrpo"], k2["capo"])
        cond_a = mean_a <= se_a

        cond_b = all(
            pooled[(K, "capo")] == min(pooled[(K, m)] for m in methods)
            for K in (6, 10)
        )
        ha = [pooled[(K, "hagrpo")] for K in ks]
        cond_c = ha[0] < ha[1] < ha[2]
        cond_d = all(
            pooled[(K, "c3")] == max(pooled[(K, m)] for m in methods)
            for K in (6, 10)
        )
        ok = cond_a and cond_b and cond_c and cond_d
        table = "; ".join(
            f"K={K}: " + " ".join(f"{m}={pooled[(K, m)]:.3f}" for m in methods)
            for K in ks
        )
        _report(
            ok, 5,
            f"(a) K=2 MA-CAPO {mean_a:+.4f} <= SE {se_a:.4f}: {cond_a}; "
            f"(b) CAPO lowest at K=6,10: {cond_b}; (c) HA increasing {ha[0]:.3f}<"
            f"{ha[1]:.3f}<{ha[2]:.3f}: {cond_c}; (d) C3 highest at K=6,10: {cond_d}; "
            f"[{table}]; {elapsed:.0f}s",
        )
        assert cond_a, f"K=2: magrpo - capo = {mean_a:+.4f} > 1 SE ({se_a:.4f})"
        assert cond_b, f"capo not lowest at K in (6, 10): {table}"
        assert cond_c, f"hagrpo AUC not increasing in K: {ha}"
        assert cond_d, f"c3 not highest at K in (6, 10): {table}"


class TestCriterion6:
    def test_direct_effect_ablation(self, ablation_run):
        out_dir, elapsed = ablation_run
        rows = _load_rows(out_dir)
        cells = [(K, lam) for K in (2, 8) for lam in (0.0, 1.0)]
        parts = []
        ok = True
        for rho, need in ((0.0, "parity"), (20.0, "capo_wins")):
            for K, lam in cells:
                capo = _metric_by_seed(
                    rows, "auc", K=K, lambda_int=lam, rho=rho, method="capo"
                )
                direct = _metric_by_seed(
                    rows, "auc", K=K, lambda_int=lam, rho=rho, method="capo_direct"
                )
                mean_dc, se = _paired(direct, capo)
                if need == "parity":
                    cell_ok = mean_dc <= se
                else:
                    cell_ok = mean_dc > se
                ok = ok and cell_ok
                parts.append(
                    f"K{K}/lam{lam:g}/rho{rho:g}: d-c {mean_dc:+.4f} (SE {se:.4f}) "
                    f"{'ok' if cell_ok else 'VIOLATED'}"
                )
        _report(ok, 6, "; ".join(parts) + f"; {elapsed:.0f}s")
        assert ok, "ablation cells violated: " + "; ".join(
            p for p in parts if "VIOLATED" in p
        )


class TestCriterion7:
    def test_estimator_micro_properties(self):
        t0 = time.perf_counter()
        fict = check_fictitious_unbiasedness(MASTER_SEED, streams=1000, L=64)
        var = check_variance_bound(MASTER_SEED, n_batches=500, slack=0.5)
        gauge = check_gauge_invariance(MASTER_SEED)
        elapsed = time.perf_counter() - t0
        ok = fict.passed and var.passed and gauge.passed
        _report(
            ok, 7,
            f"fictitious mean within 4 SE (margin {fict.margin:+.4f}); "
            f"variance bound at 1.5x slack (margin {var.margin:+.4f}); "
            f"gauge invariance to 1e-12 (margin {gauge.margin:+.3e}); {elapsed:.0f}s",
        )
        assert fict.passed, fict.detail
        assert var.passed, var.detail
        assert gauge.passed, gauge.detail


class TestCriterion8:
    def test_byte_identical_reruns(self, tmp_path):
        t0 = time.perf_counter()
        outputs = []
        for attempt in ("first", "second"):
            out = tmp_path / attempt
            for sub, extra in (
                ("mse-vs-k", ["--override", "seeds=3", "--override", "K_values=[2,4]"]),
                ("ablation", [
                    "--override", "seeds=2", "--override", "K_values=[2]",
                    "--override", "rho_values=[0.0]", "--override", "lambda_values=[0.0]",
                    "--override", "anchor_iterations=3",
                ]),
            ):
                proc = subprocess.run(
                    [sys.executable, "-m", "seqcredit.cli", sub,
                     "--out", str(out), "--master-seed", str(MASTER_SEED)] + extra,
                    capture_output=True, text=True,
                )
                assert proc.returncode == 0, proc.stderr
            outputs.append({
                sub: (out / sub / "results.csv").read_bytes()
                for sub in ("mse-vs-k", "ablation")
            })
        identical = outputs[0] == outputs[1]
        elapsed = time.perf_counter() - t0
        _report(
            identical, 8,
            "two seeded runs of mse-vs-k and ablation produced byte-identical "
            f"results.csv; {elapsed:.0f}s",
        )
        assert identical, "rerun with identical config and master seed diverged"
