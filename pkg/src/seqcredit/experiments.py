"""Experiment harness: configuration, execution, and result files.

Each experiment expands into independent tasks (one per reward-model
instance), every task derives its own named random streams from the
master seed, and rows are sorted canonically before writing. Reruns
with the same configuration and master seed therefore produce
byte-identical results files, regardless of worker count or scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import fit_batch
from .checks import run_all_checks
from .errors import ConfigurationError, TheoryCheckFailure
from .estimators import EnvCallMeter, c3, capo_direct, capo_exact_batch, hagrpo, magrpo
from .oracle import exact_conditional_mean
from .policies import init_policy, ppo_update
from .rewards import optimal_value, sample_reward_model, uniform_value
from .seeding import derive_rng, derive_seed
from .training import METHODS, TrainConfig, collect_rollouts, regret_auc, run_method

EXPERIMENTS = ("mse-vs-k", "mse-vs-lambda", "optim", "ablation", "theory-check")

CSV_COLUMNS = (
    "experiment",
    "K",
    "lambda_int",
    "rho",
    "method",
    "agent",
    "seed",
    "metric",
    "value",
)

_ALL_METHODS = ("capo", "magrpo", "hagrpo", "c3")

_DEFAULTS: dict[str, dict] = {
    "mse-vs-k": dict(
        seeds=30,
        K_values=(2, 4, 8, 16),
        lambda_values=(0.0,),
        rho_values=(0.0,),
        methods=_ALL_METHODS,
        N=16,
        ridge_lambda=1e-3,
        anchor_method="c3",
    ),
    "mse-vs-lambda": dict(
        seeds=30,
        K_values=(4,),
        lambda_values=(0.0, 0.25, 0.5, 0.75, 1.0),
        rho_values=(0.0,),
        methods=_ALL_METHODS,
        N=16,
        ridge_lambda=1e-3,
        anchor_method="c3",
    ),
    "optim": dict(
        seeds=50,
        K_values=(2, 6, 10),
        lambda_values=(0.0, 0.5, 1.0),
        rho_values=(0.0, 2.0),
        methods=_ALL_METHODS,
        N=32,
        ridge_lambda=0.1,
        anchor_method="c3",
    ),
    "ablation": dict(
        seeds=50,
        K_values=(2, 8),
        lambda_values=(0.0, 1.0),
        rho_values=(0.0, 20.0),
        methods=("capo", "capo_direct"),
        N=32,
        ridge_lambda=0.1,
        anchor_method="c3",
    ),
    "theory-check": dict(
        seeds=1,
        K_values=(),
        lambda_values=(),
        rho_values=(),
        methods=(),
        N=16,
        ridge_lambda=1e-3,
        anchor_method="c3",
    ),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings for one experiment run."""

    experiment: str
    seeds: int
    K_values: tuple[int, ...]
    lambda_values: tuple[float, ...]
    rho_values: tuple[float, ...]
    methods: tuple[str, ...]
    N: int
    ridge_lambda: float
    anchor_method: str
    master_seed: int = 1729
    workers: int = 1
    A: int = 4
    sigma: float = 0.5
    L: int = 64
    M: int = 4
    eta: float = 0.3
    clip_eps: float = 0.2
    M_c3: int = 2
    is_clip: float = 5.0
    anchor_iterations: int = 25
    record_traces: bool = False
    n_instances: int = 100
    reps: int = 2000


_TUPLE_FIELDS = {
    "K_values": int,
    "lambda_values": float,
    "rho_values": float,
    "methods": str,
}
_FIELD_TYPES = {
    f.name: f.type for f in dataclasses.fields(ExperimentConfig)
}


def _coerce(name: str, value):
    if name in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{name} must be a list, got {value!r}")
        elem = _TUPLE_FIELDS[name]
        return tuple(elem(v) for v in value)
    if name in ("seeds", "master_seed", "workers", "N", "L", "M", "M_c3",
                "anchor_iterations", "A", "n_instances", "reps"):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigurationError(f"{name} must be an integer, got {value!r}")
        return int(value)
    if name in ("sigma", "eta", "clip_eps", "ridge_lambda", "is_clip"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{name} must be a number, got {value!r}")
        return float(value)
    if name == "record_traces":
        if not isinstance(value, bool):
            raise ConfigurationError(f"record_traces must be a boolean, got {value!r}")
        return value
    if name in ("experiment", "anchor_method"):
        return str(value)
    raise ConfigurationError(f"unknown configuration key {name!r}")


def build_config(
    experiment: str,
    file_values: dict | None = None,
    overrides: dict | None = None,
    cli_values: dict | None = None,
) -> tuple[ExperimentConfig, list[str]]:
    """Merge defaults, config file, --override pairs, and CLI flags.

    Later sources win. Unknown keys are rejected outright; soft
    precondition problems become warnings that are returned for the
    config echo and printed, with execution proceeding.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigurationError(
            f"unknown experiment {experiment!r}, expected one of {EXPERIMENTS}"
        )
    values: dict = dict(_DEFAULTS[experiment])
    values["experiment"] = experiment
    valid = set(_FIELD_TYPES)
    for source, label in ((file_values, "config file"), (overrides, "override"),
                          (cli_values, "command line")):
        if not source:
            continue
        for key, raw in source.items():
            if key not in valid:
                raise ConfigurationError(f"unknown key {key!r} in {label}")
            if key == "experiment" and str(raw) != experiment:
                raise ConfigurationError(
                    f"config file names experiment {raw!r} but {experiment!r} was requested"
                )
            values[key] = _coerce(key, raw)

    cfg = ExperimentConfig(**values)
    warnings_list: list[str] = []
    if cfg.seeds < 1:
        raise ConfigurationError(f"seeds must be >= 1, got {cfg.seeds}")
    if cfg.workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {cfg.workers}")
    if cfg.A < 2:
        raise ConfigurationError(f"A must be >= 2, got {cfg.A}")
    bad = [m for m in cfg.methods if m not in METHODS]
    if bad:
        raise ConfigurationError(f"unknown methods {bad}, expected subset of {METHODS}")
    if cfg.anchor_method not in METHODS:
        raise ConfigurationError(f"unknown anchor_method {cfg.anchor_method!r}")
    if experiment != "theory-check":
        for name in ("K_values", "lambda_values", "rho_values", "methods"):
            if not getattr(cfg, name):
                raise ConfigurationError(f"{name} must be non-empty for {experiment}")
        if any(k < 1 for k in cfg.K_values):
            raise ConfigurationError(f"K_values must be positive, got {cfg.K_values}")
    if cfg.seeds < 2 and experiment != "theory-check":
        warnings_list.append(
            f"seeds={cfg.seeds}: standard errors over seeds are undefined; proceeding"
        )
    if experiment in ("optim", "ablation") and cfg.anchor_method not in (
        cfg.methods if cfg.methods else (cfg.anchor_method,)
    ):
        warnings_list.append(
            f"anchor_method {cfg.anchor_method!r} is not among the methods being run; "
            "budgets still follow its per-iteration cost"
        )
    if any(lam < 0 for lam in cfg.lambda_values):
        warnings_list.append("negative interaction weights are outside the studied range")
    if experiment.startswith("mse") and any(r != 0.0 for r in cfg.rho_values):
        warnings_list.append(
            "estimation-quality protocol is defined at rho=0; nonzero rho proceeds as asked"
        )
    return cfg, warnings_list


def _row(cfg, *, K, lam, rho, method, agent, seed, metric, value) -> dict:
    return {
        "experiment": cfg.experiment,
        "K": K,
        "lambda_int": lam,
        "rho": rho,
        "method": method,
        "agent": agent,
        "seed": seed,
        "metric": metric,
        "value": float(value),
    }


def _mse_task(cfg: ExperimentConfig, K: int, lam: float, seed: int) -> list[dict]:
    """Single-batch estimation-quality comparison on one instance.

    All estimators score the same batch. The ratio-reweighted baseline
    is evaluated after one fitted-advantage update pass, since its
    ratios are identically one until upstream agents have moved; ground
    truth conditions on realized prefixes and is unaffected by those
    updates.
    """
    A = cfg.A
    model = sample_reward_model(
        derive_seed(cfg.master_seed, cfg.experiment, "model", K, seed),
        K, A, lam, cfg.sigma,
    )
    policy = init_policy(
        derive_seed(cfg.master_seed, cfg.experiment, "policy", K, seed), K, A, 0.0
    )
    batch_rng = derive_rng(cfg.master_seed, cfg.experiment, "batch", K, lam, seed)
    batch = collect_rollouts(model, policy, cfg.N, batch_rng)
    fit = fit_batch(batch, K, A, cfg.ridge_lambda)

    truth = np.empty((cfg.N, K))
    base_cache: dict = {}
    for k in range(K):
        for n in range(cfg.N):
            prefix = tuple(int(x) for x in batch.actions[n, :k])
            key = (k, prefix)
            if key not in base_cache:
                base_cache[key] = exact_conditional_mean(model, policy, prefix, None)
            truth[n, k] = (
                exact_conditional_mean(model, policy, prefix, int(batch.actions[n, k]))
                - base_cache[key]
            )

    estimates: dict[str, np.ndarray] = {}
    for method in cfg.methods:
        if method == "capo":
            est = np.stack(
                [capo_exact_batch(fit, policy, batch, k) for k in range(K)], axis=1
            )
        elif method == "capo_direct":
            est = np.stack(
                [capo_direct(fit, policy, batch, k) for k in range(K)], axis=1
            )
        elif method == "magrpo":
            est = np.tile(magrpo(batch)[:, None], (1, K))
        elif method == "c3":
            c3_rng = derive_rng(cfg.master_seed, cfg.experiment, "c3", K, lam, seed)
            meter = EnvCallMeter(None)
            est = np.stack(
                [
                    c3(model, policy, batch, k, cfg.M_c3, c3_rng, meter)
                    for k in range(K)
                ],
                axis=1,
            )
        elif method == "hagrpo":
            # simulate one sequential update pass: each agent moves on the
            # fitted advantage under the partially updated policy, exactly
            # as the training loop would, before its estimate is scored
            current = policy
            updated = []
            for k in range(K):
                adv = capo_exact_batch(fit, current, batch, k)
                current = ppo_update(
                    current, k, batch, adv, cfg.M, cfg.eta, cfg.clip_eps
                )
                updated.append(current)
            est = np.stack(
                [hagrpo(batch, updated, k, cfg.is_clip) for k in range(K)], axis=1
            )
        estimates[method] = est

    rows = []
    for method, est in estimates.items():
        per_agent = ((est - truth) ** 2).mean(axis=0)
        for k in range(K):
            rows.append(
                _row(cfg, K=K, lam=lam, rho=0.0, method=method, agent=k + 1,
                     seed=seed, metric="mse", value=per_agent[k])
            )
        rows.append(
            _row(cfg, K=K, lam=lam, rho=0.0, method=method, agent=None,
                 seed=seed, metric="mse_avg", value=per_agent.mean())
        )
    return rows


def _train_task(cfg: ExperimentConfig, K: int, lam: float, seed: int) -> list[dict]:
    """All (rho, method) training runs on one shared reward instance."""
    A = cfg.A
    model = sample_reward_model(
        derive_seed(cfg.master_seed, cfg.experiment, "model", K, seed),
        K, A, lam, cfg.sigma,
    )
    value_cache = (optimal_value(model), uniform_value(model))
    anchor = TrainConfig(method=cfg.anchor_method, N=cfg.N, M_c3=cfg.M_c3)
    budget = cfg.anchor_iterations * anchor.iteration_cost(K)
    rows = []
    for rho in cfg.rho_values:
        policy0 = init_policy(
            derive_seed(cfg.master_seed, cfg.experiment, "policy", K, seed), K, A, rho
        )
        for method in cfg.methods:
            tc = TrainConfig(
                method=method, N=cfg.N, L=cfg.L, M=cfg.M, eta=cfg.eta,
                clip_eps=cfg.clip_eps, ridge_lambda=cfg.ridge_lambda,
                M_c3=cfg.M_c3, is_clip=cfg.is_clip,
            )
            rng = derive_rng(
                cfg.master_seed, cfg.experiment, "run", K, lam, rho, method, seed
            )
            trace = run_method(method, model, policy0, budget, tc, rng, value_cache)
            rows.append(
                _row(cfg, K=K, lam=lam, rho=rho, method=method, agent=None,
                     seed=seed, metric="auc", value=regret_auc(trace))
            )
            if cfg.record_traces:
                for t, reg in enumerate(trace.regrets):
                    rows.append(
                        _row(cfg, K=K, lam=lam, rho=rho, method=method, agent=None,
                             seed=seed, metric=f"regret@{t + 1:04d}", value=reg)
                    )
    return rows


def _run_task(args) -> tuple[list[dict], list[str]]:
    cfg, task = args
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if cfg.experiment in ("mse-vs-k", "mse-vs-lambda"):
            rows = _mse_task(cfg, *task)
        else:
            rows = _train_task(cfg, *task)
    return rows, sorted({str(w.message) for w in caught})


def _theory_rows(cfg: ExperimentConfig) -> tuple[list[dict], bool, list[str]]:
    results = run_all_checks(cfg.n_instances, cfg.master_seed, cfg.reps)
    rows = []
    for res in results:
        for metric, value in (
            ("margin", res.margin),
            ("passed", 1.0 if res.passed else 0.0),
            ("n_cases", float(res.n_cases)),
        ):
            rows.append(
                _row(cfg, K=None, lam=None, rho=None, method=res.name, agent=None,
                     seed=None, metric=metric, value=value)
            )
    lines = [str(res) for res in results]
    return rows, all(res.passed for res in results), lines


def _task_grid(cfg: ExperimentConfig) -> list[tuple]:
    return [
        (K, lam, seed)
        for K in cfg.K_values
        for lam in cfg.lambda_values
        for seed in range(cfg.seeds)
    ]


def _sort_key(row: dict):
    return (
        row["experiment"],
        -1 if row["K"] is None else int(row["K"]),
        -1.0 if row["lambda_int"] is None else float(row["lambda_int"]),
        -1.0 if row["rho"] is None else float(row["rho"]),
        row["method"],
        -1 if row["agent"] is None else int(row["agent"]),
        -1 if row["seed"] is None else int(row["seed"]),
        row["metric"],
    )


def _format_cell(name: str, value) -> str:
    if value is None:
        return ""
    if name in ("K", "agent", "seed"):
        return str(int(value))
    if name in ("lambda_int", "rho", "value"):
        return repr(float(value))
    return str(value)


def write_results_csv(path: Path, rows: list[dict]) -> None:
    """Canonically ordered, RFC-4180 formatted results table."""
    ordered = sorted(rows, key=_sort_key)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in ordered:
            writer.writerow([_format_cell(c, row[c]) for c in CSV_COLUMNS])


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if values.size < 2:
        return mean, float("nan")
    return mean, float(values.std(ddof=1) / np.sqrt(values.size))


def _summary_text(cfg: ExperimentConfig, rows: list[dict], elapsed: float,
                  extra_lines: list[str] | None = None) -> str:
    lines = [f"# {cfg.experiment}", ""]
    lines.append(f"- master seed: {cfg.master_seed}")
    lines.append(f"- seeds per cell: {cfg.seeds}")
    lines.append(f"- wall time: {elapsed:.1f} s with {cfg.workers} worker(s)")
    lines.append("")
    if cfg.experiment == "theory-check":
        lines.append("## Checks")
        lines.append("")
        lines.extend(extra_lines or [])
        lines.append("")
        return "\n".join(lines)

    metric = "mse_avg" if cfg.experiment.startswith("mse") else "auc"
    axis = "lambda_int" if cfg.experiment == "mse-vs-lambda" else "K"
    lines.append(f"## Mean {metric} by {axis} and method")
    lines.append("")
    axis_values = sorted({row[axis] for row in rows if row["metric"] == metric})
    methods = sorted({row["method"] for row in rows if row["metric"] == metric})
    header = [axis] + [str(m) for m in methods]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for av in axis_values:
        cells = [str(av)]
        for m in methods:
            vals = np.array(
                [
                    row["value"]
                    for row in rows
                    if row["metric"] == metric and row[axis] == av and row["method"] == m
                ]
            )
            mean, se = _mean_se(vals)
            cells.append(f"{mean:.4g} ± {se:.2g}")
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    return "\n".join(lines)


def run_experiment(
    cfg: ExperimentConfig, out_root: str | Path, config_warnings: list[str] | None = None
) -> Path:
    """Execute the experiment and write results.csv, summary.md, config.echo.json.

    Returns the experiment output directory. A failed theory check
    raises after all output files are written, so artifacts are always
    inspectable.
    """
    out_dir = Path(out_root) / cfg.experiment
    out_dir.mkdir(parents=True, exist_ok=True)
    all_warnings = list(config_warnings or [])
    t0 = time.perf_counter()

    failed_checks = False
    extra_lines: list[str] | None = None
    if cfg.experiment == "theory-check":
        rows, ok, extra_lines = _theory_rows(cfg)
        failed_checks = not ok
        for line in extra_lines:
            print(line)
    else:
        tasks = _task_grid(cfg)
        payload = [(cfg, task) for task in tasks]
        if cfg.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                chunk = max(1, len(tasks) // (cfg.workers * 4))
                outputs = list(pool.map(_run_task, payload, chunksize=chunk))
        else:
            outputs = [_run_task(p) for p in payload]
        rows = [row for out, _ in outputs for row in out]
        for _, warns in outputs:
            all_warnings.extend(warns)

    elapsed = time.perf_counter() - t0
    write_results_csv(out_dir / "results.csv", rows)
    echo = dataclasses.asdict(cfg)
    echo["warnings"] = sorted(set(all_warnings))
    echo["version"] = __version__
    with open(out_dir / "config.echo.json", "w") as handle:
        json.dump(echo, handle, indent=2, sort_keys=True)
        handle.write("\n")
    summary = _summary_text(cfg, rows, elapsed, extra_lines)
    for warning in sorted(set(all_warnings)):
        summary += f"\n> warning: {warning}"
    if all_warnings:
        summary += "\n"
    with open(out_dir / "summary.md", "w") as handle:
        handle.write(summary)

    if failed_checks:
        raise TheoryCheckFailure(
            f"one or more checks failed; see {out_dir / 'summary.md'}"
        )
    return out_dir
