"""Benchmark harness: run configured experiments and write result artifacts.

Each run produces, inside the configured output directory:

* ``residuals.csv``  -- iteration, relative_residual
* ``summary.json``   -- convergence flag, iteration counts, timings, and
  test metrics when a test split is configured.

Batch mode runs a directory of configs (in parallel up to a worker limit)
and additionally writes ``fraction_solved.csv``, the fraction of runs whose
relative residual has dropped below their tolerance by each iteration.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from .config import FULL, ExperimentConfig, load_config
from .data import Dataset, apply_standardization, load_dataset, standardization_params
from .errors import InputError
from .kernels import DatasetKernelOracle, KernelSpec
from .krr import (
    FullKrrProblem,
    PivotRule,
    RestrictedKrrProblem,
    predict,
    select_centers_uniform,
    smape,
    solve_full_krr,
    solve_restricted_krr,
)


def split_train_test(data: Dataset, test_fraction: float, seed=None):
    """Disjoint, exhaustive, seed-deterministic split into (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise InputError("test_fraction must lie in (0, 1)")
    n_test = int(round(data.n * test_fraction))
    if n_test < 1 or n_test >= data.n:
        raise InputError(
            f"test_fraction {test_fraction} leaves an empty split for N={data.n}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    return data.subset(np.sort(perm[n_test:])), data.subset(np.sort(perm[:n_test]))


def test_error(predictions: np.ndarray, labels: np.ndarray, task: str) -> float:
    """SMAPE for regression; sign misclassification rate for classification."""
    predictions = np.asarray(predictions, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if predictions.shape != labels.shape:
        raise InputError("predictions and labels must have equal length")
    if task == "regression":
        return smape(predictions, labels)
    if task == "classification":
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise InputError("classification labels must be -1 or +1")
        signs = np.where(predictions >= 0, 1.0, -1.0)
        return float(np.mean(signs != labels))
    raise InputError(f"unknown task {task!r}")


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute one configured run and write its artifacts to disk."""
    config.validate()
    t_start = time.perf_counter()
    data = load_dataset(config.dataset, config.format, config.target_column)
    if data.targets is None:
        raise InputError("dataset has no targets; configure target_column")

    rng = np.random.default_rng(config.seed)
    if config.subsample and config.subsample < data.n:
        keep = np.sort(rng.choice(data.n, size=config.subsample, replace=False))
        data = data.subset(keep)

    test_set: Optional[Dataset] = None
    if config.test_fraction > 0:
        data, test_set = split_train_test(data, config.test_fraction, seed=rng)

    params = standardization_params(data.features)
    train_feats = apply_standardization(data.features, params)
    targets = data.targets
    if config.center_targets:
        shift = targets.mean()
        targets = targets - shift
    else:
        shift = 0.0

    oracle = DatasetKernelOracle(
        train_feats,
        KernelSpec(config.kernel, config.bandwidth),
        memory_budget=config.memory_budget_bytes,
    )
    mu = config.mu_over_n * oracle.n

    if config.mode == FULL:
        problem = FullKrrProblem(
            oracle, targets, mu,
            rank=min(config.rank, oracle.n),
            epsilon=config.effective_epsilon,
            pivot_rule=PivotRule(config.pivot_rule,
                                 config.block_size or None,
                                 seed=config.seed),
            max_iter=config.effective_max_iter,
        )
        report = solve_full_krr(problem)
        coeff_points = train_feats
    else:
        centers = select_centers_uniform(oracle.n, min(config.centers, oracle.n),
                                         seed=config.seed)
        problem = RestrictedKrrProblem(
            oracle, centers, targets, mu,
            epsilon=config.effective_epsilon,
            preconditioner=config.preconditioner,
            embedding_dim=config.embedding_dim or None,
            embedding_nnz=config.embedding_nnz or None,
            embedding_seed=config.seed,
            max_iter=config.effective_max_iter,
        )
        report = solve_restricted_krr(problem)
        coeff_points = train_feats[centers]

    summary = {
        "mode": config.mode,
        "n_train": int(oracle.n),
        "mu": float(mu),
        "epsilon": config.effective_epsilon,
        "converged": bool(report.converged),
        "iterations": int(report.iterations),
        "iterations_to_epsilon": report.iterations_to(config.effective_epsilon),
        "final_relative_residual": float(report.residual_history[-1]),
        "solve_time": float(report.wall_time),
        "total_time": None,  # filled below
        "seed": config.seed,
        **{k: v for k, v in report.meta.items() if not isinstance(v, np.ndarray)},
    }

    if test_set is not None:
        test_feats = apply_standardization(test_set.features, params)
        preds = predict(report.solution, coeff_points,
                        KernelSpec(config.kernel, config.bandwidth), test_feats,
                        memory_budget=config.memory_budget_bytes) + shift
        summary["test_error"] = test_error(preds, test_set.targets, config.task)
        summary["test_size"] = int(test_set.n)

    summary["total_time"] = time.perf_counter() - t_start
    _write_artifacts(config.output_dir, report.residual_history, summary)
    return summary


def _write_artifacts(out_dir: str, history: np.ndarray, summary: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "residuals.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "relative_residual"])
        for it, res in enumerate(history):
            writer.writerow([it, f"{res:.17g}"])
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_one(path: str) -> tuple[str, dict]:
    config = load_config(path)
    return path, run_experiment(config)


def run_batch(config_dir: str, workers: int = 1) -> dict:
    """Run every ``*.cfg`` file in a directory; aggregate fraction-solved."""
    paths = sorted(
        os.path.join(config_dir, name)
        for name in os.listdir(config_dir)
        if name.endswith(".cfg")
    )
    if not paths:
        raise InputError(f"no .cfg files in {config_dir}")
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for path, summary in pool.map(_run_one, paths):
                results[path] = summary
    else:
        for path in paths:
            results[path] = _run_one(path)[1]

    curves = []
    for path in paths:
        config = load_config(path)
        hist_path = os.path.join(config.output_dir, "residuals.csv")
        with open(hist_path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            hist = np.array([float(row[1]) for row in reader])
        curves.append((hist, config.effective_epsilon))

    max_len = max(len(h) for h, _ in curves)
    fractions = []
    for it in range(max_len):
        solved = sum(
            1 for hist, eps in curves
            if np.any(hist[: min(it + 1, len(hist))] < eps)
        )
        fractions.append(solved / len(curves))
    agg_path = os.path.join(config_dir, "fraction_solved.csv")
    with open(agg_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "fraction_solved"])
        for it, frac in enumerate(fractions):
            writer.writerow([it, f"{frac:.6f}"])
    return {"runs": results, "fraction_solved_csv": agg_path}
