"""Command-line front end.

Subcommands:

* ``solve-full``        one full-data run from a config file (or flags)
* ``solve-restricted``  one restricted run
* ``bench``             batch over a directory of ``*.cfg`` files
* ``adversarial``       failure-mode separation suite on the adversarial matrices
* ``verify-theorems``   conditioning-guarantee Monte Carlo experiments

Exit codes: 0 success, 1 config or I/O error, 2 solver non-convergence,
3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config, parse_config_text
from .diagnostics import separation_experiment, verify_krill_theorem, verify_rpc_theorem
from .errors import InputError, NumericalError
from .harness import run_batch, run_experiment

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_NUMERICAL = 3


def _add_solve_flags(parser, mode):
    parser.add_argument("--config", help="config file; flags below override it")
    parser.add_argument("--dataset")
    parser.add_argument("--format", choices=["libsvm", "csv"])
    parser.add_argument("--target-column")
    parser.add_argument("--task", choices=["regression", "classification"])
    parser.add_argument("--subsample", type=int)
    parser.add_argument("--seed", type=int, help="rng seed (required unless set in config)")
    parser.add_argument("--kernel", choices=["squared_exponential", "laplace1"])
    parser.add_argument("--bandwidth", type=float)
    parser.add_argument("--mu-over-n", type=float, dest="mu_over_n")
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--max-iter", type=int, dest="max_iter")
    parser.add_argument("--memory-budget-bytes", type=int, dest="memory_budget_bytes")
    parser.add_argument("--test-fraction", type=float, dest="test_fraction")
    parser.add_argument("--center-targets", action="store_true", default=None,
                        dest="center_targets")
    parser.add_argument("--output-dir", dest="output_dir")
    if mode == "full":
        parser.add_argument("--pivot-rule", choices=["rpcholesky", "greedy", "uniform"],
                            dest="pivot_rule")
        parser.add_argument("--rank", type=int)
        parser.add_argument("--block-size", type=int, dest="block_size")
    else:
        parser.add_argument("--preconditioner", choices=["krill", "falkon", "none"])
        parser.add_argument("--centers", type=int)
        parser.add_argument("--embedding-dim", type=int, dest="embedding_dim")
        parser.add_argument("--embedding-nnz", type=int, dest="embedding_nnz")


_CONFIG_KEYS = ["dataset", "format", "target_column", "task", "subsample", "seed",
                "kernel", "bandwidth", "mu_over_n", "epsilon", "max_iter",
                "memory_budget_bytes", "test_fraction", "center_targets",
                "output_dir", "pivot_rule", "rank", "block_size",
                "preconditioner", "centers", "embedding_dim", "embedding_nnz"]


def _config_from_args(args, mode):
    if args.config:
        config = load_config(args.config)
    else:
        config = parse_config_text("", source="<flags>")  # defaults only
    config.mode = mode
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    if config.seed is None:
        raise InputError("--seed is required (stochastic command)")
    config.validate()
    return config


def _cmd_solve(args, mode):
    config = _config_from_args(args, mode)
    summary = run_experiment(config)
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK if summary["converged"] else EXIT_NOT_CONVERGED


def _cmd_bench(args):
    result = run_batch(args.config_dir, workers=args.workers)
    n_fail = sum(1 for s in result["runs"].values() if not s["converged"])
    print(json.dumps({
        "runs": len(result["runs"]),
        "not_converged": n_fail,
        "fraction_solved_csv": result["fraction_solved_csv"],
    }, indent=2))
    return EXIT_OK if n_fail == 0 else EXIT_NOT_CONVERGED


def _cmd_adversarial(args):
    reports = [
        separation_experiment("uniform", n=args.n, rank=args.rank,
                              n_seeds=args.n_seeds, seed0=args.seed),
        separation_experiment("greedy", n=args.n, rank=args.rank,
                              delta=args.delta, n_seeds=args.n_seeds,
                              seed0=args.seed),
    ]
    _emit_reports(reports, args.output)
    return EXIT_OK if all(r["separated"] for r in reports) else EXIT_NOT_CONVERGED


def _cmd_verify(args):
    import numpy as np

    spectrum = 2.0 ** -np.arange(1, args.n + 1)
    reports = [
        verify_rpc_theorem(spectrum, mu=args.mu, delta=args.delta,
                           n_seeds=args.n_seeds, seed0=args.seed),
        verify_krill_theorem(n=args.n_data, k=args.k, mu=args.mu,
                             n_seeds=min(args.n_seeds, 100), seed0=args.seed),
    ]
    _emit_reports(reports, args.output)
    ok = (reports[0]["event_fraction"] >= 1.0 - args.delta - 0.05
          and reports[1]["conditional_violations"] == 0)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _emit_reports(reports, output):
    if output:
        os.makedirs(os.path.dirname(output) or ".", exist_ok=True)
        with open(output, "w") as fh:
            json.dump(reports, fh, indent=2)
            fh.write("\n")
    summaries = [{k: v for k, v in rep.items() if k != "records"} for rep in reports]
    print(json.dumps(summaries, indent=2))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="krrsolve",
        description="Randomized-preconditioned solvers for kernel ridge regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_full = sub.add_parser("solve-full", help="solve a full-data problem")
    _add_solve_flags(p_full, "full")
    p_rest = sub.add_parser("solve-restricted", help="solve a restricted problem")
    _add_solve_flags(p_rest, "restricted")

    p_bench = sub.add_parser("bench", help="run a directory of configs")
    p_bench.add_argument("config_dir")
    p_bench.add_argument("--workers", type=int, default=1)

    p_adv = sub.add_parser("adversarial", help="failure-mode separation suite")
    p_adv.add_argument("--seed", type=int, required=True)
    p_adv.add_argument("--n", type=int, default=1000)
    p_adv.add_argument("--rank", type=int, default=10)
    p_adv.add_argument("--delta", type=float, default=1e-3)
    p_adv.add_argument("--n-seeds", type=int, default=50, dest="n_seeds")
    p_adv.add_argument("--output", help="write full JSON records here")

    p_ver = sub.add_parser("verify-theorems", help="conditioning-guarantee experiments")
    p_ver.add_argument("--seed", type=int, required=True)
    p_ver.add_argument("--n", type=int, default=200, help="spectrum length")
    p_ver.add_argument("--mu", type=float, default=1e-3)
    p_ver.add_argument("--delta", type=float, default=0.1)
    p_ver.add_argument("--n-data", type=int, default=2000, dest="n_data")
    p_ver.add_argument("--k", type=int, default=50)
    p_ver.add_argument("--n-seeds", type=int, default=200, dest="n_seeds")
    p_ver.add_argument("--output", help="write full JSON records here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve-full":
            return _cmd_solve(args, "full")
        if args.command == "solve-restricted":
            return _cmd_solve(args, "restricted")
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "adversarial":
            return _cmd_adversarial(args)
        if args.command == "verify-theorems":
            return _cmd_verify(args)
        parser.error(f"unknown command {args.command!r}")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
