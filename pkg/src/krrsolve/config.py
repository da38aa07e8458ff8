"""Experiment configuration: a flat key = value text format.

Example::

    # full-data run at protocol defaults
    dataset = data/ijcnn1.txt
    format = libsvm
    mode = full
    pivot_rule = rpcholesky
    rank = 200
    seed = 7
    output_dir = results/run1

Lines starting with '#' and blank lines are ignored.  Unknown keys are hard
errors so that protocol drift never passes silently.  Defaults follow the
standard protocol: bandwidth 3, mu/N = 1e-7, and per mode either
(epsilon 1e-3, 250 iterations) for full or (epsilon 1e-4, 100 iterations,
d = 2k, zeta = min(8, 2k)) for restricted runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import InputError

FULL = "full"
RESTRICTED = "restricted"


@dataclass
class ExperimentConfig:
    dataset: str = ""
    format: str = "libsvm"  # libsvm | csv
    target_column: Optional[str] = None
    task: str = "regression"  # regression | classification
    subsample: int = 0  # 0 = use everything
    seed: Optional[int] = None
    kernel: str = "squared_exponential"
    bandwidth: float = 3.0
    mu_over_n: float = 1e-7
    mode: str = FULL
    pivot_rule: str = "rpcholesky"
    rank: int = 0
    block_size: int = 0  # 0 = min(100, rank/10)
    preconditioner: str = "krill"
    centers: int = 0
    embedding_dim: int = 0  # 0 = 2k
    embedding_nnz: int = 0  # 0 = min(8, 2k)
    epsilon: float = 0.0  # 0 = mode default
    max_iter: int = 0  # 0 = mode default
    memory_budget_bytes: int = 1 << 30
    test_fraction: float = 0.0
    center_targets: bool = False
    output_dir: str = "."

    def validate(self):
        """Check cross-field consistency; fields may be assembled piecemeal
        (config file plus flag overrides) before this runs."""
        if self.format not in ("libsvm", "csv"):
            raise InputError(f"format must be libsvm or csv, got {self.format!r}")
        if self.task not in ("regression", "classification"):
            raise InputError(f"unknown task {self.task!r}")
        if self.mode not in (FULL, RESTRICTED):
            raise InputError(f"mode must be full or restricted, got {self.mode!r}")
        if self.kernel not in ("squared_exponential", "laplace1"):
            raise InputError(f"unknown kernel {self.kernel!r}")
        if self.bandwidth <= 0:
            raise InputError("bandwidth must be positive")
        if self.mu_over_n <= 0:
            raise InputError("mu_over_n must be positive")
        if self.subsample < 0 or self.rank < 0 or self.centers < 0:
            raise InputError("counts must be nonnegative")
        if not 0.0 <= self.test_fraction < 1.0:
            raise InputError("test_fraction must lie in [0, 1)")
        if self.memory_budget_bytes <= 0:
            raise InputError("memory budget must be positive")
        if self.mode == FULL and self.rank < 1:
            raise InputError("full mode requires rank >= 1")
        if self.mode == RESTRICTED and self.centers < 1:
            raise InputError("restricted mode requires centers >= 1")
        if self.pivot_rule not in ("rpcholesky", "greedy", "uniform"):
            raise InputError(f"unknown pivot rule {self.pivot_rule!r}")
        if self.preconditioner not in ("krill", "falkon", "none"):
            raise InputError(f"unknown preconditioner {self.preconditioner!r}")

    @property
    def effective_epsilon(self) -> float:
        if self.epsilon > 0:
            return self.epsilon
        return 1e-3 if self.mode == FULL else 1e-4

    @property
    def effective_max_iter(self) -> int:
        if self.max_iter > 0:
            return self.max_iter
        return 250 if self.mode == FULL else 100


_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False,
               "1": True, "0": False}


def _coerce(name: str, text: str, typ):
    text = text.strip()
    if typ is bool:
        try:
            return _BOOL_WORDS[text.lower()]
        except KeyError:
            raise InputError(f"key {name}: expected a boolean, got {text!r}") from None
    try:
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
    except ValueError:
        raise InputError(f"key {name}: expected {typ.__name__}, got {text!r}") from None
    return text


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    known = {f.name: f for f in fields(ExperimentConfig)}
    types = {"dataset": str, "format": str, "target_column": str, "task": str,
             "subsample": int, "seed": int, "kernel": str, "bandwidth": float,
             "mu_over_n": float, "mode": str, "pivot_rule": str, "rank": int,
             "block_size": int, "preconditioner": str, "centers": int,
             "embedding_dim": int, "embedding_nnz": int, "epsilon": float,
             "max_iter": int, "memory_budget_bytes": int,
             "test_fraction": float, "center_targets": bool, "output_dir": str}
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{line_no}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in known:
            raise InputError(f"{source}:{line_no}: unknown key {key!r}")
        if key in values:
            raise InputError(f"{source}:{line_no}: duplicate key {key!r}")
        values[key] = _coerce(key, val, types[key])
    return ExperimentConfig(**values)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, source=path)
