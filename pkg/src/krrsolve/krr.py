"""Problem-level drivers: assemble and solve the two regression systems.

Full-data problem: (A + mu I) beta = y, solved matrix-free with a
partial-Cholesky Nystrom preconditioner built by the configured pivot rule.

Restricted problem: [A(S,:) A(:,S) + mu A(S,S)] beta = A(S,:) y over k
selected centers.  The rectangular kernel products stream over row blocks
of A(:,S); when the N x k block fits inside the oracle's memory budget it
is materialized once instead, which is what the streaming path would keep
regenerating.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError
from .kernels import KernelOracle, KernelSpec, pairwise_kernel
from .lowrank import (
    PartialCholeskyFactor,
    default_block_size,
    greedy_cholesky,
    rpcholesky,
    uniform_nystrom,
)
from .pcg import LinearOperator, SolveReport, pcg
from .precond import (
    IdentityPreconditioner,
    build_falkon,
    build_krill,
    build_rpc_preconditioner,
    krill_from_sketch,
)
from .sketch import build_embedding, practical_params

RPCHOLESKY = "rpcholesky"
GREEDY = "greedy"
UNIFORM = "uniform"

KRILL = "krill"
FALKON = "falkon"
NO_PRECONDITIONER = "none"


@dataclass(frozen=True)
class PivotRule:
    """Pivot selection strategy for the low-rank factor."""

    kind: str = RPCHOLESKY
    block_size: Optional[int] = None  # random rule only; None = min(100, r/10)
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (RPCHOLESKY, GREEDY, UNIFORM):
            raise InputError(f"unknown pivot rule {self.kind!r}")
        if self.block_size is not None and self.block_size < 1:
            raise InputError("block size must be >= 1")


def build_factor(oracle: KernelOracle, rank: int, rule: PivotRule) -> PartialCholeskyFactor:
    if rule.kind == RPCHOLESKY:
        block = rule.block_size or default_block_size(rank)
        return rpcholesky(oracle, rank, block, seed=rule.seed)
    if rule.kind == GREEDY:
        return greedy_cholesky(oracle, rank)
    return uniform_nystrom(oracle, rank, seed=rule.seed)


@dataclass
class FullKrrProblem:
    oracle: KernelOracle
    y: np.ndarray
    mu: float
    rank: int
    epsilon: float = 1e-3
    pivot_rule: PivotRule = field(default_factory=PivotRule)
    max_iter: int = 250

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.mu <= 0:
            raise InputError("mu must be positive")
        if not 1 <= self.rank <= self.oracle.n:
            raise InputError(f"rank must be in [1, {self.oracle.n}]")
        if self.y.shape[0] != self.oracle.n:
            raise InputError("target length does not match oracle size")


def solve_full_krr(problem: FullKrrProblem) -> SolveReport:
    """Preconditioned CG on (A + mu I) beta = y."""
    oracle, mu = problem.oracle, problem.mu
    t0 = time.perf_counter()
    factor = build_factor(oracle, problem.rank, problem.pivot_rule)
    pre = build_rpc_preconditioner(factor, mu)
    build_time = time.perf_counter() - t0

    op = LinearOperator(oracle.n, lambda v: oracle.matvec(v) + mu * v)
    report = pcg(op, problem.y, problem.epsilon, pre.apply_inverse,
                 max_iter=problem.max_iter)
    report.meta.update(
        mode="full",
        pivot_rule=problem.pivot_rule.kind,
        factor_rank=factor.rank,
        preconditioner_build_time=build_time,
    )
    return report


@dataclass
class RestrictedKrrProblem:
    oracle: KernelOracle
    centers: np.ndarray
    y: np.ndarray
    mu: float
    epsilon: float = 1e-4
    preconditioner: str = KRILL
    embedding_dim: Optional[int] = None  # default 2k
    embedding_nnz: Optional[int] = None  # default min(8, 2k)
    embedding_seed: Optional[int] = None
    max_iter: int = 100

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.int64).ravel()
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        n = self.oracle.n
        if self.centers.size < 1 or self.centers.size > n:
            raise InputError("need between 1 and N centers")
        if len(np.unique(self.centers)) != self.centers.size:
            raise InputError("centers must be distinct")
        if self.centers.min() < 0 or self.centers.max() >= n:
            raise InputError("center index out of range")
        if self.mu <= 0:
            raise InputError("mu must be positive")
        if self.y.shape[0] != n:
            raise InputError("target length does not match oracle size")
        if self.preconditioner not in (KRILL, FALKON, NO_PRECONDITIONER):
            raise InputError(f"unknown preconditioner {self.preconditioner!r}")


class _RestrictedOperator:
    """Streaming access to the k-dimensional restricted system.

    Fuses the two rectangular products per row block:
    A(S,:) A(:,S) v = sum_blocks A(I,S)^T (A(I,S) v).
    """

    def __init__(self, oracle: KernelOracle, centers: np.ndarray):
        self.oracle = oracle
        self.centers = centers
        self.k = centers.size
        self._cols = None
        budget = oracle._budget_bytes()
        if 8 * oracle.n * self.k <= budget:
            self._cols = oracle.columns(centers)
        # row blocks sized so each A(I,S) slab stays inside the budget
        self._rows_per_block = max(1, int(budget // (8 * self.k)))

    def _row_blocks(self):
        for start in range(0, self.oracle.n, self._rows_per_block):
            stop = min(start + self._rows_per_block, self.oracle.n)
            if self._cols is not None:
                yield self._cols[start:stop]
            else:
                yield self.oracle.block(np.arange(start, stop), self.centers)

    def gram_apply(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.k)
        for blk in self._row_blocks():
            out += blk.T @ (blk @ v)
        return out

    def right_hand_side(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(self.k)
        start = 0
        for blk in self._row_blocks():
            out += blk.T @ y[start:start + blk.shape[0]]
            start += blk.shape[0]
        return out

    def sketch(self, phi) -> np.ndarray:
        """Y = Phi A(:,S) accumulated over row blocks of A(:,S)."""
        mat = phi.matrix().tocsc()
        out = np.zeros((phi.d, self.k))
        start = 0
        for blk in self._row_blocks():
            out += mat[:, start:start + blk.shape[0]] @ blk
            start += blk.shape[0]
        return out


def solve_restricted_krr(problem: RestrictedKrrProblem) -> SolveReport:
    """Preconditioned CG on the restricted system over the chosen centers."""
    oracle, centers, mu = problem.oracle, problem.centers, problem.mu
    k = centers.size
    t0 = time.perf_counter()
    stream = _RestrictedOperator(oracle, centers)
    a_ss = oracle.block(centers, centers)
    a_ss = 0.5 * (a_ss + a_ss.T)

    if problem.preconditioner == KRILL:
        d_def, zeta_def = practical_params(k)
        d = problem.embedding_dim or d_def
        zeta = problem.embedding_nnz or zeta_def
        phi = build_embedding(d, oracle.n, zeta, seed=problem.embedding_seed)
        pre = krill_from_sketch(stream.sketch(phi), a_ss, mu)
    elif problem.preconditioner == FALKON:
        pre = build_falkon(a_ss, k, oracle.n, mu)
    else:
        pre = IdentityPreconditioner()
    build_time = time.perf_counter() - t0

    op = LinearOperator(k, lambda v: stream.gram_apply(v) + mu * (a_ss @ v))
    b = stream.right_hand_side(problem.y)
    report = pcg(op, b, problem.epsilon, pre.apply_inverse,
                 max_iter=problem.max_iter)
    report.meta.update(
        mode="restricted",
        preconditioner=problem.preconditioner,
        centers=k,
        preconditioner_build_time=build_time,
    )
    return report


def select_centers_uniform(n: int, k: int, seed=None) -> np.ndarray:
    """k distinct indices drawn uniformly without replacement."""
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= {n}, got {k}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=k, replace=False))


def predict(coefficients: np.ndarray, train_points: np.ndarray, spec: KernelSpec,
            test_points: np.ndarray, memory_budget: int = 1 << 30) -> np.ndarray:
    """Kernel expansion sum_i beta_i K(x_i, x) over blocked test rows."""
    coefficients = np.asarray(coefficients, dtype=np.float64).ravel()
    train_points = np.atleast_2d(np.asarray(train_points, dtype=np.float64))
    test_points = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    if coefficients.shape[0] != train_points.shape[0]:
        raise InputError("coefficient length does not match training points")
    block = max(1, int(memory_budget // (8 * train_points.shape[0])))
    out = np.empty(test_points.shape[0])
    for start in range(0, test_points.shape[0], block):
        stop = min(start + block, test_points.shape[0])
        out[start:stop] = pairwise_kernel(
            spec, test_points[start:stop], train_points) @ coefficients
    return out


def smape(predicted: np.ndarray, actual: np.ndarray) -> float:
    """Symmetric mean absolute percentage error; 0/0 terms contribute 0."""
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if predicted.shape != actual.shape or predicted.size == 0:
        raise InputError("predictions and actuals must be equal nonempty lengths")
    denom = 0.5 * (np.abs(predicted) + np.abs(actual))
    terms = np.zeros_like(denom)
    mask = denom > 0
    terms[mask] = np.abs(predicted[mask] - actual[mask]) / denom[mask]
    return float(terms.mean())
