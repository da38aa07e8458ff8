"""Randomized-preconditioned solvers for kernel ridge regression.

The library solves the full-data system (A + mu I) beta = y and the
restricted system [A(S,:) A(:,S) + mu A(S,S)] beta = A(S,:) y without ever
materializing the N x N kernel matrix, using preconditioned conjugate
gradient with randomized Nystrom and sketched-Gram preconditioners.
"""

from .data import Dataset, load_csv, load_dataset, load_libsvm, standardize
from .diagnostics import (
    build_greedy_failure_matrix,
    build_uniform_failure_matrix,
    clustered_dataset,
    guarantee_rank,
    psd_matrix_with_spectrum,
    separation_experiment,
    verify_krill_theorem,
    verify_rpc_theorem,
)
from .errors import ConvergenceError, InputError, KrrSolveError, NumericalError
from .harness import run_batch, run_experiment, split_train_test, test_error
from .kernels import (
    DatasetKernelOracle,
    ExplicitMatrixOracle,
    KernelOracle,
    KernelSpec,
    eval_kernel,
    kernel_columns,
    kernel_diag,
    pairwise_kernel,
)
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
from .lowrank import (
    PartialCholeskyFactor,
    greedy_cholesky,
    load_factor,
    rpcholesky,
    save_factor,
    tail_rank,
    trace_residual,
    uniform_nystrom,
)
from .pcg import LinearOperator, SolveReport, pcg
from .precond import (
    FalkonPreconditioner,
    IdentityPreconditioner,
    KrillPreconditioner,
    RpcPreconditioner,
    apply_rpc_inverse,
    apply_triangular_inverse,
    build_falkon,
    build_krill,
    build_rpc_preconditioner,
    krill_from_sketch,
    precond_condition_number,
)
from .sketch import (
    SparseSignEmbedding,
    apply_embedding,
    build_embedding,
    distortion_check,
    practical_params,
    theory_params,
)

__version__ = "0.1.0"
