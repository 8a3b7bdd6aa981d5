"""Q-matrix estimation for the DINA model.

The estimator searches the space of binary item-attribute matrices by
iterating three steps on random respondent subsamples: a mean-field
variational fit under the current Q-matrix, a per-item replacement of
each row by its maximum-posterior candidate pattern, and post-burn-in
averaging of the iterates. A simulation generator and recovery metrics
round out the library; the ``dinaq`` command drives everything from
CSV files.
"""

from ._kernel import BACKEND as kernel_backend
from .evaluate import (
    RecoveryReport,
    align_columns,
    align_columns_greedy,
    mean_recovery,
    negative_elbo_fit,
    recovery_rate,
)
from .model import (
    CapacityError,
    ItemParams,
    PatternTable,
    ProfileLattice,
    QMatrix,
    ResponseMatrix,
    enumerate_profiles,
    ideal_response,
    ideal_response_matrix,
    ideal_table,
    pattern_table,
)
from .search import (
    IterationRecord,
    RunResult,
    SearchConfig,
    estimate,
    full_elbo_trace,
    iterate_average,
    random_qmatrix,
    row_pattern_log_likelihood,
    row_pattern_log_prior,
    run_once,
    subsample,
    update_qmatrix,
)
from .simulate import (
    SimConfig,
    SimDataset,
    builtin_names,
    builtin_true_q,
    gen_attributes,
    gen_responses,
    generate,
)
from .vb import (
    PointEstimates,
    VariationalState,
    VBPriors,
    compute_elbo,
    fit,
    init_state,
    point_estimates,
    update_class_weights,
    update_item_posteriors,
    update_responsibilities,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ItemParams",
    "IterationRecord",
    "PatternTable",
    "PointEstimates",
    "ProfileLattice",
    "QMatrix",
    "RecoveryReport",
    "ResponseMatrix",
    "RunResult",
    "SearchConfig",
    "SimConfig",
    "SimDataset",
    "VariationalState",
    "VBPriors",
    "align_columns",
    "align_columns_greedy",
    "builtin_names",
    "builtin_true_q",
    "compute_elbo",
    "enumerate_profiles",
    "estimate",
    "fit",
    "full_elbo_trace",
    "gen_attributes",
    "gen_responses",
    "generate",
    "ideal_response",
    "ideal_response_matrix",
    "ideal_table",
    "init_state",
    "iterate_average",
    "kernel_backend",
    "mean_recovery",
    "negative_elbo_fit",
    "pattern_table",
    "point_estimates",
    "random_qmatrix",
    "recovery_rate",
    "row_pattern_log_likelihood",
    "row_pattern_log_prior",
    "run_once",
    "subsample",
    "update_class_weights",
    "update_item_posteriors",
    "update_qmatrix",
    "update_responsibilities",
]
