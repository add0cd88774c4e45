"""Parallel-and-stream estimation for generalized linear models.

Rows are split into blocks processed in parallel; each block is streamed
batch by batch with renewable updates, and block summaries are combined by
inverse-dispersion information weighting.
"""

from .combine import PasaEstimate, WaldIntervals, combine, gmm_oracle, wald_intervals
from .data import (
    CategoricalColumn,
    CsvSchema,
    NumericColumn,
    SimSpec,
    read_csv_batches,
    simulate,
    simulate_full,
    split_train_test,
    write_csv,
)
from .errors import (
    ConfigError,
    NonConvergenceError,
    NumericalError,
    PasaError,
    RankDeficiencyError,
    SingularMatrixError,
)
from .executor import (
    ArrayDataSource,
    PartitionedData,
    PartitionPlan,
    RunConfig,
    partition,
    run_mapreduce,
    run_offline,
    run_pasa,
)
from .glm import (
    BERNOULLI,
    GAUSSIAN,
    BatchData,
    FitResult,
    GlmFamily,
    SolverConfig,
    deviance,
    estimate_dispersion_pearson,
    fit_mle,
    get_family,
    mean,
    neg_hessian,
    score,
    variance_fn,
)
from .metrics import auc, confusion_counts, corrections
from .report import Cell, ReplicationReport, emit_report, run_benchmark, run_replications
from .selection import SelectionTrace, Table, forward_select
from .stream import (
    BlockSummary,
    StreamState,
    finalize_block,
    init_block,
    renew_update,
    renew_update_linear,
    stream_block,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayDataSource",
    "BERNOULLI",
    "BatchData",
    "BlockSummary",
    "CategoricalColumn",
    "Cell",
    "ConfigError",
    "CsvSchema",
    "FitResult",
    "GAUSSIAN",
    "GlmFamily",
    "NonConvergenceError",
    "NumericColumn",
    "NumericalError",
    "PartitionPlan",
    "PartitionedData",
    "PasaError",
    "PasaEstimate",
    "RankDeficiencyError",
    "ReplicationReport",
    "RunConfig",
    "SelectionTrace",
    "SimSpec",
    "SingularMatrixError",
    "SolverConfig",
    "StreamState",
    "Table",
    "WaldIntervals",
    "auc",
    "combine",
    "confusion_counts",
    "corrections",
    "deviance",
    "emit_report",
    "estimate_dispersion_pearson",
    "finalize_block",
    "fit_mle",
    "forward_select",
    "get_family",
    "gmm_oracle",
    "init_block",
    "mean",
    "neg_hessian",
    "partition",
    "read_csv_batches",
    "renew_update",
    "renew_update_linear",
    "run_benchmark",
    "run_mapreduce",
    "run_offline",
    "run_pasa",
    "run_replications",
    "score",
    "simulate",
    "simulate_full",
    "split_train_test",
    "stream_block",
    "variance_fn",
    "wald_intervals",
    "write_csv",
]
