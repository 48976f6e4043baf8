"""Tree-structured clustering of unit-specific intercepts in fixed-effects GLMs."""

from .data import Dataset, read_dataset, read_table, write_dataset, write_table
from .errors import (
    ConvergenceSuspect,
    DimensionMismatch,
    DomainError,
    DuplicateThreshold,
    EmptyUnit,
    FullModelUnfit,
    InputError,
    InvalidM0,
    LengthMismatch,
    RankDeficient,
    Separation,
    ThresholdOutOfRange,
    TooManyFailures,
    TreeClustError,
    ZeroVariance,
)
from .glm import DesignMatrix, Family, GlmFit, chisq_sf, fit_glm, log_likelihood, lr_test
from .inference import BootstrapResult, bootstrap_ci
from .metrics import CellSummary, ReplicationMetrics, mse_intercepts, mse_linear, summarize_cell
from .partition import (
    ClusterIntercepts,
    OrderBasis,
    Partition,
    UnitOrder,
    cluster_design,
    expand_design,
    finalize,
    order_units,
)
from .simulate import (
    InterceptDist,
    Scenario,
    SimulatedData,
    effective_df,
    gen_covariates,
    gen_intercepts,
    gen_response,
    simulate,
)
from .study import run_cell, run_replication
from .tsc import ModelSpec, SplitRecord, TreeFit, fit_tsc, path_table

__version__ = "0.1.0"
