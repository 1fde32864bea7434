"""Energy modeling toolkit for PMC-based dynamic-energy prediction.

Measured runs carry performance-monitoring-counter vectors and dynamic
energy. On top of them the package offers: the two-stage additivity test
that decides which counters are trustworthy model inputs, three linear
model families (with intercept, through the origin, and non-negative
through the origin), energy-conservation checks with explicit
negative-prediction witnesses, a randomized composability harness, and
minimum-energy two-processor data partitioning over discrete energy
functions. The ``emodel`` command exposes the same operations for batch
use.
"""

from .additivity import (
    INFINITE,
    AdditivityReport,
    Classification,
    PmcAdditivity,
    additivity_error,
    core_config_analysis,
    run_additivity_test,
    tolerance_sweep,
)
from .conservation import (
    MAX,
    SUM,
    WILDCARD,
    ComposabilityReport,
    CompositionCounterexample,
    Operator,
    OperatorDetection,
    OperatorTable,
    Violation,
    ViolationKind,
    ViolationReport,
    check_conservation,
    compose,
    generate_cases,
    negative_witness,
    strong_composability_check,
    sum_plus_delta,
    verify_weak_composability,
)
from .core import (
    AggregatedRun,
    ApplicationRun,
    CompoundRun,
    DataFormatError,
    Dataset,
    EnergyModel,
    ModelKind,
    PmcVector,
    RunConfig,
    RunRef,
    drop_low_count_pmcs,
    load_compounds,
    load_model,
    load_runs,
    save_model,
)
from .fitting import (
    UNDEFINED,
    CorrelationMatrix,
    ErrorSummary,
    correlation_matrix,
    evaluate,
    fit,
    nnls,
    predict,
)
from .partitioning import (
    EnergyFunction,
    PartitionResult,
    energy_loss,
    load_energy_function,
    partition,
    slice_at_n,
)
from .stats import (
    MeanEstimate,
    MeasurementFaultWarning,
    dynamic_energy,
    dynamic_error_from_total,
    percent_error,
    sample_mean_ci,
    student_t_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core types and I/O
    "PmcVector",
    "RunConfig",
    "RunRef",
    "ApplicationRun",
    "CompoundRun",
    "AggregatedRun",
    "Dataset",
    "ModelKind",
    "EnergyModel",
    "DataFormatError",
    "load_runs",
    "load_compounds",
    "load_model",
    "save_model",
    "drop_low_count_pmcs",
    # measurement statistics
    "MeasurementFaultWarning",
    "MeanEstimate",
    "dynamic_energy",
    "sample_mean_ci",
    "percent_error",
    "dynamic_error_from_total",
    "student_t_quantile",
    # additivity
    "INFINITE",
    "Classification",
    "PmcAdditivity",
    "AdditivityReport",
    "additivity_error",
    "run_additivity_test",
    "tolerance_sweep",
    "core_config_analysis",
    # model fitting
    "UNDEFINED",
    "CorrelationMatrix",
    "ErrorSummary",
    "correlation_matrix",
    "fit",
    "predict",
    "evaluate",
    "nnls",
    # conservation and composability
    "WILDCARD",
    "Operator",
    "SUM",
    "MAX",
    "sum_plus_delta",
    "OperatorTable",
    "ViolationKind",
    "Violation",
    "ViolationReport",
    "check_conservation",
    "negative_witness",
    "compose",
    "CompositionCounterexample",
    "verify_weak_composability",
    "OperatorDetection",
    "ComposabilityReport",
    "strong_composability_check",
    "generate_cases",
    # partitioning
    "EnergyFunction",
    "PartitionResult",
    "slice_at_n",
    "partition",
    "energy_loss",
    "load_energy_function",
]
