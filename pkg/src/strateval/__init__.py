"""Budgeted human evaluation: pick which segments to rate, estimate the
full-test-set mean score without bias, and bound the error.

The toolkit combines three levers: stratified sampling over documents or
metric-score bins, budget allocation proportional to bin size or to
estimated within-bin spread, and control variates built from automatic
metrics (including k-nearest-neighbour predictions of the human score).
A Monte Carlo harness compares pipelines on synthetic or real data, and an
HTTP service runs incremental rating sessions.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .bounds import (
    BoundSpec,
    bernstein_bound,
    empirical_range,
    hoeffding_bound,
    sample_sigma,
)
from .dataio import (
    DataFormatError,
    SyntheticSpec,
    export_results,
    generate_synthetic,
    load_config,
    load_ratings,
    load_test_set,
    save_config,
    save_ratings,
    save_test_set,
)
from .incremental import Session, SessionComplete, SessionError
from .metrics import DegenerateMetricError, standardized_metrics
from .model import (
    DrawError,
    Estimate,
    MissingScoreError,
    SampleDraw,
    Segment,
    TestSet,
    baseline_variance,
    draw_indices,
    random_sample,
    reveal,
    sample_mean,
    substream,
    true_mean,
)
from .simulate import (
    DEFAULT_SIZE_FRACTIONS,
    METHODS,
    MethodResult,
    SimulationConfig,
    calibration_eval,
    curve_rows,
    enumerate_oracle,
    report,
    result_rows,
    run_simulation,
    run_suite,
    sample_size,
    win_rate,
)
from .stratify import (
    Allocation,
    AllocationError,
    Partition,
    cap_and_reallocate,
    metric_proxy_sigma,
    optimal_allocation,
    partition_by_document,
    partition_by_metric_score,
    proportional_allocation,
    round_allocation,
    stratified_estimate,
    stratified_sample,
)
from .variates import (
    DegenerateVariateError,
    KnnModel,
    Variate,
    combined_estimate,
    cv_estimate_multi,
    cv_estimate_scalar,
    knn_fit,
    knn_predict,
    multi_variate,
    variate_from_knn,
    variate_from_metric,
    variate_mean_of_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "BoundSpec",
    "bernstein_bound",
    "empirical_range",
    "hoeffding_bound",
    "sample_sigma",
    "DataFormatError",
    "SyntheticSpec",
    "export_results",
    "generate_synthetic",
    "load_config",
    "load_ratings",
    "load_test_set",
    "save_config",
    "save_ratings",
    "save_test_set",
    "Session",
    "SessionComplete",
    "SessionError",
    "DegenerateMetricError",
    "standardized_metrics",
    "DrawError",
    "Estimate",
    "MissingScoreError",
    "SampleDraw",
    "Segment",
    "TestSet",
    "baseline_variance",
    "draw_indices",
    "random_sample",
    "reveal",
    "sample_mean",
    "substream",
    "true_mean",
    "DEFAULT_SIZE_FRACTIONS",
    "METHODS",
    "MethodResult",
    "SimulationConfig",
    "calibration_eval",
    "curve_rows",
    "enumerate_oracle",
    "report",
    "result_rows",
    "run_simulation",
    "run_suite",
    "sample_size",
    "win_rate",
    "Allocation",
    "AllocationError",
    "Partition",
    "cap_and_reallocate",
    "metric_proxy_sigma",
    "optimal_allocation",
    "partition_by_document",
    "partition_by_metric_score",
    "proportional_allocation",
    "round_allocation",
    "stratified_estimate",
    "stratified_sample",
    "DegenerateVariateError",
    "KnnModel",
    "Variate",
    "combined_estimate",
    "cv_estimate_multi",
    "cv_estimate_scalar",
    "knn_fit",
    "knn_predict",
    "multi_variate",
    "variate_from_knn",
    "variate_from_metric",
    "variate_mean_of_metrics",
    "__version__",
]
