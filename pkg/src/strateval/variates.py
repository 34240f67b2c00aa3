"""Control variates built from automatic metrics.

A variate is a per-segment quantity with known (zero) population mean over
the full test set.  Subtracting its scaled sample mean from the score
sample mean removes the variance the variate explains while keeping the
estimate unbiased.  Variates here are standardized metric columns, their
per-segment mean, or k-nearest-neighbour predictions of the human score
fitted on the rated sample.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .metrics import _is_constant, standardized_metrics, zscore
from .model import Estimate, SampleDraw, TestSet
from .stratify import Partition, stratified_estimate

_STANDARD_TOL = 1e-9
_COND_LIMIT = 1e8

# Below this many ratings the covariance estimate is noisy enough that the
# correction can add variance instead of removing it; callers surface a
# warning rather than switching estimators.
SMALL_SAMPLE_N = 30

_KINDS = ("single-metric", "mean-of-metrics", "knn-predictions", "multi")


class DegenerateVariateError(ValueError):
    """The variate carries no usable signal (constant over the test set)."""


@dataclass(frozen=True, eq=False)
class Variate:
    """Values standardized over the full test set: one segment per row.

    `values` is (N,) for scalar kinds and (N, M) for the multi kind; every
    column must have mean 0 and variance 1 within a tight tolerance, which
    is what makes the control-variate correction unbiased.
    """

    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown variate kind {self.kind!r}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim not in (1, 2) or values.shape[0] < 1:
            raise ValueError("variate values must be (N,) or (N, M) with N >= 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("variate values must be finite")
        cols = values.reshape(values.shape[0], -1)
        means = cols.mean(axis=0)
        variances = cols.var(axis=0)
        if np.any(np.abs(means) > _STANDARD_TOL) or np.any(
            np.abs(variances - 1.0) > _STANDARD_TOL
        ):
            raise ValueError("variate columns must be standardized over the test set")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    @property
    def n_segments(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return 1 if self.is_scalar else self.values.shape[1]


@dataclass(frozen=True, eq=False)
class KnnModel:
    """k-nearest-neighbour regressor over standardized metric vectors.

    `k` is the requested neighbourhood size; with fewer training rows than
    k the model degrades to the training mean (effective_k == n).
    """

    features: np.ndarray
    targets: np.ndarray
    k: int

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        targets = np.ascontiguousarray(self.targets, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ValueError("features must be a non-empty (n, M) matrix")
        if targets.shape != (features.shape[0],):
            raise ValueError("targets length does not match features")
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(targets)):
            raise ValueError("knn training data must be finite")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        features.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def effective_k(self) -> int:
        return min(self.k, self.features.shape[0])

    def predict(self, queries: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if queries.shape[1] != self.features.shape[1]:
            raise ValueError(
                f"query width {queries.shape[1]} does not match "
                f"model width {self.features.shape[1]}"
            )
        return _kernels.knn_predict(
            self.features, self.targets, queries, self.effective_k
        )


def variate_from_metric(test_set: TestSet, metric_index: int = 0) -> Variate:
    """Standardize one metric column into a scalar variate."""
    if not 0 <= metric_index < test_set.n_metrics:
        raise ValueError(
            f"metric index {metric_index} out of range "
            f"(test set has {test_set.n_metrics} metrics)"
        )
    values = zscore(test_set.metrics_matrix()[:, metric_index])
    return Variate(values, kind="single-metric")


def variate_mean_of_metrics(test_set: TestSet) -> Variate:
    """Average the standardized metric columns, then re-standardize.

    The averaging shrinks the variance below 1 whenever the metrics
    disagree, so the mean must be standardized again to qualify as a
    variate.
    """
    z, _ = standardized_metrics(test_set)
    mean = z.mean(axis=1)
    if _is_constant(mean):
        raise DegenerateVariateError(
            "mean of standardized metrics is constant; the metrics cancel out"
        )
    return Variate(zscore(mean), kind="mean-of-metrics")


def multi_variate(test_set: TestSet) -> Variate:
    """All standardized metric columns together, for the vector correction."""
    z, _ = standardized_metrics(test_set)
    return Variate(z, kind="multi")


def knn_fit(
    test_set: TestSet, draw: SampleDraw, k: int = 25, *, features=None
) -> KnnModel:
    """Fit on the rated rows of the draw; features are standardized metrics.

    `features` accepts a precomputed standardized matrix so repeated fits on
    one test set skip the standardization.
    """
    if features is None:
        features, _ = standardized_metrics(test_set)
    idx = draw.indices_array()
    if idx.max() >= features.shape[0]:
        raise ValueError("draw indices fall outside the test set")
    return KnnModel(features=features[idx], targets=draw.scores_array(), k=k)


def knn_predict(model: KnnModel, metric_vector) -> float:
    """Predict the score for a single standardized metric vector."""
    return float(model.predict(np.asarray(metric_vector, dtype=np.float64))[0])


def variate_from_knn(
    test_set: TestSet, draw: SampleDraw, k: int = 25, *, features=None
) -> Variate:
    """Predict every segment from the rated sample, standardize predictions.

    Raises DegenerateVariateError when the predictions are constant (e.g.
    k >= n makes every prediction the sample mean); callers fall back to
    the mean-of-metrics variate in that case.
    """
    if features is None:
        features, _ = standardized_metrics(test_set)
    model = knn_fit(test_set, draw, k, features=features)
    predictions = model.predict(features)
    if _is_constant(predictions):
        raise DegenerateVariateError(
            "k-nearest-neighbour predictions are constant "
            f"(k={model.effective_k}, n={draw.n}); "
            "fall back to the mean-of-metrics variate"
        )
    return Variate(zscore(predictions), kind="knn-predictions")


def _scalar_covariance(
    x: np.ndarray, z: np.ndarray, centered: bool, cov
) -> float:
    if cov is not None:
        return float(cov)
    if centered:
        return float(np.mean((x - x.mean()) * (z - z.mean())))
    # Uncentered moment; valid because the variate has zero population mean.
    return float(np.mean(x * z))


def cv_estimate_scalar(
    draw: SampleDraw,
    variate: Variate,
    *,
    centered: bool = False,
    cov=None,
) -> Estimate:
    """Sample mean minus the covariance-scaled variate sample mean.

    The covariance is estimated from the draw itself (uncentered moment by
    default, centered with `centered=True`) unless a fixed `cov` is
    supplied.
    """
    if not variate.is_scalar:
        raise ValueError("cv_estimate_scalar requires a scalar variate")
    idx = draw.indices_array()
    if idx.max() >= variate.n_segments:
        raise ValueError("draw indices fall outside the variate")
    x = draw.scores_array()
    z = variate.values[idx]
    c = _scalar_covariance(x, z, centered, cov)
    value = float(x.mean() - c * z.mean())
    return Estimate(value=value, method="cv", n=draw.n)


def cv_estimate_multi(draw: SampleDraw, variate: Variate) -> Estimate:
    """Vector correction using every variate column jointly.

    The Gram matrix is taken over the full test set (it involves no
    scores), only the score-variate moment comes from the draw.  Columns
    that make the Gram matrix ill-conditioned are dropped, earliest kept.
    """
    if variate.is_scalar:
        raise ValueError("cv_estimate_multi requires a multi-column variate")
    idx = draw.indices_array()
    if idx.max() >= variate.n_segments:
        raise ValueError("draw indices fall outside the variate")
    z_full = variate.values
    gram = (z_full.T @ z_full) / z_full.shape[0]

    kept: list[int] = []
    dropped: list[int] = []
    for j in range(gram.shape[0]):
        trial = kept + [j]
        sub = gram[np.ix_(trial, trial)]
        if np.linalg.cond(sub) <= _COND_LIMIT:
            kept.append(j)
        else:
            dropped.append(j)
    if dropped:
        warnings.warn(
            f"dropping {len(dropped)} dependent variate column(s): {dropped}",
            stacklevel=2,
        )

    x = draw.scores_array()
    z_sample = z_full[idx][:, kept]
    exz = (x[:, None] * z_sample).mean(axis=0)
    beta = np.linalg.solve(gram[np.ix_(kept, kept)], exz)
    value = float(x.mean() - beta @ z_sample.mean(axis=0))
    flags = ("dropped-columns",) if dropped else ()
    return Estimate(value=value, method="cv-multi", n=draw.n, flags=flags)


def combined_estimate(
    draw: SampleDraw,
    partition: Partition,
    variate: Variate,
    *,
    centered: bool = False,
    cov=None,
) -> Estimate:
    """Stratified estimate with a scalar control-variate correction."""
    if not variate.is_scalar:
        raise ValueError("combined_estimate requires a scalar variate")
    base = stratified_estimate(draw, partition)
    idx = draw.indices_array()
    if idx.max() >= variate.n_segments:
        raise ValueError("draw indices fall outside the variate")
    x = draw.scores_array()
    z = variate.values[idx]
    c = _scalar_covariance(x, z, centered, cov)
    value = float(base.value - c * z.mean())
    return Estimate(
        value=value, method="stratified+cv", n=draw.n, flags=base.flags
    )
