"""Standardization of automatic-metric columns over a test set.

Several consumers (metric-based binning, variance proxies, control variates,
knn features) need the same z-scored view of the metric matrix, so it lives
here. Standardization always uses the full test set and population std.
"""

from __future__ import annotations

import warnings

import numpy as np

from .model import TestSet

# Columns with std below this (relative to their location) carry no signal
# and would blow up under z-scoring.
_CONSTANT_TOL = 1e-12


class DegenerateMetricError(ValueError):
    """No usable (non-constant) metric column is available."""


def _is_constant(col: np.ndarray) -> bool:
    return float(col.std()) < _CONSTANT_TOL * (1.0 + abs(float(col.mean())))


def zscore(values: np.ndarray) -> np.ndarray:
    """z-score a vector with its population mean/std; error if constant."""
    values = np.asarray(values, dtype=float)
    if _is_constant(values):
        raise DegenerateMetricError("cannot standardize a constant column")
    return (values - values.mean()) / values.std()


def standardized_metrics(test_set: TestSet) -> tuple[np.ndarray, tuple[str, ...]]:
    """z-score every metric column over the whole test set.

    Constant columns are dropped with a warning rather than producing a
    division by zero. Returns the (N, M') matrix of surviving columns and
    their names; raises DegenerateMetricError if none survive.
    """
    if test_set.n_metrics == 0:
        raise DegenerateMetricError("test set has no metric columns")
    raw = test_set.metrics_matrix()
    cols = []
    names = []
    dropped = []
    for j, name in enumerate(test_set.metric_names):
        col = raw[:, j]
        if _is_constant(col):
            dropped.append(name)
            continue
        cols.append((col - col.mean()) / col.std())
        names.append(name)
    if dropped:
        warnings.warn(
            f"dropped constant metric column(s): {', '.join(dropped)}",
            stacklevel=2,
        )
    if not cols:
        raise DegenerateMetricError("all metric columns are constant")
    return np.column_stack(cols), tuple(names)


def mean_z_scores(test_set: TestSet) -> np.ndarray:
    """Per-segment mean of the standardized metric columns (not re-scaled)."""
    z, _ = standardized_metrics(test_set)
    return z.mean(axis=1)
