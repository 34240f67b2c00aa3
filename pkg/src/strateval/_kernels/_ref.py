"""Pure-NumPy reference implementation of the kernels.

Semantics are the contract; the compiled backend must match this
bit-for-bit on tie handling (neighbours are the k training rows with the
smallest (squared distance, insertion index) pair, compared
lexicographically).
"""

import numpy as np


def _as_matrix(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    return a


def knn_predict(train_x, train_y, query_x, k):
    """Mean of the k nearest training targets for each query row.

    Distances are squared Euclidean.  Ties are broken by training-row
    insertion order, so duplicated training points resolve
    deterministically.
    """
    train_x = _as_matrix(train_x)
    query_x = _as_matrix(query_x)
    train_y = np.ascontiguousarray(train_y, dtype=np.float64)
    n = train_x.shape[0]
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if train_y.shape != (n,):
        raise ValueError("train_y length does not match train_x")
    if query_x.shape[1] != train_x.shape[1]:
        raise ValueError("query and train feature widths differ")

    if k == n:
        mean = train_y.mean()
        return np.full(query_x.shape[0], mean)

    # (q - t)^2 = q^2 - 2 q.t + t^2; constant q^2 does not affect ranking.
    d = -2.0 * (query_x @ train_x.T)
    d += (train_x * train_x).sum(axis=1)

    part = np.argpartition(d, (k - 1, k), axis=1)
    chosen = part[:, :k]
    rows = np.arange(d.shape[0])
    # A tie across the k-boundary means argpartition's choice is not the
    # contract's; redo those rows with a full stable ordering.
    boundary = d[rows, part[:, k - 1]] == d[rows, part[:, k]]
    if np.any(boundary):
        bad = np.flatnonzero(boundary)
        order = np.argsort(d[bad], axis=1, kind="stable")
        chosen = chosen.copy()
        chosen[bad] = order[:, :k]

    # Average in index order so both backends reduce identically.
    return train_y[np.sort(chosen, axis=1)].mean(axis=1)
