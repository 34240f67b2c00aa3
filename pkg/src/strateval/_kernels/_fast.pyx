# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled k-nearest-neighbour kernel.

Must agree with _ref.knn_predict on every input, including tie handling:
neighbours are the k training rows with the smallest
(squared distance, insertion index) pair, lexicographically.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _argworst(const double* heap_d,
                                 const Py_ssize_t* heap_i,
                                 Py_ssize_t kk) noexcept nogil:
    # Largest (distance, index) pair: the slot a new neighbour would evict.
    cdef Py_ssize_t j, worst = 0
    for j in range(1, kk):
        if heap_d[j] > heap_d[worst] or (
                heap_d[j] == heap_d[worst] and heap_i[j] > heap_i[worst]):
            worst = j
    return worst


def knn_predict(train_x, train_y, query_x, k):
    """Mean of the k nearest training targets for each query row."""
    tx_arr = np.ascontiguousarray(np.atleast_2d(train_x), dtype=np.float64)
    qx_arr = np.ascontiguousarray(np.atleast_2d(query_x), dtype=np.float64)
    ty_arr = np.ascontiguousarray(train_y, dtype=np.float64)

    cdef Py_ssize_t n = tx_arr.shape[0]
    cdef Py_ssize_t m = tx_arr.shape[1]
    cdef Py_ssize_t nq = qx_arr.shape[0]
    cdef Py_ssize_t kk = int(k)
    if not 1 <= kk <= n:
        raise ValueError(f"k must be in [1, {n}], got {int(k)}")
    if ty_arr.shape != (n,):
        raise ValueError("train_y length does not match train_x")
    if qx_arr.shape[1] != m:
        raise ValueError("query and train feature widths differ")

    if kk == n:
        out = np.empty(nq, dtype=np.float64)
        out[:] = np.mean(ty_arr)
        return out

    # Ranking matches _ref, which drops the constant |q|^2 term:
    # d_t = |t|^2 - 2 q.t.  |t|^2 uses the same NumPy reduction as _ref so
    # duplicate rows stay exact ties across backends.
    tsq_arr = (tx_arr * tx_arr).sum(axis=1)

    chosen_arr = np.empty((nq, kk), dtype=np.intp)
    heap_arr = np.empty(kk, dtype=np.float64)

    cdef const double[:, ::1] qx = qx_arr
    cdef const double[:, ::1] tx = tx_arr
    cdef const double[::1] tsq = tsq_arr
    cdef double[::1] heap_d = heap_arr
    cdef Py_ssize_t[:, ::1] chosen = chosen_arr

    cdef Py_ssize_t q, t, j, worst, count
    cdef double d, dot
    cdef const double* heap_p = &heap_d[0]

    with nogil:
        for q in range(nq):
            count = 0
            worst = 0
            for t in range(n):
                dot = 0.0
                for j in range(m):
                    dot += qx[q, j] * tx[t, j]
                d = tsq[t] - 2.0 * dot
                if count < kk:
                    heap_d[count] = d
                    chosen[q, count] = t
                    count += 1
                    if count == kk:
                        worst = _argworst(heap_p, &chosen[q, 0], kk)
                elif d < heap_d[worst]:
                    # Strict: on an exact tie the incumbent has the smaller
                    # insertion index and keeps its slot.
                    heap_d[worst] = d
                    chosen[q, worst] = t
                    worst = _argworst(heap_p, &chosen[q, 0], kk)
    # Average in index order with the same NumPy reduction as _ref, so
    # equal neighbour sets give bit-identical predictions.
    return ty_arr[np.sort(chosen_arr, axis=1)].mean(axis=1)
