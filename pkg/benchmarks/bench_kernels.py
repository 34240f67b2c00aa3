#!/usr/bin/env python3
"""Compare the compiled knn kernel against the NumPy fallback.

Run from the repo root after an editable install:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --n-train 250 --repeats 200

Both backends are imported directly, so the STRATEVAL_NO_EXT switch is
irrelevant here; outputs are checked for exact agreement before timing.
"""

import argparse
import time

import numpy as np

from strateval._kernels import _ref

try:
    from strateval._kernels import _fast
except ImportError:
    _fast = None


def workload(n_train, n_query, n_metrics, seed):
    rng = np.random.default_rng(seed)
    train_x = rng.normal(size=(n_train, n_metrics))
    train_y = rng.normal(size=n_train)
    query_x = rng.normal(size=(n_query, n_metrics))
    return train_x, train_y, query_x


def time_backend(fn, data, k, repeats):
    fn(*data, k)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*data, k)
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser(
        description="benchmark the knn kernel backends against each other"
    )
    parser.add_argument("--n-train", type=int, default=250)
    parser.add_argument("--n-query", type=int, default=500)
    parser.add_argument("--metrics", type=int, default=10)
    parser.add_argument("--k", type=int, default=25)
    parser.add_argument("--repeats", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    data = workload(args.n_train, args.n_query, args.metrics, args.seed)
    print(
        f"workload: {args.n_train} train rows, {args.n_query} queries, "
        f"{args.metrics} metric columns, k={args.k}"
    )

    ref_out = _ref.knn_predict(*data, args.k)
    t_ref = time_backend(_ref.knn_predict, data, args.k, args.repeats)
    print(f"python   {t_ref * 1e3:8.3f} ms/call")

    if _fast is None:
        print("compiled backend not built; reinstall with the extension to compare")
        return

    fast_out = _fast.knn_predict(*data, args.k)
    if not np.array_equal(ref_out, fast_out):
        raise SystemExit("backends disagree; benchmark aborted")
    t_fast = time_backend(_fast.knn_predict, data, args.k, args.repeats)
    print(f"compiled {t_fast * 1e3:8.3f} ms/call")
    print(f"speedup  {t_ref / t_fast:8.2f}x")


if __name__ == "__main__":
    main()
