"""Builders and batched-draw utilities shared across test modules.

The batched draw helpers reproduce, row for row, what draw_indices and
stratified_indices do one call at a time: one uniform key per segment,
keep the n (or per-bin n_l) smallest.  Dedicated equivalence tests pin
that correspondence, so the Monte Carlo tests can use the fast matrix
form without drifting from the library's sampling distribution.
"""

from __future__ import annotations

import numpy as np

from strateval import Partition, Segment, TestSet


def make_test_set(scores, doc_sizes=None, metrics=None, direction="lower"):
    """TestSet from bare arrays.

    `scores` may contain None (unrated).  `doc_sizes` defaults to a single
    document; `metrics` defaults to one strictly increasing column so
    metric-dependent code paths always have signal to work with.
    """
    scores = list(scores)
    n = len(scores)
    if doc_sizes is None:
        doc_sizes = [n]
    assert sum(doc_sizes) == n, "doc_sizes must cover every segment"
    doc_of = [d for d, size in enumerate(doc_sizes) for _ in range(size)]
    if metrics is None:
        metrics = [[float(i)] for i in range(n)]
    n_metrics = len(metrics[0]) if metrics else 0
    segments = tuple(
        Segment(
            id=f"s{i}",
            doc_id=f"d{doc_of[i]}",
            metrics=tuple(float(v) for v in metrics[i]) if n_metrics else (),
            score=None if scores[i] is None else float(scores[i]),
        )
        for i in range(n)
    )
    return TestSet(
        segments=segments,
        metric_names=tuple(f"m{j}" for j in range(n_metrics)),
        score_direction=direction,
    )


def batched_uniform_draws(n_total: int, n: int, draws: int, rng) -> np.ndarray:
    """(draws, n) index matrix; row d is the d-th uniform draw of the rng."""
    keys = rng.random((draws, n_total))
    if n == n_total:
        return np.tile(np.arange(n_total, dtype=np.intp), (draws, 1))
    return np.argpartition(keys, n, axis=1)[:, :n].astype(np.intp)


def batched_stratified_draws(
    partition: Partition, counts, draws: int, rng
) -> np.ndarray:
    """(draws, n) index matrix of per-bin uniform draws, bins concatenated."""
    keys = rng.random((draws, partition.n_segments))
    blocks = []
    for members, n_l in zip(partition.members, counts):
        n_l = int(n_l)
        if n_l == 0:
            continue
        if n_l == len(members):
            blocks.append(np.tile(members, (draws, 1)))
            continue
        sub = keys[:, members]
        pick = np.argpartition(sub, n_l, axis=1)[:, :n_l]
        blocks.append(members[pick])
    return np.concatenate(blocks, axis=1)


def stratified_values(scores: np.ndarray, counts, bin_sizes, idx: np.ndarray):
    """Stratified estimates for every row of a batched stratified draw.

    Relies on the column layout of batched_stratified_draws: the first n_0
    columns belong to bin 0, the next n_1 to bin 1, and so on.
    """
    n_total = int(np.sum(bin_sizes))
    values = np.zeros(idx.shape[0])
    start = 0
    for n_l, size in zip(counts, bin_sizes):
        n_l = int(n_l)
        if n_l == 0:
            continue
        block = scores[idx[:, start : start + n_l]]
        values += block.mean(axis=1) * (size / n_total)
        start += n_l
    return values


def doc_variance_share(test_set: TestSet) -> float:
    """Fraction of total score variance explained by document membership."""
    scores = test_set.scores_array()
    total = float(((scores - scores.mean()) ** 2).sum())
    between = 0.0
    for members in test_set.doc_index.values():
        sel = scores[list(members)]
        between += len(sel) * (float(sel.mean()) - float(scores.mean())) ** 2
    return between / total
