"""Stratified sampling: binning, budget allocation, drawing, and estimation.

Bins come from document membership or from sorting segments by their mean
standardized metric score. A budget is split across bins either
proportionally to bin size or proportionally to size times an estimated
within-bin std ("optimal" allocation), with largest-remainder rounding and a
cap-and-reallocate step for bins whose target exceeds their capacity.

All tie-breaking (rounding remainders, cap selection, sort ties) is by
lowest index, so every operation is deterministic and testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import mean_z_scores
from .model import DrawError, Estimate, SampleDraw, TestSet, reveal

_ROUND_TOL = 1e-9


class AllocationError(ValueError):
    """An allocation request was infeasible or inconsistent with its partition."""


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of every segment to one of L contiguous bins."""

    bin_of: np.ndarray  # length N, values in [0, L)
    bin_sizes: np.ndarray  # length L, each >= 1
    members: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        bin_of = np.asarray(self.bin_of, dtype=np.intp)
        sizes = np.asarray(self.bin_sizes, dtype=np.intp)
        object.__setattr__(self, "bin_of", bin_of)
        object.__setattr__(self, "bin_sizes", sizes)
        L = len(sizes)
        if L == 0 or bin_of.size == 0:
            raise ValueError("partition must contain at least one bin and one segment")
        if bin_of.min() < 0 or bin_of.max() >= L:
            raise ValueError("bin ids must be contiguous from 0")
        counts = np.bincount(bin_of, minlength=L)
        if not np.array_equal(counts, sizes):
            raise ValueError("bin_sizes does not match bin membership counts")
        if (sizes < 1).any():
            raise ValueError("every bin must contain at least one segment")
        members = tuple(np.flatnonzero(bin_of == l) for l in range(L))
        object.__setattr__(self, "members", members)
        bin_of.setflags(write=False)
        sizes.setflags(write=False)

    @property
    def n_bins(self) -> int:
        return len(self.bin_sizes)

    @property
    def n_segments(self) -> int:
        return len(self.bin_of)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Build a partition from arbitrary labels; bin order follows first appearance."""
        order: dict = {}
        bin_of = np.empty(len(labels), dtype=np.intp)
        for i, lab in enumerate(labels):
            if lab not in order:
                order[lab] = len(order)
            bin_of[i] = order[lab]
        return cls(bin_of=bin_of, bin_sizes=np.bincount(bin_of, minlength=len(order)))


@dataclass(frozen=True)
class Allocation:
    """Per-bin sample counts summing exactly to the total budget."""

    counts: tuple[int, ...]
    total: int
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if any(c < 0 for c in counts):
            raise AllocationError("negative bin count")
        if sum(counts) != self.total:
            raise AllocationError(
                f"counts sum to {sum(counts)}, expected {self.total}"
            )

    def counts_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.intp)


def partition_by_document(test_set: TestSet) -> Partition:
    """One bin per document, in order of first appearance."""
    return Partition.from_labels([s.doc_id for s in test_set.segments])


def partition_by_metric_score(test_set: TestSet, target_bin_size: int = 80) -> Partition:
    """Bins of roughly `target_bin_size` segments with similar metric scores.

    Segments are ranked by the mean of their standardized metric columns
    (ties by original index) and split into L = max(1, round(N / target))
    contiguous runs whose sizes differ by at most one.
    """
    if target_bin_size < 1:
        raise ValueError("target_bin_size must be >= 1")
    mz = mean_z_scores(test_set)
    n = test_set.n_segments
    order = np.argsort(mz, kind="stable")
    n_bins = max(1, _round_half_up(n / target_bin_size))
    base, rem = divmod(n, n_bins)
    sizes = np.array([base + 1] * rem + [base] * (n_bins - rem), dtype=np.intp)
    bin_of = np.empty(n, dtype=np.intp)
    bin_of[order] = np.repeat(np.arange(n_bins, dtype=np.intp), sizes)
    return Partition(bin_of=bin_of, bin_sizes=sizes)


def round_allocation(raw) -> np.ndarray:
    """Round non-negative reals summing to an integer n to integers summing to n.

    Largest-remainder: floor everything, then hand the deficit to the largest
    fractional parts (ties by lowest index). This minimizes the L1 distance
    to the unrounded values.
    """
    raw = np.asarray(raw, dtype=float)
    if (raw < 0).any():
        raise ValueError("allocation values must be non-negative")
    total = float(raw.sum())
    n = _round_half_up(total)
    if abs(total - n) > _ROUND_TOL:
        raise ValueError(f"allocation values must sum to an integer, got {total!r}")
    base = np.floor(raw).astype(np.intp)
    deficit = n - int(base.sum())
    if deficit > 0:
        frac = raw - base
        order = np.lexsort((np.arange(len(raw)), -frac))
        base[order[:deficit]] += 1
    return base


def proportional_allocation(partition: Partition, n: int) -> Allocation:
    """Counts proportional to bin size: n_l = n * N_l / N, rounded."""
    N = partition.n_segments
    if not 1 <= n <= N:
        raise AllocationError(f"budget {n} out of range [1, {N}]")
    raw = n * partition.bin_sizes / N
    return Allocation(counts=tuple(round_allocation(raw)), total=n)


def optimal_allocation(partition: Partition, sigma_hat, n: int) -> Allocation:
    """Counts proportional to bin size times estimated within-bin std.

    Bins whose target exceeds their capacity are capped and the surplus is
    reallocated (see cap_and_reallocate). All-zero weights fall back to
    proportional allocation, flagged in the result.
    """
    N = partition.n_segments
    if not 1 <= n <= N:
        raise AllocationError(f"budget {n} out of range [1, {N}]")
    counts, flags = allocate_with_caps(partition.bin_sizes, sigma_hat, n)
    return Allocation(counts=tuple(int(c) for c in counts), total=n, flags=flags)


def _cap_loop(counts, sizes, sigma_hat, n):
    """Shared core of cap_and_reallocate, on bare arrays."""
    counts = np.asarray(counts, dtype=np.intp).copy()
    flags: tuple[str, ...] = ()
    free = np.ones(len(sizes), dtype=bool)
    while True:
        excess = np.where(free, counts - sizes, 0)
        if excess.max() <= 0:
            break
        worst = int(np.argmax(excess))  # argmax takes the lowest index on ties
        counts[worst] = sizes[worst]
        free[worst] = False
        budget = n - int(counts[~free].sum())
        idx = np.flatnonzero(free)
        if len(idx) == 0:
            break
        weights = sigma_hat[idx] * sizes[idx]
        if weights.sum() == 0:
            raw = budget * sizes[idx] / sizes[idx].sum()
            flags = ("proportional-fallback",)
        else:
            raw = budget * weights / weights.sum()
        counts[idx] = round_allocation(raw)
    return counts, flags


def cap_and_reallocate(counts, partition: Partition, sigma_hat, n: int) -> Allocation:
    """Clamp over-capacity bins and redistribute their surplus.

    While some bin exceeds its capacity, the bin with the largest excess
    (lowest index on ties) is fixed at capacity and the remaining budget is
    re-split over the remaining bins by the optimal-allocation rule. Each
    pass fixes one bin, so the loop terminates.
    """
    if n > partition.n_segments:
        raise AllocationError(f"budget {n} exceeds population {partition.n_segments}")
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    counts, flags = _cap_loop(counts, partition.bin_sizes, sigma_hat, n)
    return Allocation(counts=tuple(int(c) for c in counts), total=n, flags=flags)


def allocate_with_caps(capacities, sigma_hat, n: int):
    """Optimal-allocation rule over arbitrary per-bin capacities.

    Like optimal_allocation but the capacity vector stands in for the bin
    sizes, so exhausted bins (capacity 0) are legal. Used by incremental
    sessions to split a remaining budget over unrevealed segments. Returns
    (counts, flags).
    """
    caps = np.asarray(capacities, dtype=np.intp)
    if (caps < 0).any():
        raise AllocationError("capacities must be non-negative")
    if not 0 <= n <= int(caps.sum()):
        raise AllocationError(f"budget {n} out of range [0, {int(caps.sum())}]")
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if len(sigma_hat) != len(caps):
        raise AllocationError("sigma_hat length does not match bin count")
    if (sigma_hat < 0).any():
        raise AllocationError("sigma_hat must be non-negative")
    if n == 0:
        return np.zeros(len(caps), dtype=np.intp), ()
    flags: tuple[str, ...] = ()
    weights = sigma_hat * caps
    if weights.sum() == 0:
        raw = n * caps / caps.sum()
        flags = ("proportional-fallback",)
    else:
        raw = n * weights / weights.sum()
    counts, loop_flags = _cap_loop(round_allocation(raw), caps, sigma_hat, n)
    if loop_flags and not flags:
        flags = loop_flags
    return counts, flags


def _check_alloc(partition: Partition, alloc: Allocation) -> np.ndarray:
    counts = alloc.counts_array()
    if len(counts) != partition.n_bins:
        raise AllocationError("allocation/partition bin count mismatch")
    if (counts > partition.bin_sizes).any():
        raise AllocationError("allocation exceeds a bin's capacity")
    return counts


def stratified_indices(
    partition: Partition, alloc: Allocation, rng: np.random.Generator
) -> np.ndarray:
    """Draw n_l indices uniformly without replacement within each bin.

    One uniform key per segment; each bin keeps its n_l smallest keys, so a
    fixed generator state fixes the whole stratified draw.
    """
    counts = _check_alloc(partition, alloc)
    keys = rng.random(partition.n_segments)
    picked = []
    for members, n_l in zip(partition.members, counts):
        n_l = int(n_l)
        if n_l == 0:
            continue
        if n_l == len(members):
            picked.append(members)
        else:
            picked.append(members[np.argpartition(keys[members], n_l)[:n_l]])
    return np.concatenate(picked)


def stratified_sample(
    test_set: TestSet, partition: Partition, alloc: Allocation, rng: np.random.Generator
) -> SampleDraw:
    """Stratified draw with scores revealed (oracle mode)."""
    if partition.n_segments != test_set.n_segments:
        raise AllocationError("partition does not match test set size")
    return reveal(test_set, stratified_indices(partition, alloc, rng))


def stratified_estimate(draw: SampleDraw, partition: Partition) -> Estimate:
    """Size-weighted combination of within-bin sample means.

    Bins with no sampled segments are excluded and the weights renormalize
    over the covered bins; such estimates carry a "partial-coverage" flag.
    """
    idx = draw.indices_array()
    if idx.max() >= partition.n_segments:
        raise DrawError("draw index outside partition")
    bins = partition.bin_of[idx]
    scores = draw.scores_array()
    L = partition.n_bins
    sums = np.bincount(bins, weights=scores, minlength=L)
    counts = np.bincount(bins, minlength=L)
    covered = counts > 0
    weights = partition.bin_sizes[covered].astype(float)
    means = sums[covered] / counts[covered]
    value = float((means * weights).sum() / weights.sum())
    flags = () if covered.all() else ("partial-coverage",)
    return Estimate(value=value, method="stratified", n=draw.n, flags=flags)


def metric_proxy_sigma(test_set: TestSet, partition: Partition) -> np.ndarray:
    """Per-bin std of the mean standardized metric score, as a stand-in for
    the unknown per-bin score std when no ratings exist yet."""
    mz = mean_z_scores(test_set)
    return np.array([float(mz[m].std()) for m in partition.members])
