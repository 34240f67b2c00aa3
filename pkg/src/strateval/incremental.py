"""Incremental rating sessions: one segment at a time, budget re-split as
ratings arrive.

After every rating (or every `stride` ratings) the remaining budget is
re-allocated over the still-unrevealed capacity of each bin using the
optimal-allocation rule, with per-bin spread estimates that sharpen as
scores accumulate.  Before any ratings exist the spread is proxied by the
per-bin std of the mean standardized metric score.
"""

import math
from typing import Optional

import numpy as np

from .metrics import standardized_metrics
from .model import Estimate, SampleDraw, TestSet
from .stratify import (
    Partition,
    allocate_with_caps,
    metric_proxy_sigma,
    stratified_estimate,
)
from .variates import KnnModel

STRATEGIES = ("incr-human", "incr-metrics", "proportional")


class SessionError(RuntimeError):
    """Misuse of a rating session (wrong segment, already complete, ...)."""


class SessionComplete(SessionError):
    """The budget is exhausted; no further segments will be issued."""


class Session:
    """Single-writer state machine issuing segments and absorbing ratings.

    Strategies:
      incr-human    per-bin std of the revealed scores (proxy below 2 ratings)
      incr-metrics  per-bin std of revealed scores plus k-nearest-neighbour
                    predictions for the unrevealed rest
      proportional  no spread estimate, remaining budget split by capacity

    The session draws uniformly inside the chosen bin using its own
    generator, so a fixed (test set, partition, budget, strategy, seed)
    tuple replays to the identical sequence.
    """

    def __init__(
        self,
        test_set: TestSet,
        partition: Partition,
        budget: int,
        strategy: str = "incr-human",
        *,
        rng: Optional[np.random.Generator] = None,
        seed: int = 0,
        k: int = 25,
        stride: int = 1,
    ):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        if partition.n_segments != test_set.n_segments:
            raise ValueError("partition does not match test set size")
        if not 1 <= budget <= test_set.n_segments:
            raise ValueError(
                f"budget {budget} out of range [1, {test_set.n_segments}]"
            )
        if stride < 1:
            raise ValueError("stride must be >= 1")
        if k < 1:
            raise ValueError("k must be >= 1")
        self.test_set = test_set
        self.partition = partition
        self.budget = int(budget)
        self.strategy = strategy
        self.k = int(k)
        self.stride = int(stride)
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.revealed: dict[int, float] = {}
        self._pending: Optional[int] = None
        self._plan: Optional[np.ndarray] = None
        self._since_realloc = 0
        # Fail fast: both adaptive strategies need metrics before the first
        # rating exists.
        if strategy == "proportional":
            self._proxy = np.ones(partition.n_bins)
            self._z = None
        else:
            self._proxy = metric_proxy_sigma(test_set, partition)
            self._z = (
                standardized_metrics(test_set)[0]
                if strategy == "incr-metrics"
                else None
            )

    @property
    def n_rated(self) -> int:
        return len(self.revealed)

    @property
    def is_complete(self) -> bool:
        return self.n_rated >= self.budget

    @property
    def status(self) -> str:
        return "complete" if self.is_complete else "active"

    def variance_estimates(self) -> np.ndarray:
        """Per-bin spread estimates driving the next re-allocation."""
        part = self.partition
        if self.strategy == "proportional":
            return np.ones(part.n_bins)
        sigma = self._proxy.copy()
        if not self.revealed:
            return sigma
        idx = np.fromiter(self.revealed.keys(), dtype=np.intp, count=self.n_rated)
        scores = np.fromiter(
            self.revealed.values(), dtype=np.float64, count=self.n_rated
        )
        if self.strategy == "incr-human":
            bins = part.bin_of[idx]
            for l in range(part.n_bins):
                sel = scores[bins == l]
                if len(sel) >= 2:
                    sigma[l] = float(sel.std())
            return sigma
        # incr-metrics: splice predictions into the unrevealed slots and
        # take the per-bin std of the combined vector.
        values = np.empty(part.n_segments)
        values[idx] = scores
        unrevealed = np.setdiff1d(
            np.arange(part.n_segments, dtype=np.intp), idx, assume_unique=True
        )
        if len(unrevealed):
            model = KnnModel(features=self._z[idx], targets=scores, k=self.k)
            values[unrevealed] = model.predict(self._z[unrevealed])
        return np.array([float(values[m].std()) for m in part.members])

    def _capacities(self) -> np.ndarray:
        caps = self.partition.bin_sizes.copy()
        for i in self.revealed:
            caps[self.partition.bin_of[i]] -= 1
        return caps

    def _replan(self):
        remaining = self.budget - self.n_rated
        counts, _ = allocate_with_caps(
            self._capacities(), self.variance_estimates(), remaining
        )
        self._plan = counts
        self._since_realloc = 0

    def next_segment(self) -> int:
        """Index of the segment to rate next; stable until it is rated."""
        if self.is_complete:
            raise SessionComplete("the rating budget is exhausted")
        if self._pending is not None:
            return self._pending
        if self._plan is None or self._since_realloc >= self.stride:
            self._replan()
        bin_id = int(np.argmax(self._plan))
        members = self.partition.members[bin_id]
        candidates = members[
            [i not in self.revealed for i in members.tolist()]
        ]
        pick = candidates[int(self.rng.integers(len(candidates)))]
        self._pending = int(pick)
        return self._pending

    def submit_rating(self, index: int, score: float) -> None:
        """Record the score for the pending segment."""
        if self.is_complete:
            raise SessionComplete("the rating budget is exhausted")
        if self._pending is None:
            raise SessionError("no segment pending; call next_segment first")
        if index != self._pending:
            if index in self.revealed:
                raise SessionError(f"segment {index} was already rated")
            raise SessionError(
                f"segment {index} is not the pending segment ({self._pending})"
            )
        score = float(score)
        if not math.isfinite(score):
            raise ValueError(f"score must be finite, got {score}")
        self.revealed[index] = score
        self._pending = None
        if self._plan is not None:
            self._plan[self.partition.bin_of[index]] -= 1
        self._since_realloc += 1

    def final_draw(self) -> SampleDraw:
        """The revealed ratings as a draw, in rating order."""
        if not self.revealed:
            raise SessionError("no ratings collected yet")
        return SampleDraw(
            indices=tuple(self.revealed.keys()),
            scores=tuple(self.revealed.values()),
        )

    def current_estimate(self) -> Estimate:
        """Stratified estimate over whatever has been rated so far."""
        return stratified_estimate(self.final_draw(), self.partition)
