"""Core data model: test sets, sample draws, and the baseline estimator.

Scores may be absent (live mode, ratings still being collected) or present
(simulation mode, where the full test set is known and acts as the oracle).
All types are immutable after construction; operations are pure given an
explicit random generator.

Standard deviations are population (divide by N) throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


class MissingScoreError(ValueError):
    """An operation needed a human score that is not present."""


class DrawError(ValueError):
    """A sample draw request was invalid (size, range, or duplicates)."""


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Derive an independent, reproducible generator from a master seed.

    Each distinct integer path, e.g. ``(sim_id, size_index, draw_index)``,
    yields a statistically independent stream. Extending a run with more
    draws never perturbs the streams of earlier draws.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(path)))


@dataclass(frozen=True)
class Segment:
    """One scored text unit: id, document membership, metric scores, optional human score."""

    id: str
    doc_id: str
    metrics: tuple[float, ...]
    score: Optional[float] = None

    def __post_init__(self):
        if not all(np.isfinite(m) for m in self.metrics):
            raise ValueError(f"segment {self.id!r}: non-finite metric value")
        if self.score is not None and not np.isfinite(self.score):
            raise ValueError(f"segment {self.id!r}: non-finite score")


@dataclass(frozen=True)
class TestSet:
    """An ordered collection of segments grouped into documents.

    ``doc_index`` maps each document id to the indices of its segments, in
    segment order; document order follows first appearance. ``metric_names``
    fixes the length and meaning of every segment's metric vector.
    """

    segments: tuple[Segment, ...]
    metric_names: tuple[str, ...]
    doc_index: Mapping[str, tuple[int, ...]] = field(init=False)
    score_direction: str = "lower"  # "lower" (MQM 0-25) or "higher" (0-100 scale)

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ValueError("test set must contain at least one segment")
        m = len(self.metric_names)
        ids = set()
        doc_index: dict[str, list[int]] = {}
        for i, seg in enumerate(self.segments):
            if len(seg.metrics) != m:
                raise ValueError(
                    f"segment {seg.id!r}: expected {m} metric values, got {len(seg.metrics)}"
                )
            if seg.id in ids:
                raise ValueError(f"duplicate segment id {seg.id!r}")
            ids.add(seg.id)
            doc_index.setdefault(seg.doc_id, []).append(i)
        if self.score_direction not in ("lower", "higher"):
            raise ValueError(f"score_direction must be 'lower' or 'higher', got {self.score_direction!r}")
        object.__setattr__(
            self, "doc_index", {d: tuple(ix) for d, ix in doc_index.items()}
        )

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def n_documents(self) -> int:
        return len(self.doc_index)

    @property
    def n_metrics(self) -> int:
        return len(self.metric_names)

    @property
    def has_all_scores(self) -> bool:
        return all(s.score is not None for s in self.segments)

    def scores_array(self) -> np.ndarray:
        """All scores as a float array; requires every score to be present."""
        missing = [s.id for s in self.segments if s.score is None]
        if missing:
            raise MissingScoreError(
                f"{len(missing)} segment(s) without a score (first: {missing[0]!r})"
            )
        a = np.array([s.score for s in self.segments], dtype=float)
        a.setflags(write=False)
        return a

    def metrics_matrix(self) -> np.ndarray:
        """Raw metric scores as an (N, M) array."""
        a = np.array([s.metrics for s in self.segments], dtype=float).reshape(
            self.n_segments, self.n_metrics
        )
        a.setflags(write=False)
        return a


@dataclass(frozen=True)
class SampleDraw:
    """A set of sampled segment indices with their revealed scores."""

    indices: tuple[int, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        n = len(self.indices)
        if n == 0:
            raise DrawError("empty draw")
        if len(self.scores) != n:
            raise DrawError("indices and scores must align")
        if len(set(self.indices)) != n:
            raise DrawError("draw contains repeated indices")
        if min(self.indices) < 0:
            raise DrawError("negative segment index")

    @property
    def n(self) -> int:
        return len(self.indices)

    def scores_array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=float)

    def indices_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)


@dataclass(frozen=True)
class Estimate:
    """A point estimate of the test-set mean, tagged with how it was produced.

    ``flags`` records degradations worth surfacing, e.g. partial bin coverage
    or an estimator fallback.
    """

    value: float
    method: str
    n: int
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"non-finite estimate from {self.method!r}")


def true_mean(test_set: TestSet) -> float:
    """Mean score over the whole test set (oracle mode; every score required)."""
    return float(test_set.scores_array().mean())


def reveal(test_set: TestSet, indices: Iterable[int]) -> SampleDraw:
    """Build a SampleDraw by revealing the scores at `indices`."""
    idx = tuple(int(i) for i in indices)
    scores = []
    for i in idx:
        if not 0 <= i < test_set.n_segments:
            raise DrawError(f"segment index {i} out of range")
        s = test_set.segments[i].score
        if s is None:
            raise MissingScoreError(f"segment {test_set.segments[i].id!r} has no score")
        scores.append(float(s))
    return SampleDraw(indices=idx, scores=tuple(scores))


def draw_indices(n_total: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `n` of `n_total` indices uniformly without replacement.

    Implemented by ranking one uniform key per index, so the same generator
    state always yields the same draw and sub-budgets nest naturally.
    """
    if not 1 <= n <= n_total:
        raise DrawError(f"sample size {n} out of range [1, {n_total}]")
    keys = rng.random(n_total)
    if n == n_total:
        return np.arange(n_total, dtype=np.intp)
    return np.argpartition(keys, n)[:n].astype(np.intp)


def random_sample(test_set: TestSet, n: int, rng: np.random.Generator) -> SampleDraw:
    """Uniform sample of `n` segments without replacement, scores revealed."""
    return reveal(test_set, draw_indices(test_set.n_segments, n, rng))


def sample_mean(draw: SampleDraw) -> Estimate:
    """The baseline estimator: the plain mean of the sampled scores."""
    return Estimate(value=float(draw.scores_array().mean()), method="baseline", n=draw.n)


def baseline_variance(sigma2: float, n: int, N: int) -> float:
    """Variance of the baseline estimator under sampling without replacement.

    (sigma2 / n) * (N - n) / (N - 1), where sigma2 is the population variance
    of the scores.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if not 1 <= n <= N:
        raise DrawError(f"sample size {n} out of range [1, {N}]")
    if sigma2 < 0:
        raise ValueError("variance must be non-negative")
    return (sigma2 / n) * (N - n) / (N - 1)
