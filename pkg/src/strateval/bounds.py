"""Finite-sample error bounds for the sample mean of a without-replacement draw.

Both bounds give a radius t such that |estimate - true mean| <= t with
probability at least gamma.  Hoeffding needs only the score range and
includes a without-replacement correction that shrinks the radius as the
sample approaches a census; Bernstein trades a range-only tail term for a
variance-driven main term and is tighter once the sample standard
deviation is well below the range.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import TestSet


def _check_gamma(gamma: float) -> float:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    return 1.0 - gamma


def hoeffding_bound(score_range: float, n: int, n_total: int, gamma: float) -> float:
    """Range-based radius with the without-replacement factor 1 - (n-1)/N.

    A zero range (constant scores) gives a zero radius.
    """
    if score_range < 0.0:
        raise ValueError(f"score range must be non-negative, got {score_range}")
    if not 1 <= n <= n_total:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={n_total}")
    delta = _check_gamma(gamma)
    shrink = 1.0 - (n - 1) / n_total
    return score_range * math.sqrt(shrink * math.log(2.0 / delta) / (2.0 * n))


def bernstein_bound(sigma_hat: float, score_range: float, n: int, gamma: float) -> float:
    """Variance-based radius; the range only enters the O(1/n) tail term."""
    if sigma_hat < 0.0:
        raise ValueError(f"sigma_hat must be non-negative, got {sigma_hat}")
    if score_range < 0.0:
        raise ValueError(f"score range must be non-negative, got {score_range}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    delta = _check_gamma(gamma)
    log_term = math.log(3.0 / delta)
    return sigma_hat * math.sqrt(2.0 * log_term / n) + 3.0 * score_range * log_term / n


def empirical_range(test_set: TestSet, override: Optional[float] = None) -> float:
    """Score range from the data, or a caller-supplied value.

    An override is how live sessions (scores unknown up front) get a range;
    it must be positive. Constant scores give a zero range and therefore
    zero-radius bounds.
    """
    if override is not None:
        if override <= 0.0:
            raise ValueError(f"range override must be positive, got {override}")
        return float(override)
    scores = test_set.scores_array()
    return float(scores.max() - scores.min())


@dataclass(frozen=True)
class BoundSpec:
    """Which bound to evaluate and at what confidence."""

    kind: str = "hoeffding"
    gamma: float = 0.95
    r_override: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("hoeffding", "bernstein"):
            raise ValueError(f"unknown bound kind {self.kind!r}")
        _check_gamma(self.gamma)

    def radius(
        self,
        score_range: float,
        n: int,
        n_total: int,
        sigma_hat: Optional[float] = None,
    ) -> float:
        if self.kind == "hoeffding":
            return hoeffding_bound(score_range, n, n_total, self.gamma)
        if sigma_hat is None:
            raise ValueError("the Bernstein bound needs sigma_hat")
        return bernstein_bound(sigma_hat, score_range, n, self.gamma)


def sample_sigma(scores) -> float:
    """Population standard deviation of the rated scores, for Bernstein."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 1:
        raise ValueError("need at least one score")
    return float(scores.std())
