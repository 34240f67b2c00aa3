"""Monte Carlo comparison of sampling and estimation pipelines.

For every budget in a sweep of test-set fractions, each method draws its
sample (or replays a shared one), estimates the full-set mean score, and
the harness records the absolute error against the known truth.  Methods
that only differ in the estimator share the underlying draws, so their
comparison is paired.  Every draw comes from its own seed substream keyed
by (simulation, sampler family, size index, draw index), which makes runs
bit-reproducible regardless of method subsets or execution order.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bounds import BoundSpec, empirical_range, sample_sigma
from .incremental import Session
from .metrics import standardized_metrics
from .model import SampleDraw, TestSet, draw_indices, reveal, substream, true_mean
from .stratify import (
    Partition,
    _round_half_up,
    metric_proxy_sigma,
    optimal_allocation,
    partition_by_document,
    partition_by_metric_score,
    proportional_allocation,
    stratified_estimate,
    stratified_indices,
)
from .variates import (
    DegenerateVariateError,
    combined_estimate,
    cv_estimate_multi,
    cv_estimate_scalar,
    multi_variate,
    variate_from_knn,
    variate_from_metric,
    variate_mean_of_metrics,
)

# Sampler families; the integer is part of the seed substream path, so the
# same family replays the same draws no matter which methods consume them.
_FAMILY = {
    "random": 0,
    "docs-prop": 1,
    "docs-opt": 2,
    "metrics-prop": 3,
    "metrics-opt": 4,
    "incr-human": 5,
    "incr-metrics": 6,
}

# method id -> (sampler family, estimator)
_METHOD_TABLE = {
    "baseline": ("random", "mean"),
    "docs-prop": ("docs-prop", "strat-docs"),
    "docs-opt": ("docs-opt", "strat-docs"),
    "metrics-prop": ("metrics-prop", "strat-metrics"),
    "metrics-opt": ("metrics-opt", "strat-metrics"),
    "docs-incr-human": ("incr-human", "strat-docs"),
    "docs-incr-metrics": ("incr-metrics", "strat-docs"),
    "cv-single": ("random", "cv-single"),
    "cv-mean": ("random", "cv-mean"),
    "cv-multi": ("random", "cv-multi"),
    "cv-knn": ("random", "cv-knn"),
    "docs-prop+cv-knn": ("docs-prop", "strat-docs+cv-knn"),
    "metrics-prop+cv-knn": ("metrics-prop", "strat-metrics+cv-knn"),
}

METHODS = tuple(_METHOD_TABLE)

DEFAULT_SIZE_FRACTIONS = tuple(round(0.05 * i, 2) for i in range(1, 11))


def sample_size(fraction: float, n_total: int) -> int:
    """Budget for a fraction of the test set; at least one segment."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"size fraction must be in (0, 1], got {fraction}")
    return max(1, _round_half_up(fraction * n_total))


@dataclass(frozen=True)
class SimulationConfig:
    methods: tuple = METHODS
    size_fractions: tuple = DEFAULT_SIZE_FRACTIONS
    draws_per_size: int = 100
    master_seed: int = 0
    knn_k: int = 25
    metric_bin_size: int = 80
    cv_metric_index: int = 0
    centered_cov: bool = False
    realloc_stride: int = 1
    gamma: float = 0.95
    r_override: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(
            self, "size_fractions", tuple(float(f) for f in self.size_fractions)
        )
        if not self.methods:
            raise ValueError("no methods selected")
        unknown = [m for m in self.methods if m not in _METHOD_TABLE]
        if unknown:
            raise ValueError(
                f"unknown methods {unknown}; valid methods: {sorted(_METHOD_TABLE)}"
            )
        for f in self.size_fractions:
            if not 0.0 < f <= 1.0:
                raise ValueError(f"size fraction {f} out of (0, 1]")
        if not self.size_fractions:
            raise ValueError("no size fractions selected")
        if self.draws_per_size < 1:
            raise ValueError("draws_per_size must be >= 1")
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if self.metric_bin_size < 1:
            raise ValueError("metric_bin_size must be >= 1")
        if self.cv_metric_index < 0:
            raise ValueError("cv_metric_index must be >= 0")
        if self.realloc_stride < 1:
            raise ValueError("realloc_stride must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.r_override is not None and self.r_override <= 0:
            raise ValueError("r_override must be positive")


class _Prepared:
    """Per-test-set caches shared by every draw of a simulation."""

    def __init__(self, test_set: TestSet, config: SimulationConfig):
        self.test_set = test_set
        self.config = config
        self.scores = test_set.scores_array()
        self.mu = true_mean(test_set)
        self.n_total = test_set.n_segments
        self._cache: dict = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def features(self) -> np.ndarray:
        return self._get("features", lambda: standardized_metrics(self.test_set)[0])

    def partition(self, kind: str) -> Partition:
        if kind == "docs":
            return self._get("part-docs", lambda: partition_by_document(self.test_set))
        return self._get(
            "part-metrics",
            lambda: partition_by_metric_score(
                self.test_set, self.config.metric_bin_size
            ),
        )

    def proxy_sigma(self, kind: str) -> np.ndarray:
        return self._get(
            f"proxy-{kind}",
            lambda: metric_proxy_sigma(self.test_set, self.partition(kind)),
        )

    def allocation(self, family: str, n: int):
        def build():
            kind = "docs" if family.startswith("docs") else "metrics"
            part = self.partition(kind)
            if family.endswith("prop"):
                return part, proportional_allocation(part, n)
            return part, optimal_allocation(part, self.proxy_sigma(kind), n)

        return self._get((family, n), build)

    def variate(self, kind: str):
        builders = {
            "single": lambda: variate_from_metric(
                self.test_set, self.config.cv_metric_index
            ),
            "mean": lambda: variate_mean_of_metrics(self.test_set),
            "multi": lambda: multi_variate(self.test_set),
        }
        return self._get(f"variate-{kind}", builders[kind])


def _family_draw(
    prep: _Prepared, family: str, n: int, rng: np.random.Generator
) -> SampleDraw:
    if family == "random":
        return reveal(prep.test_set, draw_indices(prep.n_total, n, rng))
    if family in ("incr-human", "incr-metrics"):
        session = Session(
            prep.test_set,
            prep.partition("docs"),
            budget=n,
            strategy=family,
            rng=rng,
            k=prep.config.knn_k,
            stride=prep.config.realloc_stride,
        )
        while not session.is_complete:
            idx = session.next_segment()
            session.submit_rating(idx, float(prep.scores[idx]))
        return session.final_draw()
    part, alloc = prep.allocation(family, n)
    return reveal(prep.test_set, stratified_indices(part, alloc, rng))


def _knn_variate_or_fallback(prep: _Prepared, draw: SampleDraw):
    try:
        return variate_from_knn(
            prep.test_set, draw, prep.config.knn_k, features=prep.features
        )
    except DegenerateVariateError:
        return prep.variate("mean")


def _estimate(prep: _Prepared, estimator: str, draw: SampleDraw) -> float:
    centered = prep.config.centered_cov
    if estimator == "mean":
        return float(draw.scores_array().mean())
    if estimator == "strat-docs":
        return stratified_estimate(draw, prep.partition("docs")).value
    if estimator == "strat-metrics":
        return stratified_estimate(draw, prep.partition("metrics")).value
    if estimator == "cv-single":
        return cv_estimate_scalar(draw, prep.variate("single"), centered=centered).value
    if estimator == "cv-mean":
        return cv_estimate_scalar(draw, prep.variate("mean"), centered=centered).value
    if estimator == "cv-multi":
        return cv_estimate_multi(draw, prep.variate("multi")).value
    if estimator == "cv-knn":
        variate = _knn_variate_or_fallback(prep, draw)
        return cv_estimate_scalar(draw, variate, centered=centered).value
    if estimator in ("strat-docs+cv-knn", "strat-metrics+cv-knn"):
        kind = "docs" if estimator == "strat-docs+cv-knn" else "metrics"
        variate = _knn_variate_or_fallback(prep, draw)
        return combined_estimate(
            draw, prep.partition(kind), variate, centered=centered
        ).value
    raise ValueError(f"unknown estimator {estimator!r}")


def run_simulation(
    test_set: TestSet, config: SimulationConfig, sim_id: int = 0
) -> dict:
    """Absolute errors for one test set: method -> (n_sizes, n_draws) array."""
    prep = _Prepared(test_set, config)
    families = sorted({_METHOD_TABLE[m][0] for m in config.methods})
    n_sizes = len(config.size_fractions)
    errors = {
        m: np.empty((n_sizes, config.draws_per_size)) for m in config.methods
    }
    for si, fraction in enumerate(config.size_fractions):
        n = sample_size(fraction, prep.n_total)
        for d in range(config.draws_per_size):
            draws = {
                fam: _family_draw(
                    prep,
                    fam,
                    n,
                    substream(config.master_seed, sim_id, _FAMILY[fam], si, d),
                )
                for fam in families
            }
            for m in config.methods:
                family, estimator = _METHOD_TABLE[m]
                value = _estimate(prep, estimator, draws[family])
                errors[m][si, d] = abs(value - prep.mu)
    return errors


@dataclass(frozen=True, eq=False)
class MethodResult:
    """Per-simulation, per-size error summary for one method."""

    method: str
    size_fractions: tuple
    sim_ids: tuple
    err_mean: np.ndarray  # (n_sims, n_sizes) mean |error| over draws
    err_sdev: np.ndarray  # (n_sims, n_sizes) std of |error| over draws

    def __post_init__(self):
        for name in ("err_mean", "err_sdev"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (len(self.sim_ids), len(self.size_fractions)):
                raise ValueError(f"{name} has shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def by_size_error(self) -> np.ndarray:
        return self.err_mean.mean(axis=0)

    @property
    def by_size_sdev(self) -> np.ndarray:
        return self.err_sdev.mean(axis=0)

    @property
    def abs_error(self) -> float:
        return float(self.by_size_error.mean())

    @property
    def sdev(self) -> float:
        return float(self.by_size_sdev.mean())


def win_rate(result: MethodResult, baseline: MethodResult) -> float:
    """Percentage of (simulation, size) cells with strictly smaller error."""
    if (
        result.sim_ids != baseline.sim_ids
        or result.size_fractions != baseline.size_fractions
    ):
        raise ValueError("results cover different simulations or sizes")
    return float(100.0 * np.mean(result.err_mean < baseline.err_mean))


def run_suite(
    test_sets: Sequence[TestSet], config: SimulationConfig
) -> dict:
    """Run every method over every test set; returns method -> MethodResult.

    The baseline is always included because win rates are defined against
    it.
    """
    methods = config.methods
    if "baseline" not in methods:
        methods = ("baseline",) + tuple(methods)
        config = dataclasses.replace(config, methods=methods)
    sim_ids = tuple(range(len(test_sets)))
    if not sim_ids:
        raise ValueError("no test sets supplied")
    n_sizes = len(config.size_fractions)
    mean = {m: np.empty((len(sim_ids), n_sizes)) for m in methods}
    sdev = {m: np.empty((len(sim_ids), n_sizes)) for m in methods}
    for sim_id, test_set in enumerate(test_sets):
        errors = run_simulation(test_set, config, sim_id)
        for m in methods:
            mean[m][sim_id] = errors[m].mean(axis=1)
            sdev[m][sim_id] = errors[m].std(axis=1)
    return {
        m: MethodResult(
            method=m,
            size_fractions=config.size_fractions,
            sim_ids=sim_ids,
            err_mean=mean[m],
            err_sdev=sdev[m],
        )
        for m in methods
    }


def report(results: dict, baseline_method: str = "baseline") -> str:
    """Aligned text table: overall error, spread, and win rate per method."""
    if baseline_method not in results:
        raise ValueError(f"results lack the {baseline_method!r} baseline")
    base = results[baseline_method]
    width = max(len(m) for m in results) + 2
    lines = [f"{'method':<{width}}{'abs error':>11}{'sdev':>9}{'win %':>8}"]
    for m, res in results.items():
        win = "--" if m == baseline_method else f"{win_rate(res, base):.1f}"
        lines.append(
            f"{m:<{width}}{res.abs_error:>11.4f}{res.sdev:>9.4f}{win:>8}"
        )
    return "\n".join(lines)


def result_rows(results: dict, baseline_method: str = "baseline"):
    """One row per method x simulation x size, for the results CSV."""
    base = results.get(baseline_method)
    rows = []
    for m, res in results.items():
        for i, sim in enumerate(res.sim_ids):
            for j, frac in enumerate(res.size_fractions):
                win = ""
                if base is not None and m != baseline_method:
                    win = int(res.err_mean[i, j] < base.err_mean[i, j])
                rows.append(
                    (m, sim, frac, res.err_mean[i, j], res.err_sdev[i, j], win)
                )
    return rows


def curve_rows(results: dict):
    """One row per method x size, averaged over simulations (plot data)."""
    rows = []
    for m, res in results.items():
        for j, frac in enumerate(res.size_fractions):
            rows.append(
                (m, frac, float(res.by_size_error[j]), float(res.by_size_sdev[j]))
            )
    return rows


def calibration_eval(
    test_sets: Sequence[TestSet],
    config: SimulationConfig,
    bound_kind: str = "hoeffding",
    method: str = "docs-prop+cv-knn",
) -> list:
    """Coverage of the error bound along the size sweep.

    For every draw the method's estimate is compared with the bound radius;
    a draw is covered when |estimate - truth| <= t.  Returns one dict per
    size fraction with coverage %, mean radius, and mean slack, averaged
    over all draws of all test sets.
    """
    if method not in _METHOD_TABLE:
        raise ValueError(f"unknown method {method!r}")
    spec = BoundSpec(kind=bound_kind, gamma=config.gamma, r_override=config.r_override)
    family, estimator = _METHOD_TABLE[method]
    n_sizes = len(config.size_fractions)
    covered = np.zeros(n_sizes)
    radius_sum = np.zeros(n_sizes)
    slack_sum = np.zeros(n_sizes)
    total = np.zeros(n_sizes)
    for sim_id, test_set in enumerate(test_sets):
        prep = _Prepared(test_set, config)
        score_range = empirical_range(test_set, config.r_override)
        for si, fraction in enumerate(config.size_fractions):
            n = sample_size(fraction, prep.n_total)
            for d in range(config.draws_per_size):
                rng = substream(config.master_seed, sim_id, _FAMILY[family], si, d)
                draw = _family_draw(prep, family, n, rng)
                err = abs(_estimate(prep, estimator, draw) - prep.mu)
                sigma = sample_sigma(draw.scores_array())
                t = spec.radius(score_range, n, prep.n_total, sigma_hat=sigma)
                covered[si] += err <= t
                radius_sum[si] += t
                slack_sum[si] += t - err
                total[si] += 1
    return [
        {
            "size_fraction": config.size_fractions[si],
            "coverage": float(100.0 * covered[si] / total[si]),
            "mean_radius": float(radius_sum[si] / total[si]),
            "mean_slack": float(slack_sum[si] / total[si]),
        }
        for si in range(n_sizes)
    ]


def enumerate_oracle(
    test_set: TestSet,
    n: int,
    estimator: str = "mean",
    *,
    partition: Optional[Partition] = None,
    variate=None,
    cov: Optional[float] = None,
    alloc=None,
    limit: int = 2_000_000,
) -> float:
    """Exact expectation of an estimator by enumerating every draw.

    Supports the equally-likely uniform design ("mean", or "cv" with a
    fixed covariance) and the stratified design ("stratified", needs
    partition and alloc).  Guarded by `limit` on the number of draws.
    """
    import itertools

    scores = test_set.scores_array()
    n_total = test_set.n_segments
    if estimator in ("mean", "cv"):
        count = math.comb(n_total, n)
        if count > limit:
            raise ValueError(f"{count} draws exceed the enumeration limit")
        if estimator == "cv" and (variate is None or cov is None):
            raise ValueError("cv enumeration needs a variate and a fixed cov")
        values = []
        for combo in itertools.combinations(range(n_total), n):
            idx = np.array(combo)
            value = scores[idx].mean()
            if estimator == "cv":
                value -= cov * variate.values[idx].mean()
            values.append(value)
        return math.fsum(values) / count
    if estimator == "stratified":
        if partition is None or alloc is None:
            raise ValueError("stratified enumeration needs a partition and alloc")
        counts = alloc.counts_array()
        count = 1
        for members, n_l in zip(partition.members, counts):
            count *= math.comb(len(members), int(n_l))
            if count > limit:
                raise ValueError("too many stratified draws to enumerate")
        per_bin = [
            list(itertools.combinations(members.tolist(), int(n_l)))
            for members, n_l in zip(partition.members, counts)
        ]
        values = []
        for pick in itertools.product(*per_bin):
            idx = [i for chunk in pick for i in chunk]
            draw = reveal(test_set, np.array(idx, dtype=np.intp))
            values.append(stratified_estimate(draw, partition).value)
        return math.fsum(values) / count
    raise ValueError(f"unknown estimator {estimator!r}")
