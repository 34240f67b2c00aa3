import numpy as np
import pytest

from helpers import make_test_set
from strateval import (
    DegenerateMetricError,
    Session,
    SessionComplete,
    SessionError,
    metric_proxy_sigma,
    partition_by_document,
    proportional_allocation,
    true_mean,
)


def run_to_completion(session, score_of=None):
    """Drive a session with scripted ratings; returns the issue order."""
    issued = []
    while not session.is_complete:
        idx = session.next_segment()
        issued.append(idx)
        if score_of is None:
            score = session.test_set.segments[idx].score
        else:
            score = score_of(idx)
        session.submit_rating(idx, float(score))
    return issued


def docs_fixture(scores, doc_sizes):
    ts = make_test_set(scores, doc_sizes=doc_sizes)
    return ts, partition_by_document(ts)


class ForcedSigmaSession(Session):
    def __init__(self, *args, sigma, **kwargs):
        super().__init__(*args, **kwargs)
        self._forced = np.asarray(sigma, dtype=float)

    def variance_estimates(self):
        return self._forced


# --- issue order and budget ---


def test_census_issues_every_segment_once():
    ts, part = docs_fixture(range(8), [4, 4])
    session = Session(ts, part, budget=8, strategy="incr-human", seed=1)
    issued = run_to_completion(session)
    assert sorted(issued) == list(range(8))
    assert session.status == "complete"


def test_census_estimate_recovers_truth_exactly():
    # Halved bin means and equal bin weights keep the arithmetic exact.
    ts, part = docs_fixture(range(8), [4, 4])
    session = Session(ts, part, budget=8, strategy="incr-human", seed=1)
    run_to_completion(session)
    assert session.current_estimate().value == true_mean(ts)


def test_zero_weight_bin_starves_until_other_is_exhausted():
    ts, part = docs_fixture(range(12), [6, 6])
    session = ForcedSigmaSession(
        ts, part, budget=6, strategy="incr-human", seed=2, sigma=[1.0, 0.0]
    )
    issued = run_to_completion(session)
    assert [part.bin_of[i] for i in issued] == [0] * 6


def test_zero_weight_overflow_fills_from_the_other_bin():
    ts, part = docs_fixture(range(12), [6, 6])
    session = ForcedSigmaSession(
        ts, part, budget=8, strategy="incr-human", seed=2, sigma=[1.0, 0.0]
    )
    issued = run_to_completion(session)
    counts = np.bincount(part.bin_of[issued], minlength=2)
    assert counts.tolist() == [6, 2]
    assert [part.bin_of[i] for i in issued[:5]] == [0] * 5


def test_fixed_seed_replays_the_same_sequence():
    ts, part = docs_fixture(range(10), [5, 5])
    a = Session(ts, part, budget=6, strategy="incr-human", seed=42)
    b = Session(ts, part, budget=6, strategy="incr-human", seed=42)
    assert run_to_completion(a) == run_to_completion(b)


def test_next_segment_is_idempotent_until_rated():
    ts, part = docs_fixture(range(6), [3, 3])
    session = Session(ts, part, budget=3, seed=0)
    idx = session.next_segment()
    assert session.next_segment() == idx


def test_constant_spread_session_matches_batch_proportional():
    for scores, doc_sizes, budget in [
        (range(16), [4, 4, 8], 8),
        (range(10), [3, 7], 4),
    ]:
        ts, part = docs_fixture(scores, doc_sizes)
        expected = proportional_allocation(part, budget).counts
        for seed in range(3):
            session = Session(ts, part, budget=budget, strategy="proportional", seed=seed)
            run_to_completion(session, score_of=lambda i: 0.0)
            counts = np.bincount(part.bin_of[list(session.revealed)], minlength=part.n_bins)
            assert counts.tolist() == list(expected)


def test_sessions_never_repeat_segments():
    ts, part = docs_fixture(range(20), [7, 9, 4])
    for strategy in ("incr-human", "incr-metrics", "proportional"):
        for seed in range(4):
            session = Session(ts, part, budget=11, strategy=strategy, seed=seed)
            issued = run_to_completion(session)
            assert len(issued) == 11
            assert len(set(issued)) == 11
            assert set(issued) <= set(range(20))


# --- rating submission protocol ---


def test_submit_rejects_wrong_and_repeated_segments():
    ts, part = docs_fixture(range(6), [3, 3])
    session = Session(ts, part, budget=3, seed=0)
    with pytest.raises(SessionError, match="no segment pending"):
        session.submit_rating(0, 1.0)
    idx = session.next_segment()
    other = (idx + 1) % 6
    with pytest.raises(SessionError, match="not the pending segment"):
        session.submit_rating(other, 1.0)
    session.submit_rating(idx, 1.0)
    session.next_segment()
    with pytest.raises(SessionError, match="already rated"):
        session.submit_rating(idx, 2.0)


def test_submit_rejects_non_finite_scores():
    ts, part = docs_fixture(range(6), [3, 3])
    session = Session(ts, part, budget=3, seed=0)
    idx = session.next_segment()
    with pytest.raises(ValueError, match="finite"):
        session.submit_rating(idx, float("nan"))


def test_completed_session_refuses_more_work():
    ts, part = docs_fixture(range(4), [2, 2])
    session = Session(ts, part, budget=2, seed=0)
    run_to_completion(session)
    with pytest.raises(SessionComplete):
        session.next_segment()
    with pytest.raises(SessionComplete):
        session.submit_rating(0, 1.0)


def test_session_validation():
    ts, part = docs_fixture(range(4), [2, 2])
    with pytest.raises(ValueError, match="strategy"):
        Session(ts, part, budget=2, strategy="greedy")
    with pytest.raises(ValueError, match="budget"):
        Session(ts, part, budget=0)
    with pytest.raises(ValueError, match="budget"):
        Session(ts, part, budget=5)
    with pytest.raises(ValueError, match="stride"):
        Session(ts, part, budget=2, stride=0)
    other = make_test_set(range(6))
    with pytest.raises(ValueError, match="partition"):
        Session(other, part, budget=2)


def test_adaptive_strategies_need_metrics_up_front():
    ts = make_test_set(range(4), doc_sizes=[2, 2], metrics=[[], [], [], []])
    part = partition_by_document(ts)
    with pytest.raises(DegenerateMetricError):
        Session(ts, part, budget=2, strategy="incr-human")
    # The capacity-only strategy never touches metrics.
    session = Session(ts, part, budget=2, strategy="proportional", seed=0)
    assert run_to_completion(session)


# --- variance estimates ---


def test_cold_start_uses_metric_proxy():
    ts, part = docs_fixture(range(8), [4, 4])
    session = Session(ts, part, budget=4, strategy="incr-human", seed=0)
    assert session.variance_estimates() == pytest.approx(
        metric_proxy_sigma(ts, part), abs=1e-12
    )


def test_incr_human_uses_population_std_of_revealed():
    ts, part = docs_fixture([0, 0, 6, 10, 20, 30], [3, 3])
    session = Session(ts, part, budget=6, strategy="incr-human", seed=0)
    run_to_completion(session)
    sigma = session.variance_estimates()
    assert sigma[0] == pytest.approx(2.8284271247461903, abs=1e-12)
    assert sigma[1] == pytest.approx(np.std([10.0, 20.0, 30.0]), abs=1e-12)


def test_incr_human_partial_bins_keep_proxy():
    ts, part = docs_fixture(range(8), [4, 4])
    proxy = metric_proxy_sigma(ts, part)
    session = Session(ts, part, budget=4, strategy="incr-human", seed=3)
    idx = session.next_segment()
    session.submit_rating(idx, 5.0)
    sigma = session.variance_estimates()
    untouched = 1 - part.bin_of[idx]
    assert sigma[untouched] == pytest.approx(proxy[untouched], abs=1e-12)
    # One rating is still below the two needed for an empirical std.
    assert sigma[part.bin_of[idx]] == pytest.approx(proxy[part.bin_of[idx]], abs=1e-12)


def test_incr_metrics_with_everything_rated_is_exact():
    ts, part = docs_fixture([1.0, 5.0, 2.0, 8.0, 4.0, 0.5], [3, 3])
    session = Session(ts, part, budget=6, strategy="incr-metrics", seed=0)
    run_to_completion(session)
    scores = ts.scores_array()
    expected = [scores[m].std() for m in part.members]
    assert session.variance_estimates() == pytest.approx(expected, abs=1e-12)


def test_proportional_strategy_reports_unit_spread():
    ts, part = docs_fixture(range(8), [4, 4])
    session = Session(ts, part, budget=4, strategy="proportional", seed=0)
    assert session.variance_estimates().tolist() == [1.0, 1.0]


# --- final draw ---


def test_final_draw_preserves_rating_order():
    ts, part = docs_fixture(range(8), [4, 4])
    session = Session(ts, part, budget=5, seed=7)
    issued = run_to_completion(session)
    draw = session.final_draw()
    assert list(draw.indices) == issued
    assert list(draw.scores) == [float(ts.segments[i].score) for i in issued]


def test_final_draw_requires_a_rating():
    ts, part = docs_fixture(range(4), [2, 2])
    session = Session(ts, part, budget=2, seed=0)
    with pytest.raises(SessionError):
        session.final_draw()
