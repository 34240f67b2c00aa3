import numpy as np
import pytest

from helpers import make_test_set
from strateval import (
    DegenerateMetricError,
    DegenerateVariateError,
    Partition,
    SampleDraw,
    Variate,
    combined_estimate,
    cv_estimate_multi,
    cv_estimate_scalar,
    knn_fit,
    knn_predict,
    multi_variate,
    reveal,
    stratified_estimate,
    true_mean,
    variate_from_knn,
    variate_from_metric,
    variate_mean_of_metrics,
)
from strateval.metrics import zscore


# --- variate construction ---


def test_variate_from_metric_z_scores_the_column():
    ts = make_test_set([0, 0, 0], metrics=[[1.0], [2.0], [3.0]])
    v = variate_from_metric(ts)
    assert v.kind == "single-metric"
    assert v.values == pytest.approx(
        [-1.224744871391589, 0.0, 1.224744871391589], abs=1e-12
    )


def test_variate_from_metric_is_idempotent_on_standardized_input():
    z = zscore(np.array([4.0, 1.0, 7.0, 2.0]))
    ts = make_test_set([0] * 4, metrics=[[x] for x in z])
    assert variate_from_metric(ts).values == pytest.approx(z, abs=1e-9)


def test_variate_from_metric_rejects_constant_and_bad_index():
    ts = make_test_set([0, 0], metrics=[[5.0], [5.0]])
    with pytest.raises(DegenerateMetricError):
        variate_from_metric(ts)
    with pytest.raises(ValueError, match="metric index"):
        variate_from_metric(make_test_set([0, 0]), metric_index=3)


def test_variate_mean_of_metrics_single_column_reduction():
    ts = make_test_set([0, 0, 0], metrics=[[1.0], [5.0], [2.0]])
    assert variate_mean_of_metrics(ts).values == pytest.approx(
        variate_from_metric(ts).values, abs=1e-12
    )


def test_variate_mean_of_metrics_duplicated_columns():
    ts = make_test_set([0, 0, 0], metrics=[[1, 1], [5, 5], [2, 2]])
    assert variate_mean_of_metrics(ts).values == pytest.approx(
        variate_from_metric(ts).values, abs=1e-12
    )


def test_variate_mean_of_metrics_anticorrelated_pair_errors():
    x = [1.0, 5.0, 2.0]
    ts = make_test_set([0, 0, 0], metrics=[[v, -v] for v in x])
    with pytest.raises(DegenerateVariateError):
        variate_mean_of_metrics(ts)


def test_multi_variate_columns_standardized(mqm_like):
    v = multi_variate(mqm_like)
    assert not v.is_scalar
    assert v.width == mqm_like.n_metrics
    assert np.allclose(v.values.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(v.values.var(axis=0), 1.0, atol=1e-9)


def test_variate_rejects_unstandardized_values():
    with pytest.raises(ValueError, match="standardized"):
        Variate(np.array([1.0, 2.0, 3.0]), kind="single-metric")
    with pytest.raises(ValueError, match="kind"):
        Variate(np.array([-1.0, 1.0]), kind="mystery")
    with pytest.raises(ValueError, match="finite"):
        Variate(np.array([np.nan, 1.0]), kind="single-metric")


# --- knn-based variates ---


def test_knn_fit_stores_sampled_rows(mqm_like):
    draw = reveal(mqm_like, [3, 10, 50])
    model = knn_fit(mqm_like, draw, k=2)
    assert model.features.shape == (3, mqm_like.n_metrics)
    assert model.targets.tolist() == list(draw.scores)


def test_knn_predict_on_training_point(mqm_like):
    draw = reveal(mqm_like, [3, 10, 50])
    model = knn_fit(mqm_like, draw, k=1)
    assert knn_predict(model, model.features[1]) == draw.scores[1]


def test_variate_from_knn_single_rating_is_degenerate(mqm_like):
    draw = reveal(mqm_like, [0])
    with pytest.raises(DegenerateVariateError):
        variate_from_knn(mqm_like, draw)


def test_variate_from_knn_recovers_linear_relation():
    # Scores linear in the only metric, every segment rated, k=1: the
    # prediction column is the score column itself.
    scores = [2.0, 9.0, 4.0, 7.0, 1.0, 3.0]
    ts = make_test_set(scores, metrics=[[s] for s in scores])
    draw = reveal(ts, range(6))
    v = variate_from_knn(ts, draw, k=1)
    corr = np.corrcoef(v.values, ts.scores_array())[0, 1]
    assert corr == pytest.approx(1.0, abs=1e-9)


def test_variate_from_knn_is_deterministic(mqm_like):
    draw = reveal(mqm_like, [5, 9, 14, 77, 130])
    a = variate_from_knn(mqm_like, draw, k=3)
    b = variate_from_knn(mqm_like, draw, k=3)
    assert np.array_equal(a.values, b.values)
    assert a.kind == "knn-predictions"


# --- scalar control-variate estimator ---


def test_cv_scalar_hand_values():
    v = Variate(np.array([-1.0, 1.0]), kind="single-metric")
    draw = SampleDraw(indices=(0, 1), scores=(2.0, 4.0))
    est = cv_estimate_scalar(draw, v)
    assert est.value == 3.0
    assert est.method == "cv"


def test_cv_scalar_zero_variate_mean_leaves_sample_mean():
    v = Variate(np.array([-1.0, 1.0, -1.0, 1.0]), kind="single-metric")
    draw = SampleDraw(indices=(0, 1), scores=(6.0, 10.0))
    assert cv_estimate_scalar(draw, v, cov=123.0).value == 8.0


def test_cv_scalar_centered_and_uncentered_covariances():
    v = Variate(np.array([-1.0, -1.0, 1.0, 1.0]), kind="single-metric")
    draw = SampleDraw(indices=(0, 2, 3), scores=(3.0, 6.0, 9.0))
    # Uncentered: cov = mean([-3, 6, 9]) = 4, z-bar = 1/3.
    assert cv_estimate_scalar(draw, v).value == pytest.approx(6 - 4 / 3, abs=1e-12)
    # Centered: cov = mean([(3-6)(-4/3), 0, (9-6)(2/3)]) = 2.
    assert cv_estimate_scalar(draw, v, centered=True).value == pytest.approx(
        6 - 2 / 3, abs=1e-12
    )


def test_cv_scalar_perfect_variate_recovers_truth(mqm_like):
    scores = mqm_like.scores_array()
    v = Variate(zscore(scores), kind="single-metric")
    sigma = float(scores.std())
    rng = np.random.default_rng(4)
    for _ in range(20):
        idx = rng.choice(mqm_like.n_segments, size=40, replace=False)
        est = cv_estimate_scalar(reveal(mqm_like, idx), v, cov=sigma)
        assert est.value == pytest.approx(true_mean(mqm_like), abs=1e-9)


def test_cv_scalar_rejects_multi_variate(mqm_like):
    draw = reveal(mqm_like, [0, 1])
    with pytest.raises(ValueError):
        cv_estimate_scalar(draw, multi_variate(mqm_like))


def test_cv_estimates_depend_only_on_the_draw():
    # The same index set reached through different sampling routes gives
    # the same estimate.
    v = Variate(np.array([-1.0, -1.0, 1.0, 1.0]), kind="single-metric")
    a = SampleDraw(indices=(0, 2, 3), scores=(3.0, 6.0, 9.0))
    b = SampleDraw(indices=(3, 0, 2), scores=(9.0, 3.0, 6.0))
    assert cv_estimate_scalar(a, v).value == pytest.approx(
        cv_estimate_scalar(b, v).value, abs=1e-12
    )


# --- multi-column estimator ---


def test_cv_multi_single_column_equals_scalar():
    z = zscore(np.array([3.0, 1.0, 4.0, 1.0, 5.0]))
    scalar = Variate(z, kind="single-metric")
    multi = Variate(z[:, None], kind="multi")
    draw = SampleDraw(indices=(0, 2, 4), scores=(2.0, 8.0, 5.0))
    assert cv_estimate_multi(draw, multi).value == pytest.approx(
        cv_estimate_scalar(draw, scalar).value, abs=1e-12
    )


def test_cv_multi_drops_duplicated_column():
    z = zscore(np.array([3.0, 1.0, 4.0, 1.0, 5.0]))
    dup = Variate(np.column_stack([z, z]), kind="multi")
    single = Variate(z[:, None], kind="multi")
    draw = SampleDraw(indices=(0, 2, 4), scores=(2.0, 8.0, 5.0))
    with pytest.warns(UserWarning, match="dependent"):
        est = cv_estimate_multi(draw, dup)
    assert "dropped-columns" in est.flags
    assert est.value == pytest.approx(cv_estimate_multi(draw, single).value, abs=1e-12)


def test_cv_multi_orthonormal_columns_hand_solved():
    z1 = np.array([-1.0, -1.0, 1.0, 1.0])
    z2 = np.array([-1.0, 1.0, -1.0, 1.0])
    v = Variate(np.column_stack([z1, z2]), kind="multi")
    draw = SampleDraw(indices=(0, 1, 2), scores=(2.0, 4.0, 6.0))
    # Gram = I, E(XZ) = [0, -4/3], z-bar = [-1/3, -1/3]: 4 - 4/9.
    assert cv_estimate_multi(draw, v).value == pytest.approx(4 - 4 / 9, abs=1e-12)


def test_cv_multi_rejects_scalar_variate():
    v = Variate(np.array([-1.0, 1.0]), kind="single-metric")
    with pytest.raises(ValueError):
        cv_estimate_multi(SampleDraw(indices=(0,), scores=(1.0,)), v)


# --- combined estimator ---


def test_combined_single_bin_equals_scalar_cv():
    z = zscore(np.array([3.0, 1.0, 4.0, 1.0, 5.0]))
    v = Variate(z, kind="single-metric")
    part = Partition.from_labels([0] * 5)
    draw = SampleDraw(indices=(0, 2, 4), scores=(2.0, 8.0, 5.0))
    assert combined_estimate(draw, part, v).value == pytest.approx(
        cv_estimate_scalar(draw, v).value, abs=1e-12
    )


def test_combined_is_stratified_minus_correction():
    z = zscore(np.array([3.0, 1.0, 4.0, 1.0, 5.0, 2.0]))
    v = Variate(z, kind="single-metric")
    part = Partition.from_labels([0, 0, 0, 1, 1, 1])
    draw = SampleDraw(indices=(0, 1, 3, 5), scores=(2.0, 8.0, 5.0, 1.0))
    x = draw.scores_array()
    zs = z[list(draw.indices)]
    expected = stratified_estimate(draw, part).value - float(
        np.mean(x * zs) * zs.mean()
    )
    est = combined_estimate(draw, part, v)
    assert est.value == pytest.approx(expected, abs=1e-12)
    assert est.method == "stratified+cv"


def test_combined_propagates_partial_coverage_flag():
    z = zscore(np.array([3.0, 1.0, 4.0, 1.0]))
    v = Variate(z, kind="single-metric")
    part = Partition.from_labels([0, 0, 1, 1])
    draw = SampleDraw(indices=(0, 1), scores=(4.0, 6.0))
    assert "partial-coverage" in combined_estimate(draw, part, v).flags
