import numpy as np
import pytest
from fastapi.testclient import TestClient

from helpers import make_test_set
from strateval import (
    DegenerateVariateError,
    Session,
    combined_estimate,
    partition_by_document,
    standardized_metrics,
    variate_from_knn,
)
from strateval.service import app_from_files, create_app


@pytest.fixture()
def client(mqm_like):
    return TestClient(create_app({"mqm": mqm_like}, seed=100))


def open_session(client, **overrides):
    body = {"test_set": "mqm", "budget": 5, "seed": 123}
    body.update(overrides)
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


def rate_next(client, sid, score=None):
    nxt = client.get(f"/sessions/{sid}/next").json()
    if nxt["status"] == "complete":
        return nxt, None
    payload = {"segment_id": nxt["segment_id"], "score": score if score is not None else 1.0}
    resp = client.post(f"/sessions/{sid}/ratings", json=payload)
    assert resp.status_code == 200, resp.text
    return nxt, resp.json()


def test_healthz_reports_backend_and_test_sets(client):
    body = client.get("/healthz").json()
    assert body["status"] == "ok"
    assert body["backend"] in ("compiled", "python")
    assert body["test_sets"] == ["mqm"]


def test_create_session_payload(client):
    body = open_session(client, budget=7, strategy="incr-human", partition="docs")
    assert set(body) == {
        "session_id",
        "test_set",
        "budget",
        "n_total",
        "strategy",
        "partition",
        "gamma",
        "seed",
    }
    assert body["budget"] == 7
    assert body["n_total"] == 200
    assert body["strategy"] == "incr-human"
    assert body["seed"] == 123


def test_session_ids_are_distinct(client):
    a = open_session(client)["session_id"]
    b = open_session(client)["session_id"]
    assert a != b


def test_create_session_rejections(client):
    cases = [
        (dict(test_set="nope"), 404, "unknown test set"),
        (dict(partition="rows"), 400, "partition must be docs or metrics"),
        (dict(strategy="greedy"), 400, "strategy"),
        (dict(budget=0), 400, "budget"),
        (dict(budget=4000), 400, "budget"),
        (dict(r_override=-2.0), 400, "r_override"),
    ]
    for overrides, code, fragment in cases:
        body = {"test_set": "mqm", "budget": 5}
        body.update(overrides)
        resp = client.post("/sessions", json=body)
        assert resp.status_code == code, (overrides, resp.text)
        assert fragment in resp.json()["detail"]


def test_unknown_test_set_error_lists_available(client):
    resp = client.post("/sessions", json={"test_set": "nope", "budget": 5})
    assert "mqm" in resp.json()["detail"]


def test_unknown_session_is_404_everywhere(client):
    assert client.get("/sessions/zz/next").status_code == 404
    assert (
        client.post("/sessions/zz/ratings", json={"segment_id": "a", "score": 1}).status_code
        == 404
    )
    assert client.get("/sessions/zz/report").status_code == 404


def test_next_is_stable_until_rated(client):
    sid = open_session(client)["session_id"]
    first = client.get(f"/sessions/{sid}/next").json()
    second = client.get(f"/sessions/{sid}/next").json()
    assert first["segment_id"] == second["segment_id"]
    assert first["status"] == "active"
    assert set(first) == {"status", "segment_id", "doc_id", "metrics", "n_rated", "budget"}
    assert len(first["metrics"]) == 3


def test_rating_protocol_errors(client):
    sid = open_session(client)["session_id"]
    url = f"/sessions/{sid}/ratings"
    # Rating before asking for a segment.
    resp = client.post(url, json={"segment_id": "seg001", "score": 1.0})
    assert resp.status_code == 409
    assert "no segment pending" in resp.json()["detail"]
    pending = client.get(f"/sessions/{sid}/next").json()["segment_id"]
    # A real segment that is not the pending one.
    other = "seg001" if pending != "seg001" else "seg002"
    resp = client.post(url, json={"segment_id": other, "score": 1.0})
    assert resp.status_code == 409
    assert "not the pending segment" in resp.json()["detail"]
    # A segment id the test set has never heard of.
    resp = client.post(url, json={"segment_id": "zzz", "score": 1.0})
    assert resp.status_code == 404
    # A score that is not a finite number (sent as a bare JSON NaN token).
    resp = client.post(
        url,
        content='{"segment_id": "%s", "score": NaN}' % pending,
        headers={"content-type": "application/json"},
    )
    assert resp.status_code == 400
    assert "finite" in resp.json()["detail"]


def test_first_rating_estimate_is_that_score(client):
    sid = open_session(client)["session_id"]
    _, body = rate_next(client, sid, score=4.25)
    estimate = body["estimate"]
    assert estimate["value"] == 4.25
    assert estimate["n"] == 1
    assert estimate["cv"] == "off"
    assert estimate["bound"] is None
    assert "cv-degenerate" in estimate["flags"]


def test_round_trip_completes_with_final_report(client, mqm_like):
    sid = open_session(client, budget=6)["session_id"]
    last = None
    for _ in range(6):
        _, last = rate_next(client, sid)
    assert last["status"] == "complete"
    done = client.get(f"/sessions/{sid}/next").json()
    assert done["status"] == "complete"
    assert done["final"] == last["estimate"]
    assert done["n_rated"] == 6
    # The budget is spent; another rating attempt is refused.
    resp = client.post(
        f"/sessions/{sid}/ratings", json={"segment_id": "seg001", "score": 1.0}
    )
    assert resp.status_code == 409
    rep = client.get(f"/sessions/{sid}/report").json()
    assert rep["status"] == "complete"
    assert rep["n_rated"] == 6
    assert rep["final"] == last["estimate"]
    assert len(rep["transcript"]) == 6
    for entry in rep["transcript"]:
        assert set(entry) == {"segment_id", "score", "estimate", "bound_t"}


def test_report_carries_session_metadata(client):
    sid = open_session(client, budget=5, gamma=0.9)["session_id"]
    rep = client.get(f"/sessions/{sid}/report").json()
    assert rep["session_id"] == sid
    assert rep["test_set"] == "mqm"
    assert rep["status"] == "active"
    assert rep["budget"] == 5
    assert rep["strategy"] == "proportional"
    assert rep["partition"] == "docs"
    assert rep["gamma"] == 0.9
    assert rep["seed"] == 123
    assert rep["transcript"] == []
    assert rep["final"] is None


def test_service_replays_as_a_library_session(client, mqm_like):
    budget, k, seed = 8, 25, 77
    sid = open_session(client, budget=budget, strategy="incr-human", seed=seed)[
        "session_id"
    ]
    part = partition_by_document(mqm_like)
    twin = Session(
        mqm_like,
        part,
        budget=budget,
        strategy="incr-human",
        rng=np.random.default_rng(seed),
        k=k,
    )
    features = standardized_metrics(mqm_like)[0]
    score_of = {seg.id: seg.score for seg in mqm_like.segments}
    for _ in range(budget):
        nxt = client.get(f"/sessions/{sid}/next").json()
        twin_idx = twin.next_segment()
        assert nxt["segment_id"] == mqm_like.segments[twin_idx].id
        score = score_of[nxt["segment_id"]]
        body = client.post(
            f"/sessions/{sid}/ratings",
            json={"segment_id": nxt["segment_id"], "score": score},
        ).json()
        twin.submit_rating(twin_idx, score)
        draw = twin.final_draw()
        try:
            variate = variate_from_knn(mqm_like, draw, k, features=features)
            expected = combined_estimate(draw, part, variate).value
        except DegenerateVariateError:
            expected = twin.current_estimate().value
        assert body["estimate"]["value"] == pytest.approx(expected, abs=1e-12)


def test_small_sample_covariance_flag_when_knn_kicks_in(client):
    sid = open_session(client, budget=5, k=3, seed=5)["session_id"]
    body = None
    for i in range(5):
        _, body = rate_next(client, sid, score=float(i))
    estimate = body["estimate"]
    assert estimate["cv"] == "knn"
    assert "small-sample-covariance" in estimate["flags"]


def test_metric_free_test_set_runs_without_cv():
    ts = make_test_set([float(i) for i in range(12)], doc_sizes=[6, 6], metrics=[[]] * 12)
    client = TestClient(create_app({"plain": ts}))
    resp = client.post(
        "/sessions", json={"test_set": "plain", "budget": 3, "seed": 1}
    )
    assert resp.status_code == 201
    sid = resp.json()["session_id"]
    _, body = rate_next(client, sid, score=2.0)
    estimate = body["estimate"]
    assert estimate["cv"] == "off"
    assert "no-metrics" in estimate["flags"]


def test_adaptive_strategy_without_metrics_is_a_client_error():
    ts = make_test_set([1.0, 2.0, 3.0, 4.0], doc_sizes=[2, 2], metrics=[[]] * 4)
    client = TestClient(create_app({"plain": ts}))
    resp = client.post(
        "/sessions", json={"test_set": "plain", "budget": 2, "strategy": "incr-human"}
    )
    assert resp.status_code == 400


def test_bound_appears_once_scores_spread(client):
    sid = open_session(client, budget=5, r_override=10.0)["session_id"]
    _, body = rate_next(client, sid, score=1.0)
    # With an override the bound is available from the first rating.
    bound = body["estimate"]["bound"]
    assert bound is not None
    assert bound["kind"] == "hoeffding"
    assert bound["gamma"] == 0.95
    assert bound["t"] > 0


def test_default_seed_advances_per_session(mqm_like):
    client = TestClient(create_app({"mqm": mqm_like}, seed=40))
    a = client.post("/sessions", json={"test_set": "mqm", "budget": 3}).json()
    b = client.post("/sessions", json={"test_set": "mqm", "budget": 3}).json()
    assert a["seed"] == 40
    assert b["seed"] == 41


def test_app_from_files(tmp_path, mqm_like):
    from strateval import save_test_set

    save_test_set(mqm_like, tmp_path / "alpha.tsv")
    save_test_set(mqm_like, tmp_path / "beta.tsv")
    app = app_from_files([tmp_path / "alpha.tsv", tmp_path / "beta.tsv"])
    client = TestClient(app)
    assert client.get("/healthz").json()["test_sets"] == ["alpha", "beta"]
    with pytest.raises(ValueError, match="duplicate test set name"):
        app_from_files([tmp_path / "alpha.tsv", tmp_path / "alpha.tsv"])


def test_create_app_requires_a_test_set():
    with pytest.raises(ValueError, match="at least one"):
        create_app({})
