"""HTTP front end for incremental rating sessions.

One process serves one or more named test sets.  A client opens a session
against a test set with a budget, then loops: GET the next segment, POST
its human score, read back the running estimate with an error bound.  The
segment sequence is deterministic given the session seed, so a transcript
can be replayed through the library to reproduce every estimate.

State is in-process; sessions live for the lifetime of the server.  Each
session has its own lock, so concurrent clients on one session cannot
interleave a next/submit pair.
"""

import threading
import uuid
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import _kernels
from .bounds import hoeffding_bound
from .incremental import Session, SessionError
from .metrics import DegenerateMetricError, standardized_metrics
from .model import TestSet
from .stratify import partition_by_document, partition_by_metric_score
from .variates import (
    SMALL_SAMPLE_N,
    DegenerateVariateError,
    combined_estimate,
    variate_from_knn,
)


class CreateSessionRequest(BaseModel):
    test_set: str
    budget: int
    strategy: str = "proportional"
    partition: str = "docs"
    gamma: float = 0.95
    r_override: Optional[float] = None
    seed: Optional[int] = None
    k: int = 25
    bin_size: int = 80


class RatingRequest(BaseModel):
    segment_id: str
    score: float


class _Box:
    """A live session plus everything needed to answer requests about it."""

    def __init__(self, session: Session, name: str, request: CreateSessionRequest,
                 seed: int, features):
        self.session = session
        self.test_set_name = name
        self.request = request
        self.seed = seed
        self.features = features  # standardized metrics, or None
        self.index_of = {seg.id: i for i, seg in enumerate(session.test_set.segments)}
        self.lock = threading.Lock()
        self.transcript: list = []
        self.final: Optional[dict] = None


def create_app(test_sets: dict, *, seed: int = 0) -> FastAPI:
    """Build the service over named test sets (name -> TestSet)."""
    if not test_sets:
        raise ValueError("at least one test set is required")
    app = FastAPI(title="strateval session service")
    # the rater console may be served from a different origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    boxes: dict[str, _Box] = {}
    registry_lock = threading.Lock()
    counter = {"n": 0}

    def get_box(session_id: str) -> _Box:
        box = boxes.get(session_id)
        if box is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return box

    def score_range(box: _Box) -> Optional[float]:
        if box.request.r_override is not None:
            return box.request.r_override
        scores = [s for s in box.session.revealed.values()]
        if len(scores) >= 2:
            r = max(scores) - min(scores)
            if r > 0:
                return r
        return None

    def estimate_payload(box: _Box) -> dict:
        session = box.session
        draw = session.final_draw()
        flags: list = []
        cv = "off"
        if box.features is None:
            est = session.current_estimate()
            flags.append("no-metrics")
        else:
            try:
                variate = variate_from_knn(
                    session.test_set, draw, box.request.k, features=box.features
                )
                est = combined_estimate(draw, session.partition, variate)
                cv = "knn"
            except DegenerateVariateError:
                est = session.current_estimate()
                flags.append("cv-degenerate")
        flags.extend(est.flags)
        if cv == "knn" and draw.n <= SMALL_SAMPLE_N:
            flags.append("small-sample-covariance")
        r = score_range(box)
        bound = None
        if r is not None:
            t = hoeffding_bound(
                r, draw.n, session.test_set.n_segments, box.request.gamma
            )
            bound = {"kind": "hoeffding", "gamma": box.request.gamma, "t": t}
        return {
            "value": est.value,
            "method": est.method,
            "cv": cv,
            "n": draw.n,
            "flags": flags,
            "bound": bound,
        }

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "backend": _kernels.BACKEND,
            "test_sets": sorted(test_sets),
        }

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        test_set = test_sets.get(req.test_set)
        if test_set is None:
            raise HTTPException(
                status_code=404,
                detail=f"unknown test set {req.test_set!r}; "
                f"available: {sorted(test_sets)}",
            )
        if req.partition not in ("docs", "metrics"):
            raise HTTPException(status_code=400, detail="partition must be docs or metrics")
        if req.r_override is not None and req.r_override <= 0:
            raise HTTPException(status_code=400, detail="r_override must be positive")
        try:
            partition = (
                partition_by_document(test_set)
                if req.partition == "docs"
                else partition_by_metric_score(test_set, req.bin_size)
            )
            with registry_lock:
                session_seed = req.seed if req.seed is not None else seed + counter["n"]
                counter["n"] += 1
            session = Session(
                test_set,
                partition,
                budget=req.budget,
                strategy=req.strategy,
                rng=np.random.default_rng(session_seed),
                k=req.k,
            )
        except (ValueError, DegenerateMetricError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        try:
            features = standardized_metrics(test_set)[0]
        except DegenerateMetricError:
            features = None
        box = _Box(session, req.test_set, req, session_seed, features)
        session_id = uuid.uuid4().hex[:12]
        with registry_lock:
            boxes[session_id] = box
        return {
            "session_id": session_id,
            "test_set": req.test_set,
            "budget": session.budget,
            "n_total": test_set.n_segments,
            "strategy": session.strategy,
            "partition": req.partition,
            "gamma": req.gamma,
            "seed": session_seed,
        }

    @app.get("/sessions/{session_id}/next")
    def next_segment(session_id: str):
        box = get_box(session_id)
        with box.lock:
            session = box.session
            progress = {"n_rated": session.n_rated, "budget": session.budget}
            if session.is_complete:
                return {"status": "complete", "final": box.final, **progress}
            idx = session.next_segment()
            seg = session.test_set.segments[idx]
            return {
                "status": "active",
                "segment_id": seg.id,
                "doc_id": seg.doc_id,
                "metrics": dict(zip(session.test_set.metric_names, seg.metrics)),
                **progress,
            }

    @app.post("/sessions/{session_id}/ratings")
    def submit_rating(session_id: str, req: RatingRequest):
        box = get_box(session_id)
        with box.lock:
            session = box.session
            if req.segment_id not in box.index_of:
                raise HTTPException(
                    status_code=404,
                    detail=f"segment {req.segment_id!r} is not in the test set",
                )
            if not np.isfinite(req.score):
                raise HTTPException(status_code=400, detail="score must be finite")
            try:
                session.submit_rating(box.index_of[req.segment_id], req.score)
            except SessionError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from None
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
            payload = estimate_payload(box)
            box.transcript.append(
                {
                    "segment_id": req.segment_id,
                    "score": req.score,
                    "estimate": payload["value"],
                    "bound_t": payload["bound"]["t"] if payload["bound"] else None,
                }
            )
            if session.is_complete:
                box.final = payload
            return {
                "status": session.status,
                "n_rated": session.n_rated,
                "budget": session.budget,
                "estimate": payload,
            }

    @app.get("/sessions/{session_id}/report")
    def session_report(session_id: str):
        box = get_box(session_id)
        with box.lock:
            session = box.session
            return {
                "session_id": session_id,
                "test_set": box.test_set_name,
                "status": session.status,
                "budget": session.budget,
                "n_rated": session.n_rated,
                "strategy": session.strategy,
                "partition": box.request.partition,
                "gamma": box.request.gamma,
                "seed": box.seed,
                "transcript": list(box.transcript),
                "final": box.final,
            }

    return app


def app_from_files(paths, **kwargs) -> FastAPI:
    """Convenience: build the app from TSV files, named by file stem."""
    from pathlib import Path

    from .dataio import load_test_set

    test_sets = {}
    for path in paths:
        name = Path(path).stem
        if name in test_sets:
            raise ValueError(f"duplicate test set name {name!r}")
        test_sets[name] = load_test_set(path)
    return create_app(test_sets, **kwargs)
