"""HTTP service hosting live human-in-the-loop retrieval sessions.

A human replaces the lookup answer oracle: the service reveals the target's
summary, asks policy-selected questions, and accepts free-text answers that
are concatenated into the retrieval context verbatim. Session state machine:

    ready_for_question --(question)--> awaiting_answer --(answer)--> ready_for_question
    ready_for_question --(finish)--> finished

Every session appends its events to a JSONL log under the data directory,
so study logs survive crashes; live state is in memory.
"""

from __future__ import annotations

import json
import random
import re
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse
from pydantic import BaseModel

from dialret.corpus import Corpus, DialogHistory, EMPTY_HISTORY, QAPair, VideoRecord
from dialret.dialog import Policy, ask, session_rng
from dialret.encoders import Encoder
from dialret.errors import PoolExhaustedError
from dialret.evaluation import compute_metrics
from dialret.retrieval import Index, RetrievalResult, vrm

_RANDOM_TARGET = re.compile(r"^random\((-?\d+)\)$")

READY = "ready_for_question"
AWAITING = "awaiting_answer"
FINISHED = "finished"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class ServiceConfig:
    policy: Policy = Policy(kind="igs_oracle")
    top_k: int = 4
    data_dir: str = "sessions"
    debug: bool = False
    subset: int | None = None
    subset_seed: int = 0
    static_dir: str | None = None


@dataclass
class LiveSession:
    session_id: str
    target: VideoRecord
    policy: Policy
    top_k: int
    rng: random.Random
    log_path: Path
    state: str = READY
    pending: QAPair | None = None
    history: DialogHistory = EMPTY_HISTORY
    trace: list[RetrievalResult] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def rounds_completed(self) -> int:
        return len(self.history)

    def log(self, event: str, **payload) -> None:
        entry = {"event": event, "session_id": self.session_id, **payload}
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False))
            fh.write("\n")


class PolicyModel(BaseModel):
    kind: str = "igs_oracle"
    seed: int | None = None
    k: int = 4


class CreateSessionRequest(BaseModel):
    target: str = "random(0)"
    policy: PolicyModel | None = None
    k: int | None = None
    corpus_ref: str | None = None


class AnswerRequest(BaseModel):
    answer: str


def _subset_corpus(corpus: Corpus, index: Index, n: int, seed: int):
    """Restrict retrieval to a deterministic n-record subset, keeping
    corpus order (the user-study protocol retrieves only within it)."""
    if n >= len(corpus):
        return corpus, index
    rng = random.Random(seed)
    keep = sorted(rng.sample(range(len(corpus)), n))
    records = [corpus.records[i] for i in keep]
    sub_corpus = Corpus(records, split_tag=f"{corpus.split_tag}-subset{n}")
    sub_index = Index(
        [corpus.records[i].id for i in keep],
        index.Y[keep],
        index.encoder_fingerprint,
    )
    return sub_corpus, sub_index


def create_app(corpus: Corpus, encoder: Encoder, index: Index,
               config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    config.policy.validate()
    if config.subset:
        corpus, index = _subset_corpus(corpus, index, config.subset,
                                       config.subset_seed)
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="dialret session service")
    sessions: dict[str, LiveSession] = {}
    registry_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    def _get_session(session_id: str) -> LiveSession:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session",
                           f"no session with id {session_id!r}")
        return session

    def _require_state(session: LiveSession, expected: str, action: str) -> None:
        if session.state != expected:
            raise ApiError(
                400, "wrong_state",
                f"cannot {action} while state is {session.state!r} "
                f"(expected {expected!r})",
            )

    def _candidates(session: LiveSession, k: int | None = None) -> list[dict]:
        result = session.trace[-1]
        out = []
        for vid, prob in result.top_k(k or session.top_k):
            out.append({
                "id": vid,
                "summary": corpus.get(vid).summary,
                "probability": prob,
            })
        return out

    def _session_view(session: LiveSession) -> dict:
        view = {
            "session_id": session.session_id,
            "state": session.state,
            "rounds_completed": session.rounds_completed,
            "target_summary": session.target.summary,
            "pending_question": session.pending.question if session.pending else None,
            "history": [[t.question, t.answer] for t in session.history.turns],
            "candidates": _candidates(session),
        }
        if config.debug:
            view["ground_truth_rank"] = session.trace[-1].rank_of[session.target.id]
        return view

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest) -> dict:
        if request.policy is not None:
            policy = Policy(kind=request.policy.kind, seed=request.policy.seed,
                            k=request.policy.k)
        else:
            policy = config.policy
        try:
            policy.validate()
        except Exception as exc:
            raise ApiError(400, "bad_policy", str(exc)) from None

        match = _RANDOM_TARGET.match(request.target)
        if match:
            rng = random.Random(int(match.group(1)))
            target = corpus.records[rng.randrange(len(corpus))]
        else:
            try:
                target = corpus.get(request.target)
            except Exception:
                raise ApiError(404, "unknown_target",
                               f"no record with id {request.target!r}") from None

        session_id = uuid.uuid4().hex
        session = LiveSession(
            session_id=session_id,
            target=target,
            policy=policy,
            top_k=request.k or config.top_k,
            rng=session_rng(policy.seed, target.id),
            log_path=data_dir / f"{session_id}.jsonl",
        )
        session.trace.append(
            vrm(target.initial_query, session.history, encoder, index)
        )
        with registry_lock:
            sessions[session_id] = session
        session.log("created", target_id=target.id, policy=policy.label(),
                    top_k=session.top_k)
        return {
            "session_id": session_id,
            "state": session.state,
            "target_summary": target.summary,
            "initial_query": target.initial_query,
            "round": 0,
            "candidates": _candidates(session),
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return _session_view(_get_session(session_id))

    @app.post("/sessions/{session_id}/question")
    def next_question(session_id: str) -> dict:
        session = _get_session(session_id)
        with session.lock:
            _require_state(session, READY, "ask a question")
            try:
                pair = ask(session.policy, session.target, session.history,
                           encoder, index, rng=session.rng)
            except PoolExhaustedError:
                raise ApiError(
                    400, "pool_exhausted",
                    "the question pool is exhausted; finish the session",
                ) from None
            session.pending = pair
            session.state = AWAITING
            round_number = session.rounds_completed + 1
            session.log("question", round=round_number, question=pair.question)
            return {"question": pair.question, "round": round_number}

    @app.post("/sessions/{session_id}/answer")
    def submit_answer(session_id: str, request: AnswerRequest) -> dict:
        session = _get_session(session_id)
        with session.lock:
            _require_state(session, AWAITING, "submit an answer")
            answer = request.answer.strip()
            if not answer:
                raise ApiError(400, "empty_answer",
                               "answer must be non-empty after trimming")
            pair = session.pending
            session.history = session.history.with_turn(
                QAPair(pair.question, answer, pair.source_index)
            )
            session.pending = None
            result = vrm(session.target.initial_query, session.history,
                         encoder, index)
            session.trace.append(result)
            session.state = READY
            round_number = session.rounds_completed
            session.log("answer", round=round_number, answer=answer)
            payload = {
                "round": round_number,
                "state": session.state,
                "candidates": _candidates(session),
            }
            if config.debug:
                payload["ground_truth_rank"] = result.rank_of[session.target.id]
            return payload

    @app.post("/sessions/{session_id}/finish")
    def finish_session(session_id: str) -> dict:
        session = _get_session(session_id)
        with session.lock:
            _require_state(session, READY, "finish")
            session.state = FINISHED
            ranks = [r.rank_of[session.target.id] for r in session.trace]
            probabilities = [r.probability_of(session.target.id)
                             for r in session.trace]
            trace = {
                "target_id": session.target.id,
                "initial_query": session.target.initial_query,
                "rounds_completed": session.rounds_completed,
                "history": [[t.question, t.answer] for t in session.history.turns],
                "rounds": [
                    {
                        "round": t,
                        "top": [
                            {"id": vid, "probability": prob}
                            for vid, prob in result.top_k(10)
                        ],
                        "ground_truth_rank": result.rank_of[session.target.id],
                        "ground_truth_probability":
                            result.probability_of(session.target.id),
                    }
                    for t, result in enumerate(session.trace)
                ],
            }
            metrics = compute_metrics([ranks[-1]]).as_obj()
            session.log("finished", ranks=ranks, probabilities=probabilities)
            return {
                "session_id": session.session_id,
                "state": session.state,
                "per_round_ranks": ranks,
                "per_round_probabilities": probabilities,
                "final_metrics": metrics,
                "trace": trace,
            }

    @app.get("/sessions/{session_id}/candidates")
    def candidates(session_id: str, k: int | None = None) -> dict:
        session = _get_session(session_id)
        return {"round": session.rounds_completed,
                "candidates": _candidates(session, k)}

    static_dir = config.static_dir
    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def home() -> str:
            return (
                "<html><body><h1>dialret session service</h1>"
                "<p>No web UI bundle configured; the JSON API is live "
                "under <code>/sessions</code>.</p></body></html>"
            )

    return app
