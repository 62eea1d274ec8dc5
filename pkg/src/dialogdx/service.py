"""HTTP session service over the dialogue engine.

JSON API with stable error codes; per-session requests are serialized
(a busy session rejects rather than queues, keeping latency visible),
while separate sessions run concurrently against the shared read-only
corpus and index.  Sessions are persisted write-through per round when a
transcript directory is configured, so a crash loses at most the
in-flight round.
"""

from __future__ import annotations

import copy
import logging
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import Runtime, make_engine
from .corpus import DiseaseEntry
from .engine import DialogueEngine, SessionConcluded
from .llm import ScriptExhausted
from .session import (
    Session,
    SessionStatus,
    session_to_transcript,
    transcript_to_dict,
    write_transcript,
)
from .transport import BackendUnavailable

logger = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class SessionBackend:
    """Delegating backend that keeps per-session purpose-tag counters."""

    def __init__(self, inner):
        self.inner = inner
        self.request_log = []
        self.purpose_counts: Counter[str] = Counter()

    def chat(self, request):
        self.request_log.append(request)
        self.purpose_counts[request.purpose.value] += 1
        return self.inner.chat(request)


@dataclass
class SessionSlot:
    session: Session
    engine: DialogueEngine
    backend: SessionBackend
    include_thinking: bool
    lock: threading.Lock


class CreateSessionRequest(BaseModel):
    case_id: str | None = None
    top_k: int | None = None
    index_mode: str | None = None
    analyzer_enabled: bool | None = None
    max_rounds: int | None = None
    include_thinking: bool | None = None


class MessageRequest(BaseModel):
    text: str
    include_thinking: bool | None = None


def _disease_to_dict(entry: DiseaseEntry) -> dict:
    return {
        "disease_id": entry.disease_id,
        "name": entry.name,
        "system": entry.system.value,
        "category_code": entry.category_code,
        "diagnosis_text": entry.diagnosis_text,
        "attributes": [
            {"head": t.head, "relation": t.relation, "tail": t.tail}
            for t in entry.attributes
        ],
        "record_ids": [r.record_id for r in entry.records],
    }


def _strip_thinking(transcript_dict: dict) -> dict:
    stripped = copy.deepcopy(transcript_dict)
    for round_obj in stripped.get("rounds", []):
        if round_obj.get("analysis") is not None:
            round_obj["analysis"]["thinking_text"] = None
    return stripped


def create_app(runtime: Runtime) -> FastAPI:
    app = FastAPI(title="dialogdx session service", docs_url=None, redoc_url=None)
    sessions: dict[str, SessionSlot] = {}
    sessions_lock = threading.Lock()
    fingerprint = runtime.index.corpus_fingerprint
    auth_token = None
    if runtime.config.service.auth_token_env:
        import os

        auth_token = os.environ.get(runtime.config.service.auth_token_env)

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"error": {"code": "invalid_request", "message": str(exc.errors())}},
        )

    def check_auth(request: Request) -> None:
        if auth_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {auth_token}":
            raise ApiError(401, "unauthorized", "missing or invalid bearer token")

    def get_slot(session_id: str) -> SessionSlot:
        with sessions_lock:
            slot = sessions.get(session_id)
        if slot is None:
            raise ApiError(404, "session_not_found", f"no session {session_id!r}")
        return slot

    def persist(slot: SessionSlot) -> None:
        directory = runtime.config.service.transcript_dir
        if not directory:
            return
        Path(directory).mkdir(parents=True, exist_ok=True)
        transcript = session_to_transcript(
            slot.session,
            complete=slot.session.status is SessionStatus.CONCLUDED,
            clock=runtime.clock,
        )
        write_transcript(transcript, Path(directory) / f"{slot.session.session_id}.json")

    @app.get("/health")
    async def health():
        return {"status": "ok", "corpus_fingerprint": fingerprint}

    @app.post("/sessions", status_code=201)
    async def create_session(body: CreateSessionRequest, request: Request):
        check_auth(request)
        session_backend = SessionBackend(runtime.backend)
        engine = make_engine(
            runtime,
            overrides={
                "top_k": body.top_k,
                "index_mode": body.index_mode,
                "analyzer_enabled": body.analyzer_enabled,
                "max_rounds": body.max_rounds,
            },
            backend=session_backend,
        )
        include_thinking = (
            body.include_thinking
            if body.include_thinking is not None
            else runtime.config.service.include_thinking_default
        )
        session = engine.new_session(case_id=body.case_id)
        slot = SessionSlot(
            session=session,
            engine=engine,
            backend=session_backend,
            include_thinking=include_thinking,
            lock=threading.Lock(),
        )
        with sessions_lock:
            sessions[session.session_id] = slot
        return {
            "session_id": session.session_id,
            "status": session.status.value,
            "config": session.config_snapshot,
        }

    @app.post("/sessions/{session_id}/messages")
    async def post_message(session_id: str, body: MessageRequest, request: Request):
        check_auth(request)
        if not body.text.strip():
            raise ApiError(400, "invalid_request", "text must be non-empty")
        slot = get_slot(session_id)
        if not slot.lock.acquire(blocking=False):
            raise ApiError(409, "session_busy", "a round is already in flight")
        try:
            if slot.session.status is SessionStatus.CONCLUDED:
                raise ApiError(409, "session_concluded", "session already concluded")
            round_index = slot.session.current_round
            log_mark = len(slot.backend.request_log)
            try:
                action = slot.engine.run_round(slot.session, body.text)
            except SessionConcluded:
                raise ApiError(409, "session_concluded", "session already concluded")
            except BackendUnavailable as exc:
                raise ApiError(502, "backend_unavailable", str(exc))
            except ScriptExhausted as exc:
                raise ApiError(500, "script_exhausted", str(exc))
            round_calls = Counter(
                r.purpose.value for r in slot.backend.request_log[log_mark:]
            )
            logger.info(
                "round session=%s round=%d action=%s searched=%s llm_calls=%s total=%s",
                session_id,
                round_index,
                action.kind.value,
                slot.session.round_artifacts[-1].searched,
                dict(sorted(round_calls.items())),
                dict(sorted(slot.backend.purpose_counts.items())),
            )
            persist(slot)
            artifacts = slot.session.round_artifacts[-1]
            include_thinking = (
                body.include_thinking
                if body.include_thinking is not None
                else slot.include_thinking
            )
            thinking = None
            if include_thinking and artifacts.analysis is not None:
                thinking = artifacts.analysis.thinking_text
            return {
                "session_id": session_id,
                "round_index": round_index,
                "status": slot.session.status.value,
                "gate_decision": artifacts.gate_decision,
                "searched": artifacts.searched,
                "action": {
                    "kind": action.kind.value,
                    "text": action.text,
                    "diagnosis_names": list(action.diagnosis_names),
                },
                "hits": [
                    {
                        "disease_id": h.disease_id,
                        "disease_name": runtime.corpus.get(h.disease_id).name,
                        "score": h.score,
                        "source": h.source.value,
                        "rank": h.rank,
                    }
                    for h in artifacts.hits
                ],
                "thinking": thinking,
            }
        finally:
            slot.lock.release()

    @app.get("/sessions/{session_id}")
    async def get_session(
        session_id: str, request: Request, include_thinking: bool | None = None
    ):
        check_auth(request)
        slot = get_slot(session_id)
        transcript = session_to_transcript(
            slot.session,
            complete=slot.session.status is SessionStatus.CONCLUDED,
            clock=runtime.clock,
        )
        data = transcript_to_dict(transcript)
        show = (
            include_thinking if include_thinking is not None else slot.include_thinking
        )
        return data if show else _strip_thinking(data)

    @app.get("/diseases/{disease_id}")
    async def get_disease(disease_id: str, request: Request):
        check_auth(request)
        try:
            entry = runtime.corpus.get(disease_id)
        except KeyError:
            raise ApiError(404, "disease_not_found", f"no disease {disease_id!r}")
        return _disease_to_dict(entry)

    static_dir = runtime.config.service.static_dir
    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


def serve(runtime: Runtime) -> None:
    """Run the service until interrupted."""
    import uvicorn

    app = create_app(runtime)
    uvicorn.run(
        app,
        host=runtime.config.service.host,
        port=runtime.config.service.port,
        log_level="info",
    )
