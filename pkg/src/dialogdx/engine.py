"""Round-loop orchestration: patient turn -> gate -> retrieve -> analyze -> doctor.

One engine instance serves any number of sessions; all per-dialogue state
lives in the Session.  A failed stage rolls the session back to its
pre-round state so the alternation invariant holds in every reachable
state.  Dialogues terminate either by a Diagnose action or by the
max_rounds cap, which forces a diagnosis.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .analyzer import analyze, render_candidates
from .corpus import Corpus
from .doctor import ActionKind, DoctorAction, respond
from .embedding import Embedder
from .index import DualIndex
from .llm import ChatBackend, ModelConfig
from .patient import PatientAgent, PatientCase
from .retriever import Retriever, RetrieverConfig
from .session import (
    RoundArtifacts,
    Session,
    SessionStatus,
    Transcript,
    new_session_id,
    session_to_transcript,
)


class SessionConcluded(Exception):
    def __init__(self, session_id: str):
        super().__init__(f"session {session_id} has already concluded with a diagnosis")
        self.session_id = session_id


@dataclass(frozen=True)
class EngineConfig:
    max_rounds: int = 5
    analyzer_enabled: bool = True
    retriever: RetrieverConfig = field(default_factory=RetrieverConfig)
    models: ModelConfig = field(default_factory=ModelConfig)
    template_dir: str | None = None

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")

    def snapshot(self) -> dict[str, Any]:
        return {
            "max_rounds": self.max_rounds,
            "analyzer_enabled": self.analyzer_enabled,
            "retriever": {
                "top_k": self.retriever.top_k,
                "index_mode": self.retriever.index_mode.value,
                "packet_char_budget": self.retriever.packet_char_budget,
                "gate_enabled": self.retriever.gate_enabled,
            },
            "models": {
                "doctor": self.models.doctor,
                "patient": self.models.patient,
                "judge": self.models.judge,
                "analyzer": self.models.analyzer,
                "gate": self.models.gate,
            },
        }


class DialogueEngine:
    def __init__(
        self,
        corpus: Corpus,
        index: DualIndex,
        embedder: Embedder,
        backend: ChatBackend,
        config: EngineConfig | None = None,
        clock: Callable[[], float] = time.time,
        id_factory: Callable[[], str] = new_session_id,
    ):
        self.config = config or EngineConfig()
        self.corpus = corpus
        self.index = index
        self.backend = backend
        self.clock = clock
        self.id_factory = id_factory
        self.retriever = Retriever(
            corpus=corpus,
            index=index,
            embedder=embedder,
            backend=backend,
            models=self.config.models,
            config=self.config.retriever,
            template_dir=self.config.template_dir,
        )

    @property
    def search_count(self) -> int:
        return self.retriever.search_count

    def new_session(self, case_id: str | None = None, session_id: str | None = None) -> Session:
        now = self.clock()
        return Session(
            session_id=session_id or self.id_factory(),
            config_snapshot=self.config.snapshot(),
            case_id=case_id,
            created_at=now,
            updated_at=now,
        )

    def run_round(self, session: Session, patient_utterance: str) -> DoctorAction:
        """Execute one full round; concluded sessions reject further rounds."""
        if session.status is SessionStatus.CONCLUDED:
            raise SessionConcluded(session.session_id)
        round_index = session.current_round
        checkpoint = len(session.turns)
        session.append_patient(patient_utterance)
        try:
            outcome = self.retriever.retrieve(session.turns, previous=session.last_outcome())
            analysis = None
            if self.config.analyzer_enabled:
                analysis = analyze(
                    session.turns,
                    outcome.packets,
                    self.backend,
                    self.config.models,
                    round_index,
                    template_dir=self.config.template_dir,
                )
                knowledge = analysis.thinking_text
            else:
                knowledge = render_candidates(outcome.packets)
            action = respond(
                session.turns,
                knowledge,
                [p.disease_name for p in outcome.packets],
                self.backend,
                self.config.models,
                force_diagnose=round_index >= self.config.max_rounds,
                template_dir=self.config.template_dir,
            )
        except Exception:
            # Roll back the pending patient turn so alternation survives a
            # failed stage and the round can be retried.
            del session.turns[checkpoint:]
            session.updated_at = self.clock()
            raise
        session.append_doctor(action.text)
        session.round_artifacts.append(
            RoundArtifacts(
                round_index=round_index,
                gate_decision=outcome.gate_decision,
                searched=outcome.searched,
                hits=outcome.hits,
                packets=outcome.packets,
                analysis=analysis,
                action=action,
            )
        )
        if action.kind is ActionKind.DIAGNOSE:
            session.status = SessionStatus.CONCLUDED
        session.updated_at = self.clock()
        return action

    def run_dialogue(
        self,
        case: PatientCase,
        patient: PatientAgent,
        session_id: str | None = None,
    ) -> Transcript:
        """Loop patient and doctor until a diagnosis; errors yield a partial
        transcript flagged incomplete instead of propagating."""
        session = self.new_session(case_id=case.case_id, session_id=session_id)
        error = None
        try:
            while session.status is not SessionStatus.CONCLUDED:
                utterance = patient.reply(case, session.turns)
                self.run_round(session, utterance)
        except Exception as exc:
            error = f"{type(exc).__name__}: {exc}"
        return session_to_transcript(
            session, complete=error is None, error=error, clock=self.clock
        )
