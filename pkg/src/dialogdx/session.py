"""Dialogue session state and the transcript document.

A session accumulates strictly alternating patient/doctor turns plus one
artifact record per round (gate decision, hits, packets, analysis, doctor
action).  Transcripts are the single source of truth consumed by the
judge, the CLI, the HTTP service, and the UI inspector; serialization is
lossless and has a normalized form (volatile identifiers and clock fields
removed) for determinism comparisons.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable

from .analyzer import AnalyzerOutput
from .dialogue import DialogueTurn, Role
from .doctor import ActionKind, DoctorAction
from .index import IndexSource, RetrievalHit
from .retriever import KnowledgePacket

TRANSCRIPT_VERSION = 1


class SessionStatus(str, Enum):
    AWAITING_PATIENT = "awaiting_patient"
    CONCLUDED = "concluded"


@dataclass(frozen=True)
class RoundArtifacts:
    round_index: int
    gate_decision: bool
    searched: bool
    hits: tuple[RetrievalHit, ...]
    packets: tuple[KnowledgePacket, ...]
    analysis: AnalyzerOutput | None
    action: DoctorAction


@dataclass
class Session:
    session_id: str
    config_snapshot: dict[str, Any]
    turns: list[DialogueTurn] = field(default_factory=list)
    round_artifacts: list[RoundArtifacts] = field(default_factory=list)
    status: SessionStatus = SessionStatus.AWAITING_PATIENT
    case_id: str | None = None
    created_at: float = 0.0
    updated_at: float = 0.0

    @property
    def current_round(self) -> int:
        """1-based index of the round in progress or about to start."""
        return sum(1 for t in self.turns if t.role is Role.DOCTOR) + 1

    def append_patient(self, text: str) -> DialogueTurn:
        if self.turns and self.turns[-1].role is Role.PATIENT:
            raise ValueError("turns must alternate: patient turn already pending")
        turn = DialogueTurn(role=Role.PATIENT, text=text, round_index=self.current_round)
        self.turns.append(turn)
        return turn

    def append_doctor(self, text: str) -> DialogueTurn:
        if not self.turns or self.turns[-1].role is not Role.PATIENT:
            raise ValueError("turns must alternate: no pending patient turn")
        turn = DialogueTurn(role=Role.DOCTOR, text=text, round_index=self.current_round)
        self.turns.append(turn)
        return turn

    def last_outcome(self) -> RoundArtifacts | None:
        return self.round_artifacts[-1] if self.round_artifacts else None


def new_session_id() -> str:
    return f"s-{uuid.uuid4().hex[:12]}"


@dataclass(frozen=True)
class Transcript:
    """Complete record of one dialogue: turns, per-round artifacts, config."""

    session_id: str
    case_id: str | None
    status: SessionStatus
    complete: bool
    error: str | None
    config: dict[str, Any]
    turns: tuple[DialogueTurn, ...]
    rounds: tuple[RoundArtifacts, ...]
    created_at: float
    finished_at: float
    version: int = TRANSCRIPT_VERSION


def session_to_transcript(
    session: Session,
    complete: bool = True,
    error: str | None = None,
    clock: Callable[[], float] = time.time,
) -> Transcript:
    return Transcript(
        session_id=session.session_id,
        case_id=session.case_id,
        status=session.status,
        complete=complete,
        error=error,
        config=dict(session.config_snapshot),
        turns=tuple(session.turns),
        rounds=tuple(session.round_artifacts),
        created_at=session.created_at,
        finished_at=clock(),
    )


# ---------------------------------------------------------------------------
# Serialization


def _hit_to_dict(hit: RetrievalHit) -> dict:
    return {
        "disease_id": hit.disease_id,
        "score": hit.score,
        "source": hit.source.value,
        "rank": hit.rank,
    }


def _packet_to_dict(packet: KnowledgePacket) -> dict:
    return {
        "disease_id": packet.disease_id,
        "disease_name": packet.disease_name,
        "rendered_text": packet.rendered_text,
        "score": packet.score,
        "source": packet.source,
    }


def _action_to_dict(action: DoctorAction) -> dict:
    return {
        "kind": action.kind.value,
        "text": action.text,
        "diagnosis_names": list(action.diagnosis_names),
        "raw_llm_text": action.raw_llm_text,
        "parse_warning": action.parse_warning,
    }


def _round_to_dict(artifacts: RoundArtifacts) -> dict:
    analysis = None
    if artifacts.analysis is not None:
        analysis = {
            "thinking_text": artifacts.analysis.thinking_text,
            "round_index": artifacts.analysis.round_index,
            "candidate_ids": list(artifacts.analysis.candidate_ids),
        }
    return {
        "round_index": artifacts.round_index,
        "gate_decision": artifacts.gate_decision,
        "searched": artifacts.searched,
        "hits": [_hit_to_dict(h) for h in artifacts.hits],
        "packets": [_packet_to_dict(p) for p in artifacts.packets],
        "analysis": analysis,
        "action": _action_to_dict(artifacts.action),
    }


def transcript_to_dict(transcript: Transcript) -> dict:
    return {
        "version": transcript.version,
        "session_id": transcript.session_id,
        "case_id": transcript.case_id,
        "status": transcript.status.value,
        "complete": transcript.complete,
        "error": transcript.error,
        "config": transcript.config,
        "turns": [
            {"role": t.role.value, "text": t.text, "round_index": t.round_index}
            for t in transcript.turns
        ],
        "rounds": [_round_to_dict(r) for r in transcript.rounds],
        "created_at": transcript.created_at,
        "finished_at": transcript.finished_at,
    }


def transcript_from_dict(data: dict) -> Transcript:
    turns = tuple(
        DialogueTurn(role=Role(t["role"]), text=t["text"], round_index=t["round_index"])
        for t in data["turns"]
    )
    rounds = []
    for r in data["rounds"]:
        analysis = None
        if r.get("analysis") is not None:
            a = r["analysis"]
            analysis = AnalyzerOutput(
                thinking_text=a["thinking_text"],
                round_index=a["round_index"],
                candidate_ids=tuple(a["candidate_ids"]),
            )
        action = DoctorAction(
            kind=ActionKind(r["action"]["kind"]),
            text=r["action"]["text"],
            diagnosis_names=tuple(r["action"]["diagnosis_names"]),
            raw_llm_text=r["action"]["raw_llm_text"],
            parse_warning=r["action"]["parse_warning"],
        )
        rounds.append(
            RoundArtifacts(
                round_index=r["round_index"],
                gate_decision=r["gate_decision"],
                searched=r["searched"],
                hits=tuple(
                    RetrievalHit(
                        disease_id=h["disease_id"],
                        score=h["score"],
                        source=IndexSource(h["source"]),
                        rank=h["rank"],
                    )
                    for h in r["hits"]
                ),
                packets=tuple(
                    KnowledgePacket(
                        disease_id=p["disease_id"],
                        disease_name=p["disease_name"],
                        rendered_text=p["rendered_text"],
                        score=p["score"],
                        source=p["source"],
                    )
                    for p in r["packets"]
                ),
                analysis=analysis,
                action=action,
            )
        )
    return Transcript(
        session_id=data["session_id"],
        case_id=data.get("case_id"),
        status=SessionStatus(data["status"]),
        complete=data["complete"],
        error=data.get("error"),
        config=data["config"],
        turns=turns,
        rounds=tuple(rounds),
        created_at=data["created_at"],
        finished_at=data["finished_at"],
        version=data["version"],
    )


VOLATILE_FIELDS = ("session_id", "created_at", "finished_at")


def normalized_transcript_dict(data: dict) -> dict:
    """Copy with volatile identifier/clock fields removed, for comparisons."""
    return {k: v for k, v in data.items() if k not in VOLATILE_FIELDS}


def canonical_json_bytes(data: dict) -> bytes:
    return json.dumps(
        data, sort_keys=True, ensure_ascii=False, separators=(",", ":")
    ).encode("utf-8")


def write_transcript(transcript: Transcript, path: str | Path) -> None:
    payload = json.dumps(
        transcript_to_dict(transcript), sort_keys=True, ensure_ascii=False, indent=2
    )
    Path(path).write_text(payload + "\n", encoding="utf-8")


def read_transcript(path: str | Path) -> Transcript:
    return transcript_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
