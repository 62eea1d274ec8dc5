"""Per-round candidate retrieval: gate, query construction, knowledge packets.

The query is built from the patient's utterances only -- doctor turns are
excluded so retrieval reflects the patient's own words rather than the
system's previous hypotheses.  A gating call may skip retrieval on
non-informative turns, in which case the previous round's packets are
reused (the analyzer still needs candidates even when the turn added
nothing new).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import Corpus
from .dialogue import DialogueTurn, patient_utterances, render_dialogue
from .embedding import Embedder
from .index import DualIndex, IndexMode, RetrievalHit, search, verify_fingerprint
from .llm import ChatBackend, ModelConfig, Purpose, user_request
from .prompts import render_template

logger = logging.getLogger(__name__)

TRUNCATION_MARKER = " [...]"


class NoPatientTurns(Exception):
    def __init__(self) -> None:
        super().__init__("cannot build a retrieval query without patient turns")


@dataclass(frozen=True)
class KnowledgePacket:
    """Rendered knowledge for one candidate disease, bounded in size."""

    disease_id: str
    disease_name: str
    rendered_text: str
    score: float
    source: str  # "di" | "mr"


@dataclass(frozen=True)
class RetrieverConfig:
    top_k: int = 5
    index_mode: IndexMode = IndexMode.MR
    packet_char_budget: int = 1500
    gate_enabled: bool = True

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.packet_char_budget < len(TRUNCATION_MARKER) + 1:
            raise ValueError("packet_char_budget too small")


@dataclass(frozen=True)
class RetrievalOutcome:
    """Everything one round of retrieval produced, for the session record."""

    gate_decision: bool
    searched: bool
    hits: tuple[RetrievalHit, ...]
    packets: tuple[KnowledgePacket, ...]


def build_query(turns: Sequence[DialogueTurn]) -> str:
    """Concatenate all patient utterances in order, newline-separated."""
    utterances = patient_utterances(turns)
    if not utterances:
        raise NoPatientTurns()
    return "\n".join(utterances)


def render_packet(
    corpus: Corpus, hit: RetrievalHit, char_budget: int
) -> KnowledgePacket:
    """Disease name and diagnosis text first (they carry the differential
    signal), then attribute triples as `relation: tail` lines."""
    entry = corpus.get(hit.disease_id)
    lines = [entry.name, entry.diagnosis_text]
    lines += [f"{t.relation}: {t.tail}" for t in entry.attributes]
    text = "\n".join(lines)
    if len(text) > char_budget:
        text = text[: char_budget - len(TRUNCATION_MARKER)] + TRUNCATION_MARKER
    return KnowledgePacket(
        disease_id=entry.disease_id,
        disease_name=entry.name,
        rendered_text=text,
        score=hit.score,
        source=hit.source.value,
    )


class Retriever:
    """Stateful only in counters; all per-dialogue state lives in the session."""

    def __init__(
        self,
        corpus: Corpus,
        index: DualIndex,
        embedder: Embedder,
        backend: ChatBackend,
        models: ModelConfig,
        config: RetrieverConfig | None = None,
        template_dir: str | None = None,
    ):
        verify_fingerprint(index, corpus)
        self.corpus = corpus
        self.index = index
        self.embedder = embedder
        self.backend = backend
        self.models = models
        self.config = config or RetrieverConfig()
        self.template_dir = template_dir
        self.search_count = 0

    def should_retrieve(self, turns: Sequence[DialogueTurn], latest_utterance: str) -> bool:
        """Gate one round.  The first patient turn always retrieves; later
        turns ask the gate model for YES/NO and fail open on anything else."""
        if len(patient_utterances(turns)) <= 1:
            return True
        if not self.config.gate_enabled:
            return True
        prompt = render_template(
            "gate",
            template_dir=self.template_dir,
            history=render_dialogue(turns),
            latest_utterance=latest_utterance,
        )
        try:
            answer = self.backend.chat(user_request(Purpose.GATE, prompt, self.models))
        except Exception as exc:
            logger.warning("gate backend failed (%s); retrieving anyway", exc)
            return True
        token = answer.strip().strip(".!").upper()
        if token == "NO":
            return False
        if token != "YES":
            logger.warning("unparseable gate answer %r; retrieving anyway", answer)
        return True

    def retrieve(
        self,
        turns: Sequence[DialogueTurn],
        previous: RetrievalOutcome | None = None,
    ) -> RetrievalOutcome:
        """Run one round: gate, then either a fresh search or the cached packets."""
        utterances = patient_utterances(turns)
        if not utterances:
            raise NoPatientTurns()
        decision = self.should_retrieve(turns, utterances[-1])
        if not decision and previous is not None:
            return RetrievalOutcome(
                gate_decision=False,
                searched=False,
                hits=previous.hits,
                packets=previous.packets,
            )
        query_vector = self.embedder.embed(build_query(turns))
        hits = search(self.index, query_vector, self.config.top_k, self.config.index_mode)
        self.search_count += 1
        packets = tuple(
            render_packet(self.corpus, hit, self.config.packet_char_budget)
            for hit in hits
        )
        return RetrievalOutcome(
            gate_decision=decision,
            searched=True,
            hits=tuple(hits),
            packets=packets,
        )
