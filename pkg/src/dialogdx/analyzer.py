"""Differential analysis over retrieved candidates.

Produces free-form reasoning text comparing the candidate diseases against
the dialogue; the text is deliberately opaque prose, consumed downstream
without imposing any structure on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .dialogue import DialogueTurn, render_dialogue
from .llm import ChatBackend, ModelConfig, Purpose, user_request
from .prompts import render_template
from .retriever import KnowledgePacket


class NoCandidates(Exception):
    def __init__(self) -> None:
        super().__init__("analysis requires at least one candidate packet")


@dataclass(frozen=True)
class AnalyzerOutput:
    thinking_text: str
    round_index: int
    candidate_ids: tuple[str, ...]


def render_candidates(packets: Sequence[KnowledgePacket]) -> str:
    """Candidates labeled in retrieval-rank order, the only ordering signal available."""
    blocks = [
        f"Candidate {i}:\n{p.rendered_text}"
        for i, p in enumerate(packets, start=1)
    ]
    return "\n\n".join(blocks)


def analyze(
    turns: Sequence[DialogueTurn],
    packets: Sequence[KnowledgePacket],
    backend: ChatBackend,
    models: ModelConfig,
    round_index: int,
    template_dir: str | None = None,
) -> AnalyzerOutput:
    if not packets:
        raise NoCandidates()
    prompt = render_template(
        "analyzer",
        template_dir=template_dir,
        history=render_dialogue(turns),
        candidates=render_candidates(packets),
    )
    thinking = backend.chat(user_request(Purpose.ANALYZER, prompt, models))
    return AnalyzerOutput(
        thinking_text=thinking,
        round_index=round_index,
        candidate_ids=tuple(p.disease_id for p in packets),
    )
