"""The patient-facing act of each round: ask a follow-up or commit to a diagnosis.

The model is instructed to open its reply with `[INQUIRE]` or `[DIAGNOSE]`;
parsing is total over non-empty text.  A missing marker falls back to
Inquire (asking another question is the safe failure), except under the
final-round force rule, where the outcome is always a diagnosis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .dialogue import DialogueTurn, render_dialogue
from .llm import ChatBackend, ModelConfig, Purpose, user_request
from .prompts import render_template


class ActionKind(str, Enum):
    INQUIRE = "inquire"
    DIAGNOSE = "diagnose"


_MARKER_RE = re.compile(r"\[(INQUIRE|DIAGNOSE)\]", re.IGNORECASE)


class EmptyResponse(Exception):
    def __init__(self) -> None:
        super().__init__("doctor model returned empty text")


@dataclass(frozen=True)
class DoctorAction:
    kind: ActionKind
    text: str
    diagnosis_names: tuple[str, ...]
    raw_llm_text: str
    parse_warning: bool = False

    def __post_init__(self) -> None:
        if self.kind is ActionKind.INQUIRE and self.diagnosis_names:
            raise ValueError("inquire actions carry no diagnosis names")
        if not self.text:
            raise ValueError("action text must be non-empty")


def parse_action(
    raw_text: str,
    candidate_names: Sequence[str],
    force_diagnose: bool = False,
) -> DoctorAction:
    """Total parser for doctor model output.

    The first recognized marker decides the action kind; all marker tokens
    are stripped from the patient-facing text.  Diagnosis names are filled
    by case-insensitive substring match of candidate names, preserving
    candidate (retrieval-rank) order.
    """
    if not raw_text or not raw_text.strip():
        raise EmptyResponse()
    match = _MARKER_RE.search(raw_text)
    warning = False
    if match is None:
        kind = ActionKind.INQUIRE
        warning = True
    else:
        kind = ActionKind(match.group(1).lower())
    if force_diagnose and kind is not ActionKind.DIAGNOSE:
        kind = ActionKind.DIAGNOSE
        warning = True

    text = raw_text
    while _MARKER_RE.search(text):  # re-scan so nested fragments cannot survive
        text = _MARKER_RE.sub("", text)
    text = re.sub(r"[ \t]{2,}", " ", text).strip()
    if not text:
        # Marker-only reply; never leak the marker into patient-facing text.
        text = "(no statement provided)"
        warning = True

    names: tuple[str, ...] = ()
    if kind is ActionKind.DIAGNOSE:
        # Substring match at word boundaries, so a name like "X" never
        # matches inside an unrelated word.
        def mentioned(name: str) -> bool:
            pattern = r"(?<![0-9A-Za-z])" + re.escape(name) + r"(?![0-9A-Za-z])"
            return re.search(pattern, text, re.IGNORECASE) is not None

        names = tuple(dict.fromkeys(n for n in candidate_names if mentioned(n)))
    return DoctorAction(
        kind=kind,
        text=text,
        diagnosis_names=names,
        raw_llm_text=raw_text,
        parse_warning=warning,
    )


def respond(
    turns: Sequence[DialogueTurn],
    knowledge: str,
    candidate_names: Sequence[str],
    backend: ChatBackend,
    models: ModelConfig,
    force_diagnose: bool = False,
    template_dir: str | None = None,
) -> DoctorAction:
    """One doctor turn.  ``knowledge`` is the analyzer's reasoning text, or the
    raw candidate packets when the analyzer is disabled."""
    template = "doctor_force" if force_diagnose else "doctor"
    prompt = render_template(
        template,
        template_dir=template_dir,
        history=render_dialogue(turns),
        knowledge=knowledge,
    )
    raw = backend.chat(user_request(Purpose.DOCTOR, prompt, models))
    return parse_action(raw, candidate_names, force_diagnose=force_diagnose)
