"""Turn-level dialogue primitives shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence


class Role(str, Enum):
    PATIENT = "patient"
    DOCTOR = "doctor"


@dataclass(frozen=True)
class DialogueTurn:
    """One utterance; a doctor turn shares the round_index of the patient turn it answers."""

    role: Role
    text: str
    round_index: int

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("turn text must be non-empty")
        if self.round_index < 1:
            raise ValueError("round_index is 1-based")


def render_dialogue(turns: Sequence[DialogueTurn]) -> str:
    """Readable transcript form used inside prompts: one `Role: text` line per turn."""
    labels = {Role.PATIENT: "Patient", Role.DOCTOR: "Doctor"}
    return "\n".join(f"{labels[t.role]}: {t.text}" for t in turns)


def patient_utterances(turns: Sequence[DialogueTurn]) -> list[str]:
    return [t.text for t in turns if t.role is Role.PATIENT]
