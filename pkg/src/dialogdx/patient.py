"""Patient side of the dialogue: scripted replays and an LLM role-player.

The LLM patient converses from its case information under two constraints:
never reveal the diagnosed disease name, and disclose at most a couple of
new facts per reply.  Leakage is monitored, not post-filtered -- rewriting
model output would corrupt the transcript record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .corpus import Corpus
from .dialogue import DialogueTurn, Role, render_dialogue
from .llm import ChatBackend, ModelConfig, Purpose, ScriptExhausted, user_request
from .prompts import render_template


@dataclass(frozen=True)
class PatientCase:
    """One evaluation case: gold disease plus the full medical picture the
    simulated patient draws on."""

    case_id: str
    gold_disease_id: str
    gold_disease_name: str
    case_info: str
    source_tag: str = "fixture"
    script: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.case_info.strip():
            raise ValueError("case_info must be non-empty")


class PatientAgent(Protocol):
    def reply(self, case: PatientCase, turns: Sequence[DialogueTurn]) -> str: ...


class ScriptedPatient:
    """Replays fixed utterances in order; makes zero backend calls."""

    def __init__(self, utterances: Sequence[str]):
        self._utterances = list(utterances)
        self._cursor = 0

    def reply(self, case: PatientCase, turns: Sequence[DialogueTurn]) -> str:
        if self._cursor >= len(self._utterances):
            raise ScriptExhausted(Purpose.PATIENT)
        utterance = self._utterances[self._cursor]
        self._cursor += 1
        return utterance


class LLMPatient:
    def __init__(
        self,
        backend: ChatBackend,
        models: ModelConfig,
        template_dir: str | None = None,
    ):
        self.backend = backend
        self.models = models
        self.template_dir = template_dir

    def reply(self, case: PatientCase, turns: Sequence[DialogueTurn]) -> str:
        if turns and turns[-1].role is not Role.DOCTOR:
            raise ValueError("patient replies only to a doctor turn or an empty history")
        history = render_dialogue(turns) if turns else "(no conversation yet)"
        prompt = render_template(
            "patient",
            template_dir=self.template_dir,
            case_info=case.case_info,
            history=history,
        )
        return self.backend.chat(user_request(Purpose.PATIENT, prompt, self.models))


def make_patient(
    case: PatientCase,
    backend: ChatBackend,
    models: ModelConfig,
    template_dir: str | None = None,
) -> PatientAgent:
    if case.script is not None:
        return ScriptedPatient(case.script)
    return LLMPatient(backend, models, template_dir)


def leakage_count(turns: Sequence[DialogueTurn], gold_disease_name: str) -> int:
    """Patient utterances containing the gold disease name (case-insensitive)."""
    needle = gold_disease_name.lower()
    return sum(
        1
        for t in turns
        if t.role is Role.PATIENT and needle in t.text.lower()
    )


# ---------------------------------------------------------------------------
# Case files: one JSON object per line, mirroring PatientCase fields.


def load_cases(path: str | Path) -> list[PatientCase]:
    cases = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON: {exc.msg}")
            script = obj.get("script")
            cases.append(
                PatientCase(
                    case_id=obj["case_id"],
                    gold_disease_id=obj["gold_disease_id"],
                    gold_disease_name=obj["gold_disease_name"],
                    case_info=obj["case_info"],
                    source_tag=obj.get("source_tag", "imported"),
                    script=tuple(script) if script is not None else None,
                )
            )
    return cases


def write_cases(cases: Sequence[PatientCase], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for case in cases:
            obj = {
                "case_id": case.case_id,
                "gold_disease_id": case.gold_disease_id,
                "gold_disease_name": case.gold_disease_name,
                "case_info": case.case_info,
                "source_tag": case.source_tag,
            }
            if case.script is not None:
                obj["script"] = list(case.script)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def cases_from_corpus(
    corpus: Corpus,
    limit: int | None = None,
    scripted_rounds: int | None = None,
) -> list[PatientCase]:
    """One case per disease that has at least one medical record; the first
    record supplies the patient's medical picture.

    With ``scripted_rounds`` set, each case carries a fixed utterance script
    (chief complaint, then narrative, then filler) so dialogues replay
    without a patient model.
    """
    cases = []
    for entry in corpus:
        if not entry.records:
            continue
        record = entry.records[0]
        demographics = []
        if record.age:
            demographics.append(f"Age: {record.age}.")
        if record.sex:
            demographics.append(f"Sex: {record.sex}.")
        case_info = " ".join(
            demographics
            + [
                f"Chief complaint: {record.chief_complaint}.",
                f"History of present illness: {record.narrative}",
                "Known findings: "
                + "; ".join(f"{t.relation.lower()} {t.tail}" for t in entry.attributes)
                + ".",
            ]
        )
        script = None
        if scripted_rounds is not None:
            filler = ["I can't think of anything else, it's mostly what I told you."]
            script = tuple(
                ([record.chief_complaint, record.narrative] + filler * scripted_rounds)[
                    :scripted_rounds
                ]
            )
        cases.append(
            PatientCase(
                case_id=f"case-{record.record_id}",
                gold_disease_id=entry.disease_id,
                gold_disease_name=entry.name,
                case_info=case_info,
                source_tag="fixture",
                script=script,
            )
        )
        if limit is not None and len(cases) >= limit:
            break
    return cases
