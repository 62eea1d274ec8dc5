"""Measurement machinery: retrieval metrics, blind LLM judging, pairwise
export for human review, and ablation runners.

Retrieval quality is scored by mean reciprocal rank and Hits@n over the
deduplicated disease ranking (what the doctor actually sees).  Judge
scoring presents dialogues in seeded-random order with method identities
hidden; output that cannot be parsed leaves the case unscored rather than
guessed or retried.
"""

from __future__ import annotations

import json
import random
import re
import statistics
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from .corpus import Corpus
from .dialogue import render_dialogue
from .embedding import Embedder
from .engine import DialogueEngine, EngineConfig
from .index import DualIndex, IndexMode, search
from .llm import ChatBackend, ModelConfig, Purpose, user_request
from .patient import PatientCase, make_patient
from .prompts import render_template
from .session import Transcript

DEFAULT_MAX_RANK = 10
DEFAULT_HITS_NS = (1, 3, 10)
DEFAULT_TOP_K_SETTINGS = (1, 3, 5, 7, 9)


class UnresolvableGold(Exception):
    def __init__(self, gold_disease_id: str):
        super().__init__(f"gold disease {gold_disease_id!r} is not in the index")
        self.gold_disease_id = gold_disease_id


class UnparseableJudgeOutput(Exception):
    """Judge text without a usable score line; raw output preserved."""

    def __init__(self, raw_text: str, reason: str):
        super().__init__(f"unparseable judge output ({reason})")
        self.raw_text = raw_text
        self.reason = reason


@dataclass(frozen=True)
class RetrievalMetrics:
    mrr: float
    hits_at: dict[int, float]
    query_count: int


@dataclass(frozen=True)
class JudgeScore:
    method_label: str
    score: int
    case_id: str
    judge_model: str
    presentation_position: int

    def __post_init__(self) -> None:
        if not 1 <= self.score <= 5:
            raise ValueError("judge scores are 1-5")


def metrics_from_ranks(
    ranks: Sequence[int | None],
    hits_ns: Sequence[int] = DEFAULT_HITS_NS,
) -> RetrievalMetrics:
    """Aggregate gold ranks (None = not retrieved within the rank cap)."""
    if not ranks:
        return RetrievalMetrics(mrr=0.0, hits_at={n: 0.0 for n in hits_ns}, query_count=0)
    reciprocal = [0.0 if r is None else 1.0 / r for r in ranks]
    hits = {
        n: sum(1 for r in ranks if r is not None and r <= n) / len(ranks)
        for n in hits_ns
    }
    return RetrievalMetrics(
        mrr=sum(reciprocal) / len(ranks),
        hits_at=hits,
        query_count=len(ranks),
    )


def gold_ranks(
    queries: Sequence[tuple[str, str]],
    index: DualIndex,
    mode: IndexMode,
    embedder: Embedder,
    max_rank: int = DEFAULT_MAX_RANK,
) -> list[int | None]:
    """Rank of each query's gold disease in the deduplicated top-``max_rank``."""
    known = index.disease_ids()
    ranks: list[int | None] = []
    for query_text, gold_id in queries:
        if gold_id not in known:
            raise UnresolvableGold(gold_id)
        hits = search(index, embedder.embed(query_text), max_rank, mode)
        rank = next((h.rank for h in hits if h.disease_id == gold_id), None)
        ranks.append(rank)
    return ranks


def retrieval_metrics(
    queries: Sequence[tuple[str, str]],
    index: DualIndex,
    mode: IndexMode,
    embedder: Embedder,
    max_rank: int = DEFAULT_MAX_RANK,
    hits_ns: Sequence[int] = DEFAULT_HITS_NS,
) -> RetrievalMetrics:
    """MRR and Hits@n over (query text, gold disease id) pairs.

    Ranks beyond ``max_rank`` contribute reciprocal rank 0.
    """
    return metrics_from_ranks(
        gold_ranks(queries, index, mode, embedder, max_rank), hits_ns
    )


# ---------------------------------------------------------------------------
# LLM judging


def seeded_shuffle(items: Sequence, seed: int) -> list:
    shuffled = list(items)
    random.Random(seed).shuffle(shuffled)
    return shuffled


_SCORE_LINE_RE = re.compile(r"Dialogue\s*(\d+)\s*[:：]\s*([0-9]+)", re.IGNORECASE)


def render_judge_dialogues(transcripts: Sequence[Transcript]) -> str:
    blocks = [
        f"Dialogue {i}:\n{render_dialogue(t.turns)}"
        for i, t in enumerate(transcripts, start=1)
    ]
    return "\n\n".join(blocks)


def judge_transcripts(
    case: PatientCase,
    labeled_transcripts: Sequence[tuple[str, Transcript]],
    backend: ChatBackend,
    models: ModelConfig,
    rng_seed: int,
) -> list[JudgeScore]:
    """Blind 1-5 scoring of one case's dialogues.

    Presentation order is a seeded shuffle; method labels never reach the
    judge prompt and are re-attached only after parsing.
    """
    if not labeled_transcripts:
        raise ValueError("need at least one transcript to judge")
    order = seeded_shuffle(range(len(labeled_transcripts)), rng_seed)
    presented = [labeled_transcripts[i][1] for i in order]
    prompt = render_template(
        "judge",
        case_info=case.case_info,
        dialogues=render_judge_dialogues(presented),
    )
    raw = backend.chat(user_request(Purpose.JUDGE, prompt, models))

    by_position: dict[int, int] = {}
    for m in _SCORE_LINE_RE.finditer(raw):
        position = int(m.group(1))
        score = int(m.group(2))
        if position in by_position:
            continue  # first occurrence wins
        by_position[position] = score

    scores = []
    for position, original_idx in enumerate(order, start=1):
        if position not in by_position:
            raise UnparseableJudgeOutput(raw, f"no score line for dialogue {position}")
        value = by_position[position]
        if not 1 <= value <= 5:
            raise UnparseableJudgeOutput(raw, f"score {value} out of range")
        label = labeled_transcripts[original_idx][0]
        scores.append(
            JudgeScore(
                method_label=label,
                score=value,
                case_id=case.case_id,
                judge_model=models.model_for(Purpose.JUDGE),
                presentation_position=position,
            )
        )
    scores.sort(key=lambda s: s.method_label)
    return scores


def export_pairwise(
    case: PatientCase,
    labeled_a: tuple[str, Transcript],
    labeled_b: tuple[str, Transcript],
    rng_seed: int,
    out_dir: str | Path,
) -> tuple[Path, Path]:
    """Write a blind two-response bundle plus a sealed label->method key."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    order = seeded_shuffle([labeled_a, labeled_b], rng_seed)
    bundle_lines = [
        "PATIENT MEDICAL INFORMATION",
        case.case_info,
        "",
    ]
    key = {}
    for i, (label, transcript) in enumerate(order, start=1):
        bundle_lines += [f"Response {i}", render_dialogue(transcript.turns), ""]
        key[f"Response {i}"] = label
    bundle_lines += [
        "Task: select the response with the more accurate diagnosis for this patient.",
    ]
    bundle_path = out / f"{case.case_id}.bundle.txt"
    key_path = out / f"{case.case_id}.key.json"
    bundle_path.write_text("\n".join(bundle_lines), encoding="utf-8")
    key_path.write_text(
        json.dumps({"case_id": case.case_id, "labels": key, "rng_seed": rng_seed}, indent=2)
        + "\n",
        encoding="utf-8",
    )
    return bundle_path, key_path


# ---------------------------------------------------------------------------
# Ablations


class AblationAxis(str, Enum):
    TOP_K = "topk"
    NO_ANALYZER = "analyzer"


@dataclass(frozen=True)
class AblationRow:
    setting: str
    mean_score: float | None
    case_count: int


@dataclass(frozen=True)
class AblationReport:
    axis: AblationAxis
    rows: tuple[AblationRow, ...]
    unscored: int
    complete: bool


@dataclass(frozen=True)
class PipelineDeps:
    """Shared read-only dependencies for batch pipeline runs."""

    corpus: Corpus
    index: DualIndex
    embedder: Embedder
    backend: ChatBackend
    clock: Callable[[], float] | None = None


def _engine_for_setting(
    deps: PipelineDeps, base_config: EngineConfig, axis: AblationAxis, setting
) -> DialogueEngine:
    if axis is AblationAxis.TOP_K:
        config = replace(base_config, retriever=replace(base_config.retriever, top_k=int(setting)))
    else:
        config = replace(base_config, analyzer_enabled=(setting == "on"))
    kwargs = {}
    if deps.clock is not None:
        kwargs["clock"] = deps.clock
    return DialogueEngine(
        deps.corpus, deps.index, deps.embedder, deps.backend, config, **kwargs
    )


def run_ablation(
    axis: AblationAxis,
    cases: Sequence[PatientCase],
    deps: PipelineDeps,
    base_config: EngineConfig,
    judge_backend: ChatBackend | None = None,
    settings: Sequence | None = None,
    rng_seed: int = 0,
) -> AblationReport:
    """Full dialogue + judging per setting, same cases and seeds throughout."""
    if settings is None:
        settings = DEFAULT_TOP_K_SETTINGS if axis is AblationAxis.TOP_K else ("on", "off")
    if not settings:
        raise ValueError("settings must be non-empty")
    judge = judge_backend or deps.backend
    rows = []
    unscored_total = 0
    incomplete = False
    for setting in settings:
        engine = _engine_for_setting(deps, base_config, axis, setting)
        scores: list[int] = []
        for case_idx, case in enumerate(cases):
            patient = make_patient(case, deps.backend, base_config.models)
            transcript = engine.run_dialogue(case, patient)
            if not transcript.complete:
                incomplete = True
                unscored_total += 1
                continue
            try:
                judged = judge_transcripts(
                    case,
                    [(str(setting), transcript)],
                    judge,
                    base_config.models,
                    rng_seed=rng_seed * 100003 + case_idx,
                )
            except UnparseableJudgeOutput:
                unscored_total += 1
                continue
            scores.append(judged[0].score)
        rows.append(
            AblationRow(
                setting=str(setting),
                mean_score=statistics.fmean(scores) if scores else None,
                case_count=len(scores),
            )
        )
    counts = {r.case_count for r in rows}
    return AblationReport(
        axis=axis,
        rows=tuple(rows),
        unscored=unscored_total,
        complete=not incomplete and unscored_total == 0 and len(counts) == 1,
    )


def ablation_report_to_dict(report: AblationReport) -> dict:
    return {
        "axis": report.axis.value,
        "rows": [
            {"setting": r.setting, "mean_score": r.mean_score, "case_count": r.case_count}
            for r in report.rows
        ],
        "unscored": report.unscored,
        "complete": report.complete,
    }
