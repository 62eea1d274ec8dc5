"""Deterministic synthetic corpora for tests and demos.

Each generated disease owns a disjoint set of symptom "pairs": a technical
term (latinate pseudo-vocabulary, used in the diagnosis text) and a
colloquial phrase (plain English, used in medical-record narratives and in
held-out patient queries).  The two registers share almost no character
n-grams, which is what lets record-based retrieval outperform
diagnosis-text retrieval under the trigram test embedder, mirroring the
colloquial/professional gap in real data.

Everything is a pure function of the seed; no LLM is involved.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import (
    Corpus,
    DiseaseEntry,
    KnowledgeTriple,
    MedicalRecord,
    MedicalSystem,
)

_PREFIXES = ["hyper", "hypo", "brady", "tachy", "poly", "dys", "para", "peri", "endo", "neo"]
_ROOTS = [
    "card", "gastr", "derm", "neur", "hepat", "nephr",
    "pulmon", "arthr", "myel", "angi", "enter", "ophthalm",
]
_SUFFIXES = [
    "algia", "itis", "osis", "opathy", "emia",
    "oplegia", "orrhea", "ospasm", "otrophy", "oma",
]

_QUALITIES = [
    "burning", "dull", "sharp", "throbbing", "itchy",
    "tingling", "crampy", "stabbing", "achy", "fluttery",
]
_BODY_PARTS = [
    "tummy", "chest", "lower back", "left knee", "forehead", "throat",
    "shoulder", "ankle", "hip", "jaw", "elbow", "wrist",
]
_TIMINGS = [
    "after meals", "at night", "first thing in the morning", "when I walk",
    "after coffee", "when lying down", "during exercise", "in cold weather",
    "before bed", "when it rains",
]

_ORGANS = [
    "myocardium", "gastric mucosa", "hepatic parenchyma", "renal cortex",
    "synovium", "bronchial tree", "dermis", "optic tract",
]
_EXAMS = [
    "serum assay", "ultrasonographic", "radiographic",
    "endoscopic", "electrophysiologic", "histopathologic",
]
_MECHANISMS = [
    "autoimmune dysregulation", "ischemic compromise", "metabolic derangement",
    "neoplastic proliferation", "degenerative remodeling", "inflammatory infiltration",
]
_DURATIONS = ["two weeks", "a month", "three days", "half a year", "ten days"]
_RELATIVES = ["wife", "husband", "daughter", "son", "neighbor", "coworker"]

SYMPTOMS_PER_DISEASE = 3


@dataclass(frozen=True)
class FixtureQuery:
    """A held-out colloquial patient query with its gold disease."""

    query: str
    gold_disease_id: str


def _technical_terms() -> list[str]:
    return [p + r + s for p in _PREFIXES for r in _ROOTS for s in _SUFFIXES]


def _colloquial_phrases() -> list[str]:
    return [
        f"{q} feeling in my {b} {t}"
        for q in _QUALITIES
        for b in _BODY_PARTS
        for t in _TIMINGS
    ]


def _build(seed: int, n_diseases: int, records_per_disease: int) -> tuple[Corpus, list[FixtureQuery]]:
    if n_diseases < 1:
        raise ValueError("n_diseases must be >= 1")
    if records_per_disease < 0:
        raise ValueError("records_per_disease must be >= 0")
    capacity = len(_PREFIXES) * len(_ROOTS) * len(_SUFFIXES) // SYMPTOMS_PER_DISEASE
    if n_diseases > capacity:
        raise ValueError(f"fixture vocabulary supports at most {capacity} diseases")

    rng = random.Random(seed)
    tech_deck = _technical_terms()
    colloq_deck = _colloquial_phrases()
    rng.shuffle(tech_deck)
    rng.shuffle(colloq_deck)

    entries: list[DiseaseEntry] = []
    queries: list[FixtureQuery] = []
    for i in range(n_diseases):
        lo = i * SYMPTOMS_PER_DISEASE
        tech = tech_deck[lo : lo + SYMPTOMS_PER_DISEASE]
        colloq = colloq_deck[lo : lo + SYMPTOMS_PER_DISEASE]
        system = MedicalSystem.TCM if rng.random() < 0.3 else MedicalSystem.MODERN_MEDICINE
        kind = "pattern" if system is MedicalSystem.TCM else "disease"
        name = f"{tech[0].capitalize()} {kind}"
        disease_id = f"D{i + 1:03d}"
        organ = rng.choice(_ORGANS)
        exam = rng.choice(_EXAMS)
        mechanism = rng.choice(_MECHANISMS)
        diagnosis_text = (
            f"{name} is a disorder of the {organ} characterized by {tech[0]}, "
            f"{tech[1]}, and {tech[2]}. Diagnostic evaluation typically demonstrates "
            f"{tech[0]} with corroborating {exam} findings. The pathogenesis involves "
            f"{mechanism} of the {organ}. Differential assessment should document "
            f"{tech[1]} and exclude structural lesions of the {organ}."
        )
        attributes = tuple(
            [KnowledgeTriple(head=name, relation="Symptom", tail=t) for t in tech]
            + [
                KnowledgeTriple(head=name, relation="Examination", tail=exam),
                KnowledgeTriple(head=name, relation="Pathogenesis", tail=mechanism),
            ]
        )
        records = []
        for j in range(records_per_disease):
            duration = rng.choice(_DURATIONS)
            relative = rng.choice(_RELATIVES)
            age = str(rng.randint(18, 90))
            sex = rng.choice(["female", "male"])
            c1, c2, c3 = colloq
            if j % 2 == 0:
                narrative = (
                    f"Doctor, for about {duration} now I've had a {c1}. It keeps "
                    f"coming back and I also notice a {c2}. My {relative} told me "
                    f"I should finally get it checked out."
                )
            else:
                narrative = (
                    f"I keep getting this {c2}, and lately there's been a {c3} too. "
                    f"Nothing I try seems to help. It all started around {duration} ago."
                )
            records.append(
                MedicalRecord(
                    record_id=f"{disease_id}-R{j + 1:02d}",
                    disease_id=disease_id,
                    chief_complaint=f"I've got this {c1}",
                    narrative=narrative,
                    age=age,
                    sex=sex,
                )
            )
        entries.append(
            DiseaseEntry(
                disease_id=disease_id,
                name=name,
                system=system,
                category_code=f"{chr(65 + i % 26)}{i:02d}.{i % 10}",
                attributes=attributes,
                diagnosis_text=diagnosis_text,
                records=tuple(records),
            )
        )
        queries.append(
            FixtureQuery(
                query=(
                    f"Hi doctor, I've been dealing with a {colloq[0]} and sometimes "
                    f"a {colloq[1]}. What could this be?"
                ),
                gold_disease_id=disease_id,
            )
        )
    return Corpus.from_entries(entries), queries


def generate_fixture(seed: int, n_diseases: int, records_per_disease: int) -> Corpus:
    """Deterministic synthetic corpus; identical output for identical arguments."""
    corpus, _ = _build(seed, n_diseases, records_per_disease)
    return corpus


def generate_fixture_queries(
    seed: int, n_diseases: int, records_per_disease: int
) -> list[FixtureQuery]:
    """Held-out colloquial queries aligned with :func:`generate_fixture`.

    Queries reuse each disease's colloquial symptom phrases under a fresh
    sentence template, so they resemble record narratives without equaling
    any indexed text.
    """
    _, queries = _build(seed, n_diseases, records_per_disease)
    return queries
