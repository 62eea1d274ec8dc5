"""Disease knowledge corpus: domain types, line-delimited file I/O, validation, stats.

A corpus directory holds three JSONL files:

* ``diseases.jsonl`` -- one disease per line: ``disease_id``, ``name``,
  ``system`` (``ModernMedicine`` or ``TCM``), ``category_code``,
  ``diagnosis_text``, and optionally an inline ``attributes`` list of
  ``{head, relation, tail}`` objects.
* ``triples.jsonl`` -- one attribute triple per line: ``disease_id``,
  ``head``, ``relation``, ``tail``.  Optional; triples may instead be
  embedded inline in the disease file.
* ``records.jsonl`` -- one medical record per line: ``record_id``,
  ``disease_id``, ``chief_complaint``, ``narrative``, and optional
  ``age`` / ``sex`` strings.

Validation rejects malformed input instead of repairing it; every failure
maps to exactly one error class below.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator


DISEASES_FILE = "diseases.jsonl"
TRIPLES_FILE = "triples.jsonl"
RECORDS_FILE = "records.jsonl"


class CorpusError(Exception):
    """Base class for corpus loading and validation failures."""


class MissingFile(CorpusError):
    def __init__(self, path: Path):
        super().__init__(f"required corpus file not found: {path}")
        self.path = path


class MalformedRecord(CorpusError):
    """A line-level record that violates the field contract."""

    def __init__(self, filename: str, line_no: int, reason: str):
        super().__init__(f"{filename}:{line_no}: {reason}")
        self.filename = filename
        self.line_no = line_no
        self.reason = reason


class DuplicateDiseaseId(CorpusError):
    def __init__(self, disease_id: str):
        super().__init__(f"duplicate disease_id: {disease_id!r}")
        self.disease_id = disease_id


class DanglingRecordReference(CorpusError):
    """A record or triple line references a disease_id that does not exist."""

    def __init__(self, filename: str, line_no: int, disease_id: str):
        super().__init__(
            f"{filename}:{line_no}: reference to unknown disease_id {disease_id!r}"
        )
        self.filename = filename
        self.line_no = line_no
        self.disease_id = disease_id


class MedicalSystem(str, Enum):
    MODERN_MEDICINE = "ModernMedicine"
    TCM = "TCM"


@dataclass(frozen=True)
class KnowledgeTriple:
    """One (head, relation, tail) attribute edge of a disease."""

    head: str
    relation: str
    tail: str


@dataclass(frozen=True)
class MedicalRecord:
    """A patient-style narrative attached to a disease."""

    record_id: str
    disease_id: str
    chief_complaint: str
    narrative: str
    age: str | None = None
    sex: str | None = None


@dataclass(frozen=True)
class DiseaseEntry:
    """One disease: identity, attribute triples, diagnosis text, and records."""

    disease_id: str
    name: str
    system: MedicalSystem
    category_code: str
    attributes: tuple[KnowledgeTriple, ...]
    diagnosis_text: str
    records: tuple[MedicalRecord, ...] = ()


@dataclass(frozen=True)
class CorpusStats:
    disease_count: int
    node_count: int
    triple_count: int
    record_count: int


@dataclass(frozen=True)
class Corpus:
    """An immutable, validated disease corpus, canonically ordered by disease_id."""

    entries: tuple[DiseaseEntry, ...]
    _by_id: dict[str, DiseaseEntry] = field(
        default=None, repr=False, compare=False  # type: ignore[assignment]
    )

    @classmethod
    def from_entries(cls, entries: Iterable[DiseaseEntry]) -> "Corpus":
        ordered = tuple(
            sorted(
                (
                    _with_sorted_records(e)
                    for e in entries
                ),
                key=lambda e: e.disease_id,
            )
        )
        seen: set[str] = set()
        for e in ordered:
            if e.disease_id in seen:
                raise DuplicateDiseaseId(e.disease_id)
            seen.add(e.disease_id)
        corpus = cls(entries=ordered)
        object.__setattr__(corpus, "_by_id", {e.disease_id: e for e in ordered})
        return corpus

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[DiseaseEntry]:
        return iter(self.entries)

    def __contains__(self, disease_id: str) -> bool:
        return disease_id in self._by_id

    def get(self, disease_id: str) -> DiseaseEntry:
        try:
            return self._by_id[disease_id]
        except KeyError:
            raise KeyError(f"unknown disease_id: {disease_id!r}") from None

    def disease_ids(self) -> tuple[str, ...]:
        return tuple(e.disease_id for e in self.entries)

    def records(self) -> Iterator[MedicalRecord]:
        for entry in self.entries:
            yield from entry.records


def _with_sorted_records(entry: DiseaseEntry) -> DiseaseEntry:
    records = tuple(sorted(entry.records, key=lambda r: r.record_id))
    if records == entry.records:
        return entry
    return DiseaseEntry(
        disease_id=entry.disease_id,
        name=entry.name,
        system=entry.system,
        category_code=entry.category_code,
        attributes=entry.attributes,
        diagnosis_text=entry.diagnosis_text,
        records=records,
    )


# ---------------------------------------------------------------------------
# Loading


def _read_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(path.name, line_no, f"invalid JSON: {exc.msg}")
            if not isinstance(obj, dict):
                raise MalformedRecord(path.name, line_no, "line is not a JSON object")
            yield line_no, obj


def _require_str(obj: dict, key: str, filename: str, line_no: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value.strip():
        raise MalformedRecord(filename, line_no, f"missing or empty field {key!r}")
    return value


def _optional_str(obj: dict, key: str, filename: str, line_no: int) -> str | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise MalformedRecord(filename, line_no, f"field {key!r} must be a string")
    return value


def _parse_triple(
    obj: dict, filename: str, line_no: int, owner: DiseaseEntry | None = None
) -> KnowledgeTriple:
    head = _require_str(obj, "head", filename, line_no)
    relation = _require_str(obj, "relation", filename, line_no)
    tail = _require_str(obj, "tail", filename, line_no)
    triple = KnowledgeTriple(head=head, relation=relation, tail=tail)
    if owner is not None and head not in (owner.name, owner.disease_id):
        raise MalformedRecord(
            filename,
            line_no,
            f"triple head {head!r} does not match disease {owner.disease_id!r}",
        )
    return triple


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a corpus directory; raises rather than repairing.

    ``diseases.jsonl`` and ``records.jsonl`` must exist; ``triples.jsonl``
    is optional when triples are embedded inline in the disease file.
    """
    base = Path(path)
    diseases_path = base / DISEASES_FILE
    records_path = base / RECORDS_FILE
    triples_path = base / TRIPLES_FILE
    if not diseases_path.is_file():
        raise MissingFile(diseases_path)
    if not records_path.is_file():
        raise MissingFile(records_path)

    diseases: dict[str, DiseaseEntry] = {}
    triples_by_disease: dict[str, list[KnowledgeTriple]] = {}

    for line_no, obj in _read_jsonl(diseases_path):
        disease_id = _require_str(obj, "disease_id", DISEASES_FILE, line_no)
        name = _require_str(obj, "name", DISEASES_FILE, line_no)
        system_raw = _require_str(obj, "system", DISEASES_FILE, line_no)
        try:
            system = MedicalSystem(system_raw)
        except ValueError:
            raise MalformedRecord(
                DISEASES_FILE, line_no, f"unknown system {system_raw!r}"
            )
        category_code = _require_str(obj, "category_code", DISEASES_FILE, line_no)
        diagnosis_text = _require_str(obj, "diagnosis_text", DISEASES_FILE, line_no)
        if disease_id in diseases:
            raise DuplicateDiseaseId(disease_id)
        entry = DiseaseEntry(
            disease_id=disease_id,
            name=name,
            system=system,
            category_code=category_code,
            attributes=(),
            diagnosis_text=diagnosis_text,
        )
        inline = obj.get("attributes", [])
        if not isinstance(inline, list):
            raise MalformedRecord(DISEASES_FILE, line_no, "attributes must be a list")
        bucket: list[KnowledgeTriple] = []
        for t in inline:
            if not isinstance(t, dict):
                raise MalformedRecord(
                    DISEASES_FILE, line_no, "attribute entries must be objects"
                )
            triple = _parse_triple(t, DISEASES_FILE, line_no, owner=entry)
            if triple in bucket:
                raise MalformedRecord(
                    DISEASES_FILE, line_no, f"duplicate triple {triple}"
                )
            bucket.append(triple)
        diseases[disease_id] = entry
        triples_by_disease[disease_id] = bucket

    if triples_path.is_file():
        for line_no, obj in _read_jsonl(triples_path):
            disease_id = _require_str(obj, "disease_id", TRIPLES_FILE, line_no)
            owner = diseases.get(disease_id)
            if owner is None:
                raise DanglingRecordReference(TRIPLES_FILE, line_no, disease_id)
            triple = _parse_triple(obj, TRIPLES_FILE, line_no, owner=owner)
            if triple in triples_by_disease[disease_id]:
                raise MalformedRecord(TRIPLES_FILE, line_no, f"duplicate triple {triple}")
            triples_by_disease[disease_id].append(triple)

    records_by_disease: dict[str, list[MedicalRecord]] = {d: [] for d in diseases}
    seen_record_ids: set[str] = set()
    for line_no, obj in _read_jsonl(records_path):
        record_id = _require_str(obj, "record_id", RECORDS_FILE, line_no)
        disease_id = _require_str(obj, "disease_id", RECORDS_FILE, line_no)
        if record_id in seen_record_ids:
            raise MalformedRecord(
                RECORDS_FILE, line_no, f"duplicate record_id {record_id!r}"
            )
        seen_record_ids.add(record_id)
        if disease_id not in diseases:
            raise DanglingRecordReference(RECORDS_FILE, line_no, disease_id)
        record = MedicalRecord(
            record_id=record_id,
            disease_id=disease_id,
            chief_complaint=_require_str(obj, "chief_complaint", RECORDS_FILE, line_no),
            narrative=_require_str(obj, "narrative", RECORDS_FILE, line_no),
            age=_optional_str(obj, "age", RECORDS_FILE, line_no),
            sex=_optional_str(obj, "sex", RECORDS_FILE, line_no),
        )
        records_by_disease[disease_id].append(record)

    entries = [
        DiseaseEntry(
            disease_id=e.disease_id,
            name=e.name,
            system=e.system,
            category_code=e.category_code,
            attributes=tuple(triples_by_disease[e.disease_id]),
            diagnosis_text=e.diagnosis_text,
            records=tuple(records_by_disease[e.disease_id]),
        )
        for e in diseases.values()
    ]
    return Corpus.from_entries(entries)


# ---------------------------------------------------------------------------
# Writing


def _disease_obj(entry: DiseaseEntry) -> dict:
    return {
        "disease_id": entry.disease_id,
        "name": entry.name,
        "system": entry.system.value,
        "category_code": entry.category_code,
        "diagnosis_text": entry.diagnosis_text,
    }


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the canonical three-file form; inverse of :func:`load_corpus`."""
    base = Path(path)
    base.mkdir(parents=True, exist_ok=True)
    with (base / DISEASES_FILE).open("w", encoding="utf-8") as fh:
        for entry in corpus:
            fh.write(json.dumps(_disease_obj(entry), ensure_ascii=False) + "\n")
    with (base / TRIPLES_FILE).open("w", encoding="utf-8") as fh:
        for entry in corpus:
            for t in entry.attributes:
                obj = {
                    "disease_id": entry.disease_id,
                    "head": t.head,
                    "relation": t.relation,
                    "tail": t.tail,
                }
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    with (base / RECORDS_FILE).open("w", encoding="utf-8") as fh:
        for record in corpus.records():
            obj = {
                "record_id": record.record_id,
                "disease_id": record.disease_id,
                "chief_complaint": record.chief_complaint,
                "narrative": record.narrative,
            }
            if record.age is not None:
                obj["age"] = record.age
            if record.sex is not None:
                obj["sex"] = record.sex
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Stats and fingerprint


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Count diseases, distinct triple entities, triples, and records.

    Node identity is the exact string after whitespace trimming
    (case-sensitive); disease nodes count when they appear in a triple.
    """
    nodes: set[str] = set()
    triple_count = 0
    record_count = 0
    for entry in corpus:
        for t in entry.attributes:
            nodes.add(t.head.strip())
            nodes.add(t.tail.strip())
            triple_count += 1
        record_count += len(entry.records)
    return CorpusStats(
        disease_count=len(corpus),
        node_count=len(nodes),
        triple_count=triple_count,
        record_count=record_count,
    )


def corpus_fingerprint(corpus: Corpus) -> str:
    """Content hash binding an index (or service) to exact corpus content."""
    digest = hashlib.sha256()
    for entry in corpus:
        payload = {
            **_disease_obj(entry),
            "attributes": [[t.head, t.relation, t.tail] for t in entry.attributes],
            "records": [
                [r.record_id, r.chief_complaint, r.narrative, r.age, r.sex]
                for r in entry.records
            ],
        }
        digest.update(json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()
