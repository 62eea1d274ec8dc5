"""Dual vector index over a disease corpus.

Each disease is indexed twice: once under its formal diagnosis text (DI)
and once per attached medical-record narrative (MR).  Search is an exact
linear scan over the selected side(s) -- at corpus scale (~1k diseases,
~2k records) exactness is cheap and keeps the brute-force oracle tests
strict.  Scores are computed entry-by-entry through the shared
:func:`~dialogdx.embedding.cosine_similarity` kernel so results are
bit-reproducible.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .corpus import Corpus, corpus_fingerprint
from .embedding import DimensionMismatch, Embedder, ZeroVector, cosine_similarity

INDEX_FORMAT_VERSION = 1


class IndexingError(Exception):
    """Base class for index build/search/persistence failures."""


class EmptyCorpus(IndexingError):
    def __init__(self) -> None:
        super().__init__("cannot build an index over an empty corpus")


class EmbeddingFailed(IndexingError):
    def __init__(self, entity_id: str, cause: Exception):
        super().__init__(f"embedding failed for {entity_id!r}: {cause}")
        self.entity_id = entity_id
        self.cause = cause


class CorruptIndex(IndexingError):
    def __init__(self, reason: str):
        super().__init__(f"corrupt index file: {reason}")
        self.reason = reason


class FingerprintMismatch(IndexingError):
    def __init__(self, expected: str, actual: str):
        super().__init__(
            "index was built from different corpus content "
            f"(index {actual[:12]}..., corpus {expected[:12]}...)"
        )
        self.expected = expected
        self.actual = actual


class IndexSource(str, Enum):
    DI = "di"
    MR = "mr"


class IndexMode(str, Enum):
    DI = "di"
    MR = "mr"
    BOTH = "both"


@dataclass(frozen=True, eq=False)
class IndexEntry:
    """One indexed vector: a disease's DI text or one of its MR narratives."""

    disease_id: str
    source: IndexSource
    record_id: str | None
    vector: np.ndarray  # float32, unit norm

    def __post_init__(self) -> None:
        if self.source is IndexSource.DI and self.record_id is not None:
            raise ValueError("DI entries carry no record_id")
        if self.source is IndexSource.MR and self.record_id is None:
            raise ValueError("MR entries require a record_id")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, IndexEntry)
            and self.disease_id == other.disease_id
            and self.source is other.source
            and self.record_id == other.record_id
            and self.vector.dtype == other.vector.dtype
            and np.array_equal(self.vector, other.vector)
        )


@dataclass(frozen=True)
class RetrievalHit:
    disease_id: str
    score: float
    source: IndexSource
    rank: int


@dataclass(frozen=True)
class DualIndex:
    """Immutable pair of indexes (DI, MR) bound to corpus content by fingerprint.

    Entries are canonically ordered (DI by disease_id, MR by disease_id then
    record_id); this ordering doubles as the tie preference during search
    dedup: on exactly equal scores a disease keeps its DI entry, then its
    lowest record_id.
    """

    dim: int
    corpus_fingerprint: str
    di_entries: tuple[IndexEntry, ...]
    mr_entries: tuple[IndexEntry, ...]

    def disease_ids(self) -> frozenset[str]:
        return frozenset(e.disease_id for e in self.di_entries)

    def entry_count(self) -> int:
        return len(self.di_entries) + len(self.mr_entries)


def _unit_f32(vector: np.ndarray) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64).ravel()
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ZeroVector()
    return (v / norm).astype(np.float32)


def build_index(corpus: Corpus, embedder: Embedder) -> DualIndex:
    """Embed every diagnosis text (DI) and record narrative (MR)."""
    if len(corpus) == 0:
        raise EmptyCorpus()
    di_entries: list[IndexEntry] = []
    mr_entries: list[IndexEntry] = []
    for entry in corpus:
        try:
            vec = embedder.embed(entry.diagnosis_text)
        except Exception as exc:
            raise EmbeddingFailed(entry.disease_id, exc) from exc
        di_entries.append(
            IndexEntry(entry.disease_id, IndexSource.DI, None, _unit_f32(vec))
        )
        for record in entry.records:
            try:
                vec = embedder.embed(record.narrative)
            except Exception as exc:
                raise EmbeddingFailed(record.record_id, exc) from exc
            mr_entries.append(
                IndexEntry(entry.disease_id, IndexSource.MR, record.record_id, _unit_f32(vec))
            )
    di_entries.sort(key=lambda e: e.disease_id)
    mr_entries.sort(key=lambda e: (e.disease_id, e.record_id))
    return DualIndex(
        dim=embedder.dim,
        corpus_fingerprint=corpus_fingerprint(corpus),
        di_entries=tuple(di_entries),
        mr_entries=tuple(mr_entries),
    )


def _selected_entries(index: DualIndex, mode: IndexMode) -> tuple[IndexEntry, ...]:
    if mode is IndexMode.DI:
        return index.di_entries
    if mode is IndexMode.MR:
        return index.mr_entries
    return index.di_entries + index.mr_entries


def search(
    index: DualIndex,
    query_vector: np.ndarray,
    k: int,
    mode: IndexMode = IndexMode.MR,
) -> list[RetrievalHit]:
    """Exact top-k disease search over the selected index side(s).

    Each disease competes with its single best-scoring entry (strictly
    greater replaces, so the canonical entry order decides exact ties);
    final ranking is by score descending, then ascending disease_id.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    q = np.asarray(query_vector, dtype=np.float64).ravel()
    if q.size != index.dim:
        raise DimensionMismatch(index.dim, int(q.size))
    if np.linalg.norm(q) == 0.0:
        raise ZeroVector()
    if k == 0:
        return []

    best: dict[str, tuple[float, IndexEntry]] = {}
    for entry in _selected_entries(index, mode):
        score = cosine_similarity(entry.vector, q)
        current = best.get(entry.disease_id)
        if current is None or score > current[0]:
            best[entry.disease_id] = (score, entry)

    ranked = sorted(best.items(), key=lambda item: (-item[1][0], item[0]))[:k]
    return [
        RetrievalHit(disease_id=d, score=s, source=e.source, rank=i + 1)
        for i, (d, (s, e)) in enumerate(ranked)
    ]


# ---------------------------------------------------------------------------
# Persistence: JSONL with header, entry lines, and a trailing checksum.


def _entry_obj(entry: IndexEntry) -> dict:
    return {
        "disease_id": entry.disease_id,
        "source": entry.source.value,
        "record_id": entry.record_id,
        "vector": base64.b64encode(entry.vector.astype("<f4").tobytes()).decode("ascii"),
    }


def _entry_from_obj(obj: dict, dim: int) -> IndexEntry:
    try:
        raw = base64.b64decode(obj["vector"])
        vector = np.frombuffer(raw, dtype="<f4").copy()
        source = IndexSource(obj["source"])
        entry = IndexEntry(obj["disease_id"], source, obj.get("record_id"), vector)
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptIndex(f"bad entry line: {exc}")
    if vector.size != dim:
        raise CorruptIndex(f"entry dim {vector.size} != header dim {dim}")
    return entry


def save_index(index: DualIndex, path: str | Path) -> None:
    lines = [
        json.dumps(
            {
                "format_version": INDEX_FORMAT_VERSION,
                "dim": index.dim,
                "corpus_fingerprint": index.corpus_fingerprint,
                "di_count": len(index.di_entries),
                "mr_count": len(index.mr_entries),
            },
            sort_keys=True,
        )
    ]
    lines += [
        json.dumps(_entry_obj(e), sort_keys=True)
        for e in (*index.di_entries, *index.mr_entries)
    ]
    body = "".join(line + "\n" for line in lines)
    checksum = hashlib.sha256(body.encode("utf-8")).hexdigest()
    Path(path).write_text(body + json.dumps({"checksum": checksum}) + "\n", encoding="utf-8")


def load_index(path: str | Path, corpus: Corpus | None = None) -> DualIndex:
    """Load an index file; verifies checksum and, when given, corpus fingerprint."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptIndex(str(exc))
    lines = text.splitlines()
    if len(lines) < 2:
        raise CorruptIndex("truncated file")
    body = "".join(line + "\n" for line in lines[:-1])
    try:
        trailer = json.loads(lines[-1])
        stored_checksum = trailer["checksum"]
    except (json.JSONDecodeError, TypeError, KeyError):
        raise CorruptIndex("missing checksum trailer")
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != stored_checksum:
        raise CorruptIndex("checksum mismatch")

    try:
        header = json.loads(lines[0])
        dim = int(header["dim"])
        fingerprint = header["corpus_fingerprint"]
        di_count = int(header["di_count"])
        mr_count = int(header["mr_count"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        raise CorruptIndex("malformed header")
    entry_lines = lines[1:-1]
    if len(entry_lines) != di_count + mr_count:
        raise CorruptIndex("entry count does not match header")

    entries = []
    for line in entry_lines:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptIndex(f"bad entry line: {exc.msg}")
        entries.append(_entry_from_obj(obj, dim))
    index = DualIndex(
        dim=dim,
        corpus_fingerprint=fingerprint,
        di_entries=tuple(e for e in entries if e.source is IndexSource.DI),
        mr_entries=tuple(e for e in entries if e.source is IndexSource.MR),
    )
    if corpus is not None:
        verify_fingerprint(index, corpus)
    return index


def verify_fingerprint(index: DualIndex, corpus: Corpus) -> None:
    expected = corpus_fingerprint(corpus)
    if index.corpus_fingerprint != expected:
        raise FingerprintMismatch(expected, index.corpus_fingerprint)
