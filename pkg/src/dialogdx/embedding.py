"""Text embedding backends and the cosine similarity kernel.

Two backends share one interface: a remote OpenAI-style embeddings API for
real runs, and a dependency-free deterministic embedder (character-trigram
hashing, L2-normalized) whose monotone lexical-overlap similarity makes
ranking logic testable offline.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import numpy as np

from .transport import BackendUnavailable, post_json

__all__ = [
    "EmbedderBackend",
    "EmbedderSpec",
    "Embedder",
    "DeterministicEmbedder",
    "RemoteEmbedder",
    "make_embedder",
    "embed_text",
    "cosine_similarity",
    "EmptyText",
    "DimensionMismatch",
    "ZeroVector",
    "BackendUnavailable",
]

DEFAULT_REMOTE_MODEL = "text-embedding-3-small"


class EmbeddingError(Exception):
    pass


class EmptyText(EmbeddingError):
    def __init__(self) -> None:
        super().__init__("cannot embed empty text")


class DimensionMismatch(EmbeddingError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"dimension mismatch: expected {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class ZeroVector(EmbeddingError):
    def __init__(self) -> None:
        super().__init__("cosine similarity is undefined for a zero vector")


class EmbedderBackend(str, Enum):
    DETERMINISTIC_TEST = "deterministic"
    REMOTE_API = "remote"


@dataclass(frozen=True)
class EmbedderSpec:
    backend: EmbedderBackend = EmbedderBackend.DETERMINISTIC_TEST
    dim: int = 64
    model_name: str = DEFAULT_REMOTE_MODEL

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def _normalize_text(text: str) -> str:
    return " ".join(text.split()).lower()


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


class DeterministicEmbedder:
    """Character-trigram bag hashed into ``dim`` buckets, L2-normalized.

    Deterministic across runs and platforms (FNV-1a bucket hashing); output
    is float64 and unit-norm.  Similarity is monotone in trigram overlap,
    which is all the ranking tests need.
    """

    def __init__(self, dim: int = 64):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        normalized = _normalize_text(text)
        if not normalized:
            raise EmptyText()
        if len(normalized) < 3:
            grams = [normalized]
        else:
            grams = [normalized[i : i + 3] for i in range(len(normalized) - 2)]
        vec = np.zeros(self.dim, dtype=np.float64)
        for gram in grams:
            vec[_fnv1a64(gram.encode("utf-8")) % self.dim] += 1.0
        return vec / np.linalg.norm(vec)


class RemoteEmbedder:
    """Client for the de-facto embeddings HTTP contract (POST model + input).

    ``max_in_flight`` caps concurrent requests across threads.
    """

    def __init__(
        self,
        dim: int,
        model_name: str = DEFAULT_REMOTE_MODEL,
        base_url: str = "https://api.openai.com/v1",
        api_key: str | None = None,
        timeout: float = 60.0,
        max_in_flight: int = 4,
    ):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.model_name = model_name
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self._in_flight = threading.BoundedSemaphore(max_in_flight)

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmptyText()
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        with self._in_flight:
            body = post_json(
                f"{self.base_url}/embeddings",
                {"model": self.model_name, "input": [text]},
                headers=headers,
                timeout=self.timeout,
            )
        try:
            values = body["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError):
            raise BackendUnavailable("malformed embeddings response")
        vec = np.asarray(values, dtype=np.float64)
        if vec.ndim != 1 or vec.size != self.dim:
            raise DimensionMismatch(self.dim, int(vec.size))
        if not np.all(np.isfinite(vec)):
            raise BackendUnavailable("non-finite values in embedding")
        return vec


def make_embedder(
    spec: EmbedderSpec,
    base_url: str | None = None,
    api_key: str | None = None,
) -> Embedder:
    if spec.backend is EmbedderBackend.DETERMINISTIC_TEST:
        return DeterministicEmbedder(dim=spec.dim)
    kwargs: dict = {"dim": spec.dim, "model_name": spec.model_name}
    if base_url:
        kwargs["base_url"] = base_url
    if api_key:
        kwargs["api_key"] = api_key
    return RemoteEmbedder(**kwargs)


def embed_text(spec: EmbedderSpec, text: str) -> np.ndarray:
    """One-shot embedding under the given spec (test backend only needs this)."""
    return make_embedder(spec).embed(text)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a| |b|), accumulated in float64 regardless of input dtype."""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.size != bv.size:
        raise DimensionMismatch(int(av.size), int(bv.size))
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector()
    return float(np.dot(av, bv) / (na * nb))
