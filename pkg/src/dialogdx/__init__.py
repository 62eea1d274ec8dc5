"""Multi-round diagnostic dialogue engine.

Indexes a disease knowledge base under two representations (formal
diagnosis texts and patient-style record narratives), retrieves candidate
diseases from the accumulated patient narrative, analyzes their
differences, and each round either asks a targeted follow-up question or
commits to a diagnosis.  Ships with a patient simulator, an evaluation
harness, a CLI, and an HTTP session service.
"""

from .analyzer import AnalyzerOutput, analyze
from .corpus import (
    Corpus,
    CorpusStats,
    DiseaseEntry,
    KnowledgeTriple,
    MedicalRecord,
    MedicalSystem,
    corpus_fingerprint,
    corpus_stats,
    load_corpus,
    write_corpus,
)
from .dialogue import DialogueTurn, Role, render_dialogue
from .doctor import ActionKind, DoctorAction, parse_action, respond
from .embedding import (
    DeterministicEmbedder,
    EmbedderBackend,
    EmbedderSpec,
    RemoteEmbedder,
    cosine_similarity,
    embed_text,
    make_embedder,
)
from .engine import DialogueEngine, EngineConfig, SessionConcluded
from .evaluation import (
    AblationAxis,
    AblationReport,
    JudgeScore,
    RetrievalMetrics,
    export_pairwise,
    judge_transcripts,
    metrics_from_ranks,
    retrieval_metrics,
    run_ablation,
)
from .fixtures import generate_fixture, generate_fixture_queries
from .index import (
    DualIndex,
    IndexEntry,
    IndexMode,
    IndexSource,
    RetrievalHit,
    build_index,
    load_index,
    save_index,
    search,
)
from .llm import (
    ChatMessage,
    ChatRequest,
    MockBackend,
    ModelConfig,
    Purpose,
    RemoteChatBackend,
)
from .patient import (
    LLMPatient,
    PatientCase,
    ScriptedPatient,
    cases_from_corpus,
    load_cases,
    make_patient,
    write_cases,
)
from .retriever import (
    KnowledgePacket,
    Retriever,
    RetrieverConfig,
    build_query,
)
from .session import (
    Session,
    SessionStatus,
    Transcript,
    canonical_json_bytes,
    normalized_transcript_dict,
    read_transcript,
    session_to_transcript,
    transcript_from_dict,
    transcript_to_dict,
    write_transcript,
)

__version__ = "0.1.0"
