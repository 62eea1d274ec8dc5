"""Application configuration and runtime assembly.

One JSON config file drives both the CLI and the HTTP service so a
dialogue runs through exactly one engine code path either way.  Secrets
(API keys, the service auth token) are referenced by environment-variable
name, never stored inline.  The LLM backend can be ``remote``,
``scripted`` (a queue file, consumed once), or ``canned`` (a fixed
response per purpose) -- the latter two make whole-pipeline runs
reproducible offline.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from .corpus import Corpus, load_corpus
from .embedding import EmbedderBackend, EmbedderSpec, Embedder, make_embedder
from .engine import DialogueEngine, EngineConfig
from .index import DualIndex, IndexMode, build_index, load_index
from .llm import ChatBackend, MockBackend, ModelConfig, Purpose, RemoteChatBackend, ScriptExhausted
from .retriever import RetrieverConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class LLMSettings:
    backend: str = "remote"  # remote | scripted | canned
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    script_path: str | None = None
    canned: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ServiceSettings:
    host: str = "127.0.0.1"
    port: int = 8080
    auth_token_env: str | None = None
    transcript_dir: str | None = None
    include_thinking_default: bool = False
    static_dir: str | None = None


@dataclass(frozen=True)
class AppConfig:
    corpus_path: str
    index_path: str | None = None
    embedder: EmbedderSpec = EmbedderSpec()
    embedder_base_url: str | None = None
    embedder_api_key_env: str = "OPENAI_API_KEY"
    llm: LLMSettings = LLMSettings()
    engine: EngineConfig = EngineConfig()
    service: ServiceSettings = ServiceSettings()
    deterministic_clock: bool = False


def _engine_config_from_dict(obj: dict[str, Any]) -> EngineConfig:
    retriever = RetrieverConfig(
        top_k=obj.get("top_k", 5),
        index_mode=IndexMode(obj.get("index_mode", "mr")),
        packet_char_budget=obj.get("packet_char_budget", 1500),
        gate_enabled=obj.get("gate_enabled", True),
    )
    models_obj = obj.get("models", {})
    models = ModelConfig(
        doctor=models_obj.get("doctor", "gpt-4o-mini"),
        patient=models_obj.get("patient", "gpt-4o-mini"),
        judge=models_obj.get("judge", "gpt-4o"),
        analyzer=models_obj.get("analyzer"),
        gate=models_obj.get("gate"),
    )
    return EngineConfig(
        max_rounds=obj.get("max_rounds", 5),
        analyzer_enabled=obj.get("analyzer_enabled", True),
        retriever=retriever,
        models=models,
        template_dir=obj.get("template_dir"),
    )


def load_config(path: str | Path) -> AppConfig:
    base = Path(path)
    try:
        raw = json.loads(base.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg}")
    if "corpus_path" not in raw:
        raise ConfigError("config requires corpus_path")

    def resolve(p: str | None) -> str | None:
        if p is None:
            return None
        candidate = Path(p)
        return str(candidate if candidate.is_absolute() else base.parent / candidate)

    emb = raw.get("embedder", {})
    embedder_spec = EmbedderSpec(
        backend=EmbedderBackend(emb.get("backend", "deterministic")),
        dim=emb.get("dim", 64),
        model_name=emb.get("model_name", "text-embedding-3-small"),
    )
    llm_obj = raw.get("llm", {})
    llm = LLMSettings(
        backend=llm_obj.get("backend", "remote"),
        base_url=llm_obj.get("base_url", "https://api.openai.com/v1"),
        api_key_env=llm_obj.get("api_key_env", "OPENAI_API_KEY"),
        script_path=resolve(llm_obj.get("script_path")),
        canned=dict(llm_obj.get("canned", {})),
    )
    if llm.backend not in ("remote", "scripted", "canned"):
        raise ConfigError(f"unknown llm backend {llm.backend!r}")
    if llm.backend == "scripted" and not llm.script_path:
        raise ConfigError("scripted llm backend requires script_path")
    svc = raw.get("service", {})
    service = ServiceSettings(
        host=svc.get("host", "127.0.0.1"),
        port=svc.get("port", 8080),
        auth_token_env=svc.get("auth_token_env"),
        transcript_dir=resolve(svc.get("transcript_dir")),
        include_thinking_default=svc.get("include_thinking_default", False),
        static_dir=resolve(svc.get("static_dir")),
    )
    return AppConfig(
        corpus_path=resolve(raw["corpus_path"]),
        index_path=resolve(raw.get("index_path")),
        embedder=embedder_spec,
        embedder_base_url=raw.get("embedder_base_url"),
        embedder_api_key_env=raw.get("embedder_api_key_env", "OPENAI_API_KEY"),
        llm=llm,
        engine=_engine_config_from_dict(raw.get("engine", {})),
        service=service,
        deterministic_clock=raw.get("deterministic_clock", False),
    )


def load_script_file(path: str | Path) -> list[tuple[Purpose, str]]:
    entries = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entries.append((Purpose(obj["purpose"]), obj["text"]))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ConfigError(f"{path}:{line_no}: bad script entry: {exc}")
    return entries


def build_chat_backend(llm: LLMSettings) -> ChatBackend:
    if llm.backend == "remote":
        return RemoteChatBackend(
            base_url=llm.base_url, api_key=os.environ.get(llm.api_key_env)
        )
    if llm.backend == "scripted":
        return MockBackend(script=load_script_file(llm.script_path))
    canned = {Purpose(k): v for k, v in llm.canned.items()}

    def responder(request):
        try:
            return canned[request.purpose]
        except KeyError:
            raise ScriptExhausted(request.purpose)

    return MockBackend(responder=responder)


@dataclass
class Runtime:
    """Everything a CLI command or the service needs, loaded and verified."""

    config: AppConfig
    corpus: Corpus
    index: DualIndex
    embedder: Embedder
    backend: ChatBackend
    clock: Callable[[], float]


def load_runtime(config: AppConfig) -> Runtime:
    if not Path(config.corpus_path).is_dir():
        raise ConfigError(f"corpus_path does not exist: {config.corpus_path}")
    corpus = load_corpus(config.corpus_path)
    embedder = make_embedder(
        config.embedder,
        base_url=config.embedder_base_url,
        api_key=os.environ.get(config.embedder_api_key_env),
    )
    if config.index_path is not None:
        if not Path(config.index_path).is_file():
            raise ConfigError(f"index_path does not exist: {config.index_path}")
        index = load_index(config.index_path, corpus=corpus)
    else:
        index = build_index(corpus, embedder)
    backend = build_chat_backend(config.llm)
    clock: Callable[[], float] = (lambda: 0.0) if config.deterministic_clock else time.time
    return Runtime(
        config=config,
        corpus=corpus,
        index=index,
        embedder=embedder,
        backend=backend,
        clock=clock,
    )


def make_engine(
    runtime: Runtime,
    overrides: dict[str, Any] | None = None,
    id_factory=None,
    backend: ChatBackend | None = None,
) -> DialogueEngine:
    """Engine on the shared runtime, optionally overriding per-session knobs."""
    config = runtime.config.engine
    if overrides:
        retriever = config.retriever
        if "top_k" in overrides and overrides["top_k"] is not None:
            retriever = replace(retriever, top_k=int(overrides["top_k"]))
        if "index_mode" in overrides and overrides["index_mode"] is not None:
            retriever = replace(retriever, index_mode=IndexMode(overrides["index_mode"]))
        config = replace(config, retriever=retriever)
        if "analyzer_enabled" in overrides and overrides["analyzer_enabled"] is not None:
            config = replace(config, analyzer_enabled=bool(overrides["analyzer_enabled"]))
        if "max_rounds" in overrides and overrides["max_rounds"] is not None:
            config = replace(config, max_rounds=int(overrides["max_rounds"]))
    kwargs = {}
    if id_factory is not None:
        kwargs["id_factory"] = id_factory
    return DialogueEngine(
        runtime.corpus,
        runtime.index,
        runtime.embedder,
        backend or runtime.backend,
        config,
        clock=runtime.clock,
        **kwargs,
    )
