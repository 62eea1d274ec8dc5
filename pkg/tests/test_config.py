from __future__ import annotations

import json

import pytest

from dialogdx.config import (
    ConfigError,
    build_chat_backend,
    LLMSettings,
    load_config,
    load_runtime,
    make_engine,
)
from dialogdx.index import IndexMode
from dialogdx.llm import ModelConfig, Purpose, ScriptExhausted, user_request

from conftest import build_scripted_stack

MODELS = ModelConfig()


def test_load_config_defaults_and_path_resolution(tmp_path, fixture_corpus, embedder64):
    paths = build_scripted_stack(tmp_path, fixture_corpus, embedder64)
    config = load_config(paths["config"])
    assert config.corpus_path == str(paths["corpus"])
    assert config.index_path == str(paths["index"])
    assert config.embedder.dim == 64
    assert config.engine.retriever.index_mode is IndexMode.MR
    assert config.engine.max_rounds == 5
    assert config.deterministic_clock


def test_load_runtime_verifies_fingerprint(tmp_path, fixture_corpus, embedder64):
    paths = build_scripted_stack(tmp_path, fixture_corpus, embedder64)
    runtime = load_runtime(load_config(paths["config"]))
    assert runtime.index.corpus_fingerprint
    assert len(runtime.corpus) == len(fixture_corpus)
    assert runtime.clock() == 0.0


def test_missing_corpus_path_is_config_error(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"corpus_path": "nowhere"}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_runtime(load_config(path))


def test_config_requires_corpus_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{}", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_llm_backend_rejected(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps({"corpus_path": ".", "llm": {"backend": "psychic"}}),
        encoding="utf-8",
    )
    with pytest.raises(ConfigError):
        load_config(path)


def test_scripted_backend_consumes_file_in_order(tmp_path, fixture_corpus, embedder64):
    paths = build_scripted_stack(tmp_path, fixture_corpus, embedder64)
    config = load_config(paths["config"])
    backend = build_chat_backend(config.llm)
    assert backend.chat(user_request(Purpose.DOCTOR, "x", MODELS)) == "[INQUIRE] Does it follow meals?"
    assert backend.chat(user_request(Purpose.GATE, "x", MODELS)) == "NO"


def test_canned_backend_responds_per_purpose():
    backend = build_chat_backend(
        LLMSettings(backend="canned", canned={"gate": "YES", "doctor": "[DIAGNOSE] x."})
    )
    assert backend.chat(user_request(Purpose.GATE, "q", MODELS)) == "YES"
    assert backend.chat(user_request(Purpose.GATE, "q", MODELS)) == "YES"
    with pytest.raises(ScriptExhausted):
        backend.chat(user_request(Purpose.JUDGE, "q", MODELS))


def test_make_engine_applies_overrides(tmp_path, fixture_corpus, embedder64):
    paths = build_scripted_stack(tmp_path, fixture_corpus, embedder64)
    runtime = load_runtime(load_config(paths["config"]))
    engine = make_engine(
        runtime,
        overrides={"top_k": 3, "index_mode": "di", "analyzer_enabled": False, "max_rounds": 2},
    )
    assert engine.config.retriever.top_k == 3
    assert engine.config.retriever.index_mode is IndexMode.DI
    assert engine.config.analyzer_enabled is False
    assert engine.config.max_rounds == 2
    # Base runtime config untouched.
    assert runtime.config.engine.retriever.top_k == 5
