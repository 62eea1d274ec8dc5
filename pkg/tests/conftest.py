from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dialogdx.corpus import write_corpus
from dialogdx.embedding import DeterministicEmbedder
from dialogdx.fixtures import generate_fixture
from dialogdx.index import build_index


@pytest.fixture(scope="session")
def fixture_corpus():
    return generate_fixture(seed=7, n_diseases=10, records_per_disease=2)


@pytest.fixture(scope="session")
def embedder64():
    return DeterministicEmbedder(dim=64)


@pytest.fixture(scope="session")
def fixture_index(fixture_corpus, embedder64):
    return build_index(fixture_corpus, embedder64)


@pytest.fixture()
def corpus_dir(tmp_path, fixture_corpus):
    path = tmp_path / "corpus"
    write_corpus(fixture_corpus, path)
    return path


THREE_ROUND_SCRIPT = [
    {"purpose": "analyzer", "text": "thinking round one"},
    {"purpose": "doctor", "text": "[INQUIRE] Does it follow meals?"},
    {"purpose": "gate", "text": "NO"},
    {"purpose": "analyzer", "text": "thinking round two"},
    {"purpose": "doctor", "text": "[INQUIRE] Any weight loss?"},
    {"purpose": "gate", "text": "YES"},
    {"purpose": "analyzer", "text": "thinking round three"},
    {"purpose": "doctor", "text": "[DIAGNOSE] The findings fit one condition best."},
]

THREE_ROUND_UTTERANCES = [
    "I keep getting a burning feeling in my chest",
    "I see",
    "it is worse after meals and at night",
]


def build_scripted_stack(base_path, fixture_corpus, embedder64, script=None, config_extra=None):
    """Write corpus, index, mock script, cases, and config files under base_path."""
    import json

    from dialogdx.index import save_index

    base_path.mkdir(parents=True, exist_ok=True)
    corpus_path = base_path / "corpus"
    write_corpus(fixture_corpus, corpus_path)
    index_path = base_path / "index.jsonl"
    save_index(build_index(fixture_corpus, embedder64), index_path)

    script_path = base_path / "script.jsonl"
    entries = script if script is not None else THREE_ROUND_SCRIPT
    script_path.write_text(
        "".join(json.dumps(e) + "\n" for e in entries), encoding="utf-8"
    )

    gold = fixture_corpus.entries[0]
    cases_path = base_path / "cases.jsonl"
    case_obj = {
        "case_id": "case-001",
        "gold_disease_id": gold.disease_id,
        "gold_disease_name": gold.name,
        "case_info": "Age 41. Burning chest after meals for two weeks.",
        "source_tag": "fixture",
        "script": THREE_ROUND_UTTERANCES,
    }
    cases_path.write_text(json.dumps(case_obj) + "\n", encoding="utf-8")

    config = {
        "corpus_path": "corpus",
        "index_path": "index.jsonl",
        "embedder": {"backend": "deterministic", "dim": embedder64.dim},
        "llm": {"backend": "scripted", "script_path": "script.jsonl"},
        "engine": {"max_rounds": 5, "top_k": 5, "index_mode": "mr"},
        "deterministic_clock": True,
    }
    if config_extra:
        for key, value in config_extra.items():
            if isinstance(value, dict) and isinstance(config.get(key), dict):
                config[key].update(value)
            else:
                config[key] = value
    config_path = base_path / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return {
        "config": config_path,
        "cases": cases_path,
        "corpus": corpus_path,
        "index": index_path,
        "script": script_path,
    }
