from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from dialogdx.config import load_config, load_runtime
from dialogdx.llm import MockBackend, Purpose
from dialogdx.service import create_app

from conftest import THREE_ROUND_UTTERANCES, build_scripted_stack


@pytest.fixture()
def stack(tmp_path, fixture_corpus, embedder64):
    return build_scripted_stack(tmp_path, fixture_corpus, embedder64)


@pytest.fixture()
def runtime(stack):
    return load_runtime(load_config(stack["config"]))


@pytest.fixture()
def client(runtime):
    return TestClient(create_app(runtime), raise_server_exceptions=False)


def test_health_reports_fingerprint(client, runtime):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"
    assert body["corpus_fingerprint"] == runtime.index.corpus_fingerprint


def test_create_and_message_flow(client):
    created = client.post("/sessions", json={"case_id": "case-001"})
    assert created.status_code == 201
    session_id = created.json()["session_id"]
    assert created.json()["config"]["retriever"]["top_k"] == 5

    response = client.post(
        f"/sessions/{session_id}/messages",
        json={"text": THREE_ROUND_UTTERANCES[0]},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["action"]["kind"] == "inquire"
    assert body["round_index"] == 1
    assert body["status"] == "awaiting_patient"
    assert body["gate_decision"] is True
    assert len(body["hits"]) == 5
    assert {h["source"] for h in body["hits"]} <= {"di", "mr"}
    assert all("disease_name" in h for h in body["hits"])
    assert body["thinking"] is None  # hidden by default


def test_full_dialogue_concludes_and_locks(client):
    session_id = client.post("/sessions", json={}).json()["session_id"]
    kinds = []
    for utterance in THREE_ROUND_UTTERANCES:
        body = client.post(
            f"/sessions/{session_id}/messages", json={"text": utterance}
        ).json()
        kinds.append(body["action"]["kind"])
    assert kinds == ["inquire", "inquire", "diagnose"]

    blocked = client.post(f"/sessions/{session_id}/messages", json={"text": "hello?"})
    assert blocked.status_code == 409
    assert blocked.json()["error"]["code"] == "session_concluded"


def test_session_options_echoed(client):
    created = client.post(
        "/sessions", json={"top_k": 3, "index_mode": "di", "analyzer_enabled": False}
    )
    config = created.json()["config"]
    assert config["retriever"]["top_k"] == 3
    assert config["retriever"]["index_mode"] == "di"
    assert config["analyzer_enabled"] is False


def test_thinking_exposed_when_requested(client):
    session_id = client.post("/sessions", json={"include_thinking": True}).json()[
        "session_id"
    ]
    body = client.post(
        f"/sessions/{session_id}/messages", json={"text": "burning chest"}
    ).json()
    assert body["thinking"] == "thinking round one"


def test_transcript_fetch_and_thinking_stripping(client):
    session_id = client.post("/sessions", json={"case_id": "case-001"}).json()[
        "session_id"
    ]
    client.post(f"/sessions/{session_id}/messages", json={"text": "burning chest"})
    hidden = client.get(f"/sessions/{session_id}").json()
    assert hidden["rounds"][0]["analysis"]["thinking_text"] is None
    shown = client.get(f"/sessions/{session_id}", params={"include_thinking": True}).json()
    assert shown["rounds"][0]["analysis"]["thinking_text"] == "thinking round one"
    assert shown["case_id"] == "case-001"
    assert [t["role"] for t in shown["turns"]] == ["patient", "doctor"]


def test_unknown_session_and_disease(client):
    assert client.get("/sessions/nope").status_code == 404
    assert client.get("/sessions/nope").json()["error"]["code"] == "session_not_found"
    missing = client.get("/diseases/D999")
    assert missing.status_code == 404
    assert missing.json()["error"]["code"] == "disease_not_found"


def test_disease_endpoint(client, fixture_corpus):
    entry = fixture_corpus.entries[0]
    body = client.get(f"/diseases/{entry.disease_id}").json()
    assert body["name"] == entry.name
    assert body["diagnosis_text"] == entry.diagnosis_text
    assert len(body["attributes"]) == len(entry.attributes)


def test_empty_text_rejected(client):
    session_id = client.post("/sessions", json={}).json()["session_id"]
    response = client.post(f"/sessions/{session_id}/messages", json={"text": "  "})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "invalid_request"


def test_validation_error_shape(client):
    session_id = client.post("/sessions", json={}).json()["session_id"]
    response = client.post(f"/sessions/{session_id}/messages", json={})
    assert response.status_code == 422
    assert response.json()["error"]["code"] == "invalid_request"


def test_busy_session_rejected(runtime):
    release = threading.Event()
    started = threading.Event()

    def slow_responder(request):
        if request.purpose is Purpose.ANALYZER:
            started.set()
            release.wait(timeout=5)
            return "slow thinking"
        return {"gate": "YES", "doctor": "[INQUIRE] q?"}[request.purpose.value]

    runtime.backend = MockBackend(responder=slow_responder)
    client = TestClient(create_app(runtime), raise_server_exceptions=False)
    session_id = client.post("/sessions", json={}).json()["session_id"]

    results = {}

    def first_call():
        results["first"] = client.post(
            f"/sessions/{session_id}/messages", json={"text": "burning chest"}
        )

    worker = threading.Thread(target=first_call)
    worker.start()
    assert started.wait(timeout=5)
    second = client.post(f"/sessions/{session_id}/messages", json={"text": "again"})
    release.set()
    worker.join(timeout=10)

    assert second.status_code == 409
    assert second.json()["error"]["code"] == "session_busy"
    assert results["first"].status_code == 200


def test_backend_script_exhaustion_maps_to_500(client):
    session_id = client.post("/sessions", json={}).json()["session_id"]
    for utterance in THREE_ROUND_UTTERANCES:
        client.post(f"/sessions/{session_id}/messages", json={"text": utterance})
    fresh = client.post("/sessions", json={}).json()["session_id"]
    response = client.post(f"/sessions/{fresh}/messages", json={"text": "hello"})
    assert response.status_code == 500
    assert response.json()["error"]["code"] == "script_exhausted"


def test_auth_token_enforced(tmp_path, fixture_corpus, embedder64, monkeypatch):
    paths = build_scripted_stack(
        tmp_path,
        fixture_corpus,
        embedder64,
        config_extra={"service": {"auth_token_env": "DIALOGDX_TOKEN"}},
    )
    monkeypatch.setenv("DIALOGDX_TOKEN", "sesame")
    runtime = load_runtime(load_config(paths["config"]))
    client = TestClient(create_app(runtime), raise_server_exceptions=False)
    denied = client.post("/sessions", json={})
    assert denied.status_code == 401
    assert denied.json()["error"]["code"] == "unauthorized"
    allowed = client.post(
        "/sessions", json={}, headers={"Authorization": "Bearer sesame"}
    )
    assert allowed.status_code == 201
    # Health stays open for probes.
    assert client.get("/health").status_code == 200


def test_round_logs_purpose_counters(client, caplog):
    import logging

    session_id = client.post("/sessions", json={}).json()["session_id"]
    with caplog.at_level(logging.INFO, logger="dialogdx.service"):
        client.post(f"/sessions/{session_id}/messages", json={"text": "burning chest"})
    round_lines = [r.message for r in caplog.records if "llm_calls=" in r.message]
    assert round_lines
    assert session_id in round_lines[-1]
    # Round 1: no gate call, one analyzer, one doctor.
    assert "'analyzer': 1" in round_lines[-1]
    assert "'doctor': 1" in round_lines[-1]
    assert "'gate'" not in round_lines[-1]


def test_write_through_persistence(tmp_path, fixture_corpus, embedder64):
    paths = build_scripted_stack(
        tmp_path,
        fixture_corpus,
        embedder64,
        config_extra={"service": {"transcript_dir": "transcripts"}},
    )
    runtime = load_runtime(load_config(paths["config"]))
    client = TestClient(create_app(runtime), raise_server_exceptions=False)
    session_id = client.post("/sessions", json={}).json()["session_id"]
    client.post(f"/sessions/{session_id}/messages", json={"text": "burning chest"})
    path = tmp_path / "transcripts" / f"{session_id}.json"
    assert path.is_file()
    first = json.loads(path.read_text(encoding="utf-8"))
    assert len(first["turns"]) == 2
    assert first["complete"] is False
    client.post(f"/sessions/{session_id}/messages", json={"text": "I see"})
    second = json.loads(path.read_text(encoding="utf-8"))
    assert len(second["turns"]) == 4
