from __future__ import annotations

import pytest

from dialogdx.dialogue import Role
from dialogdx.doctor import ActionKind
from dialogdx.engine import DialogueEngine, EngineConfig, SessionConcluded
from dialogdx.llm import MockBackend, ModelConfig, Purpose
from dialogdx.patient import LLMPatient, PatientCase, ScriptedPatient
from dialogdx.retriever import RetrieverConfig
from dialogdx.session import (
    SessionStatus,
    canonical_json_bytes,
    normalized_transcript_dict,
    read_transcript,
    transcript_from_dict,
    transcript_to_dict,
    write_transcript,
)


def _engine(fixture_corpus, fixture_index, embedder64, backend, **config_kwargs):
    config = EngineConfig(models=ModelConfig(), **config_kwargs)
    return DialogueEngine(
        fixture_corpus,
        fixture_index,
        embedder64,
        backend,
        config,
        clock=lambda: 0.0,
        id_factory=lambda: "s-test",
    )


def _case(script=None):
    return PatientCase(
        case_id="case-1",
        gold_disease_id="D001",
        gold_disease_name="gold",
        case_info="info",
        script=tuple(script) if script else None,
    )


def _three_round_script():
    # Round 1: no gate call; rounds 2-3 consult the gate.
    return [
        (Purpose.ANALYZER, "thinking r1"),
        (Purpose.DOCTOR, "[INQUIRE] q1?"),
        (Purpose.GATE, "NO"),
        (Purpose.ANALYZER, "thinking r2"),
        (Purpose.DOCTOR, "[INQUIRE] q2?"),
        (Purpose.GATE, "YES"),
        (Purpose.ANALYZER, "thinking r3"),
        (Purpose.DOCTOR, "[DIAGNOSE] it is settled."),
    ]


def test_single_round_keeps_session_open(fixture_corpus, fixture_index, embedder64):
    backend = MockBackend(
        script=[(Purpose.ANALYZER, "thinking"), (Purpose.DOCTOR, "[INQUIRE] more?")]
    )
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
    session = engine.new_session()
    action = engine.run_round(session, "burning chest")
    assert action.kind is ActionKind.INQUIRE
    assert len(session.turns) == 2
    assert [t.role for t in session.turns] == [Role.PATIENT, Role.DOCTOR]
    assert session.status is SessionStatus.AWAITING_PATIENT
    assert len(session.round_artifacts) == 1


def test_diagnose_concludes_and_blocks_further_rounds(
    fixture_corpus, fixture_index, embedder64
):
    backend = MockBackend(
        script=[(Purpose.ANALYZER, "t"), (Purpose.DOCTOR, "[DIAGNOSE] done.")]
    )
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
    session = engine.new_session()
    engine.run_round(session, "burning chest")
    assert session.status is SessionStatus.CONCLUDED
    with pytest.raises(SessionConcluded):
        engine.run_round(session, "but wait")


def test_force_diagnose_prompt_at_round_cap(fixture_corpus, fixture_index, embedder64):
    backend = MockBackend(
        script=[
            (Purpose.ANALYZER, "t1"),
            (Purpose.DOCTOR, "[INQUIRE] q1?"),
            (Purpose.GATE, "YES"),
            (Purpose.ANALYZER, "t2"),
            (Purpose.DOCTOR, "[DIAGNOSE] final."),
        ]
    )
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend, max_rounds=2)
    session = engine.new_session()
    engine.run_round(session, "burning chest")
    engine.run_round(session, "worse at night")
    doctor_requests = [r for r in backend.request_log if r.purpose is Purpose.DOCTOR]
    assert "Do not use [INQUIRE]" not in doctor_requests[0].text()
    assert "Do not use [INQUIRE]" in doctor_requests[1].text()


def test_failed_stage_rolls_back_patient_turn(fixture_corpus, fixture_index, embedder64):
    backend = MockBackend()  # analyzer call will exhaust immediately
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
    session = engine.new_session()
    with pytest.raises(Exception):
        engine.run_round(session, "burning chest")
    assert session.turns == []
    assert session.round_artifacts == []
    # Session remains usable afterwards.
    backend2 = MockBackend(
        script=[(Purpose.ANALYZER, "t"), (Purpose.DOCTOR, "[INQUIRE] ok?")]
    )
    engine2 = _engine(fixture_corpus, fixture_index, embedder64, backend2)
    session2 = engine2.new_session()
    engine2.run_round(session2, "burning chest")
    assert len(session2.turns) == 2


def test_run_dialogue_scripted_two_rounds(fixture_corpus, fixture_index, embedder64):
    backend = MockBackend(
        script=[
            (Purpose.ANALYZER, "t1"),
            (Purpose.DOCTOR, "[INQUIRE] q1?"),
            (Purpose.GATE, "YES"),
            (Purpose.ANALYZER, "t2"),
            (Purpose.DOCTOR, "[DIAGNOSE] concluded."),
        ]
    )
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
    case = _case(script=["burning chest", "worse at night"])
    transcript = engine.run_dialogue(case, ScriptedPatient(case.script))
    assert transcript.complete
    assert len(transcript.turns) == 4
    assert transcript.status is SessionStatus.CONCLUDED
    assert transcript.rounds[-1].action.kind is ActionKind.DIAGNOSE
    assert transcript.case_id == "case-1"


def test_round_cap_forces_diagnosis(fixture_corpus, fixture_index, embedder64):
    backend = MockBackend(
        responder=lambda req: {
            Purpose.GATE: "YES",
            Purpose.ANALYZER: "thinking",
            Purpose.DOCTOR: "[INQUIRE] and another thing?",
        }[req.purpose]
    )
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend, max_rounds=5)
    case = _case(script=["u1", "u2", "u3", "u4", "u5"])
    transcript = engine.run_dialogue(case, ScriptedPatient(case.script))
    doctor_turns = [t for t in transcript.turns if t.role is Role.DOCTOR]
    assert len(doctor_turns) == 5
    assert transcript.status is SessionStatus.CONCLUDED
    assert transcript.rounds[-1].action.kind is ActionKind.DIAGNOSE
    assert transcript.rounds[-1].action.parse_warning  # coerced from INQUIRE
    assert transcript.complete


def test_alternation_and_round_indices(fixture_corpus, fixture_index, embedder64):
    backend = MockBackend(script=_three_round_script())
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
    case = _case(script=["u1", "u2", "u3"])
    transcript = engine.run_dialogue(case, ScriptedPatient(case.script))
    roles = [t.role for t in transcript.turns]
    assert roles == [Role.PATIENT, Role.DOCTOR] * 3
    for i, turn in enumerate(transcript.turns):
        assert turn.round_index == i // 2 + 1
    assert [r.round_index for r in transcript.rounds] == [1, 2, 3]


def test_searches_bounded_by_patient_turns(fixture_corpus, fixture_index, embedder64):
    backend = MockBackend(script=_three_round_script())
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
    case = _case(script=["u1", "u2", "u3"])
    engine.run_dialogue(case, ScriptedPatient(case.script))
    assert engine.search_count == 2  # round 2 was gated off
    assert engine.search_count <= 3

    backend2 = MockBackend(
        responder=lambda req: {
            Purpose.GATE: "YES",
            Purpose.ANALYZER: "t",
            Purpose.DOCTOR: "[INQUIRE] q?",
        }[req.purpose]
    )
    engine2 = _engine(
        fixture_corpus,
        fixture_index,
        embedder64,
        backend2,
        max_rounds=3,
        retriever=RetrieverConfig(gate_enabled=False),
    )
    case2 = _case(script=["u1", "u2", "u3"])
    engine2.run_dialogue(case2, ScriptedPatient(case2.script))
    assert engine2.search_count == 3  # equality when gating disabled


def test_no_analyzer_ablation_skips_analyzer_calls(
    fixture_corpus, fixture_index, embedder64
):
    backend = MockBackend(
        responder=lambda req: {
            Purpose.GATE: "YES",
            Purpose.DOCTOR: "[DIAGNOSE] done.",
            Purpose.ANALYZER: "should never happen",
        }[req.purpose]
    )
    engine = _engine(
        fixture_corpus, fixture_index, embedder64, backend, analyzer_enabled=False
    )
    case = _case(script=["u1"])
    transcript = engine.run_dialogue(case, ScriptedPatient(case.script))
    assert transcript.complete
    assert all(r.purpose is not Purpose.ANALYZER for r in backend.request_log)
    assert transcript.rounds[0].analysis is None
    # Doctor saw raw packets instead of analyzer output.
    doctor_prompt = [r for r in backend.request_log if r.purpose is Purpose.DOCTOR][-1].text()
    assert "Candidate 1" in doctor_prompt


def test_incomplete_transcript_on_stage_failure(fixture_corpus, fixture_index, embedder64):
    backend = MockBackend(
        script=[(Purpose.ANALYZER, "t1"), (Purpose.DOCTOR, "[INQUIRE] q?")]
    )
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
    case = _case(script=["u1", "u2"])  # round 2 exhausts the gate script
    transcript = engine.run_dialogue(case, ScriptedPatient(case.script))
    assert not transcript.complete
    assert transcript.error and "ScriptExhausted" in transcript.error
    assert len(transcript.turns) == 2  # failed round rolled back


def test_patient_requests_never_contain_packet_text(
    fixture_corpus, fixture_index, embedder64
):
    def responder(req):
        return {
            Purpose.GATE: "YES",
            Purpose.ANALYZER: "thinking",
            Purpose.DOCTOR: "[INQUIRE] next?",
            Purpose.PATIENT: "my chest hurts",
        }[req.purpose]

    backend = MockBackend(responder=responder)
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend, max_rounds=2)
    case = _case()
    transcript = engine.run_dialogue(case, LLMPatient(backend, ModelConfig()))
    assert transcript.complete
    packet_texts = [p.rendered_text for r in transcript.rounds for p in r.packets]
    assert packet_texts
    patient_requests = [r for r in backend.request_log if r.purpose is Purpose.PATIENT]
    assert patient_requests
    for request in patient_requests:
        prompt = request.text()
        for packet_text in packet_texts:
            assert packet_text not in prompt


def test_transcript_round_trips_losslessly(
    tmp_path, fixture_corpus, fixture_index, embedder64
):
    backend = MockBackend(script=_three_round_script())
    engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
    case = _case(script=["u1", "u2", "u3"])
    transcript = engine.run_dialogue(case, ScriptedPatient(case.script))
    assert transcript_from_dict(transcript_to_dict(transcript)) == transcript
    path = tmp_path / "t.json"
    write_transcript(transcript, path)
    assert read_transcript(path) == transcript


def test_determinism_across_runs(fixture_corpus, fixture_index, embedder64):
    outputs = []
    for _ in range(2):
        backend = MockBackend(script=_three_round_script())
        engine = _engine(fixture_corpus, fixture_index, embedder64, backend)
        case = _case(script=["u1", "u2", "u3"])
        transcript = engine.run_dialogue(case, ScriptedPatient(case.script))
        outputs.append(
            canonical_json_bytes(normalized_transcript_dict(transcript_to_dict(transcript)))
        )
    assert outputs[0] == outputs[1]


def test_engine_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(max_rounds=0)
