import { describe, expect, it } from "vitest";

import { DEFAULT_OPTIONS } from "../src/api.js";
import {
  applyConnectionFailure,
  applyDoctorResponse,
  applyPatientPending,
  applyRetryStart,
  applySendFailure,
  applySessionCreated,
  canSend,
  initialState,
  retryTarget,
  stateFromTranscript,
} from "../src/state.js";
import type {
  MessageResponse,
  SessionCreatedResponse,
  TranscriptResponse,
} from "../src/types.js";

const CONFIG: SessionCreatedResponse["config"] = {
  max_rounds: 5,
  analyzer_enabled: true,
  retriever: { top_k: 5, index_mode: "mr", packet_char_budget: 1500, gate_enabled: true },
  models: { doctor: "m", patient: "m", judge: "j", analyzer: null, gate: null },
};

const CREATED: SessionCreatedResponse = {
  session_id: "s-abc",
  status: "awaiting_patient",
  config: CONFIG,
};

function inquireResponse(round: number): MessageResponse {
  return {
    session_id: "s-abc",
    round_index: round,
    status: "awaiting_patient",
    gate_decision: true,
    searched: true,
    action: { kind: "inquire", text: `question ${round}?`, diagnosis_names: [] },
    hits: [
      { disease_id: "D1", disease_name: "Alpha", score: 0.91234, source: "mr", rank: 1 },
      { disease_id: "D2", disease_name: "Beta", score: 0.5, source: "di", rank: 2 },
    ],
    thinking: `thinking ${round}`,
  };
}

function diagnoseResponse(round: number): MessageResponse {
  return {
    ...inquireResponse(round),
    status: "concluded",
    action: { kind: "diagnose", text: "It is Alpha.", diagnosis_names: ["Alpha"] },
  };
}

describe("session lifecycle", () => {
  it("starts idle with no session", () => {
    const state = initialState("http://x", DEFAULT_OPTIONS);
    expect(state.phase).toBe("idle");
    expect(state.sessionId).toBeNull();
    expect(canSend(state)).toBe(false);
  });

  it("activates on session creation and echoes settings", () => {
    const state = applySessionCreated(initialState("http://x", DEFAULT_OPTIONS), CREATED);
    expect(state.phase).toBe("active");
    expect(state.sessionId).toBe("s-abc");
    expect(state.settings).toEqual({
      topK: 5,
      indexMode: "mr",
      analyzerEnabled: true,
      maxRounds: 5,
    });
    expect(canSend(state)).toBe(true);
  });

  it("connection failure stores no session id and is retryable", () => {
    const state = applyConnectionFailure(
      initialState("http://x", DEFAULT_OPTIONS),
      "connection_failed: refused",
    );
    expect(state.phase).toBe("error");
    expect(state.sessionId).toBeNull();
    expect(state.errorText).toContain("refused");
    expect(canSend(state)).toBe(false);
  });
});

describe("message flow", () => {
  const active = applySessionCreated(initialState("http://x", DEFAULT_OPTIONS), CREATED);

  it("optimistic bubble renders pending and blocks sending", () => {
    const state = applyPatientPending(active, "my chest burns");
    expect(state.messages).toHaveLength(1);
    expect(state.messages[0]).toMatchObject({
      role: "patient",
      pending: true,
      roundIndex: 1,
    });
    expect(state.busy).toBe(true);
    expect(canSend(state)).toBe(false);
  });

  it("doctor response resolves the bubble and appends inspector data", () => {
    let state = applyPatientPending(active, "my chest burns");
    state = applyDoctorResponse(state, inquireResponse(1));
    expect(state.messages.map((m) => m.role)).toEqual(["patient", "doctor"]);
    expect(state.messages[0].pending).toBeUndefined();
    expect(state.messages[1].kind).toBe("inquire");
    expect(state.rounds).toHaveLength(1);
    expect(state.rounds[0].hits).toHaveLength(2);
    expect(state.rounds[0].thinking).toBe("thinking 1");
    expect(state.phase).toBe("active");
    expect(canSend(state)).toBe(true);
  });

  it("diagnosis concludes, sets the banner, and locks input", () => {
    let state = applyPatientPending(active, "my chest burns");
    state = applyDoctorResponse(state, diagnoseResponse(1));
    expect(state.phase).toBe("concluded");
    expect(state.banner).toBe("Alpha");
    expect(canSend(state)).toBe(false);
  });

  it("send failure marks the bubble failed with a retry target", () => {
    let state = applyPatientPending(active, "my chest burns");
    state = applySendFailure(state, "session_busy: in flight");
    expect(state.messages[0].failed).toBe(true);
    expect(state.busy).toBe(false);
    expect(retryTarget(state)).toBe("my chest burns");
    const retried = applyRetryStart(state);
    expect(retried.messages[0].pending).toBe(true);
    expect(retried.messages[0].failed).toBeUndefined();
    expect(retried.errorText).toBeNull();
  });
});

describe("transcript projection", () => {
  it("rebuilds the exact state of an incremental dialogue", () => {
    let incremental = applySessionCreated(
      initialState("http://x", DEFAULT_OPTIONS),
      CREATED,
    );
    incremental = applyPatientPending(incremental, "u1");
    incremental = applyDoctorResponse(incremental, inquireResponse(1));
    incremental = applyPatientPending(incremental, "u2");
    incremental = applyDoctorResponse(incremental, diagnoseResponse(2));

    const transcript: TranscriptResponse = {
      session_id: "s-abc",
      case_id: null,
      status: "concluded",
      config: CONFIG,
      turns: [
        { role: "patient", text: "u1", round_index: 1 },
        { role: "doctor", text: "question 1?", round_index: 1 },
        { role: "patient", text: "u2", round_index: 2 },
        { role: "doctor", text: "It is Alpha.", round_index: 2 },
      ],
      rounds: [1, 2].map((round) => ({
        round_index: round,
        gate_decision: true,
        searched: true,
        hits: [
          { disease_id: "D1", score: 0.91234, source: "mr", rank: 1 },
          { disease_id: "D2", score: 0.5, source: "di", rank: 2 },
        ],
        packets: [
          { disease_id: "D1", disease_name: "Alpha" },
          { disease_id: "D2", disease_name: "Beta" },
        ],
        analysis: { thinking_text: `thinking ${round}` },
        action:
          round === 1
            ? { kind: "inquire" as const, text: "question 1?", diagnosis_names: [] }
            : { kind: "diagnose" as const, text: "It is Alpha.", diagnosis_names: ["Alpha"] },
      })),
    };
    const projected = stateFromTranscript("http://x", DEFAULT_OPTIONS, transcript);
    expect(projected).toEqual(incremental);
  });

  it("keeps an unconcluded transcript active", () => {
    const transcript: TranscriptResponse = {
      session_id: "s-abc",
      case_id: null,
      status: "awaiting_patient",
      config: CONFIG,
      turns: [
        { role: "patient", text: "u1", round_index: 1 },
        { role: "doctor", text: "question 1?", round_index: 1 },
      ],
      rounds: [
        {
          round_index: 1,
          gate_decision: true,
          searched: true,
          hits: [],
          packets: [],
          analysis: null,
          action: { kind: "inquire", text: "question 1?", diagnosis_names: [] },
        },
      ],
    };
    const projected = stateFromTranscript("http://x", DEFAULT_OPTIONS, transcript);
    expect(projected.phase).toBe("active");
    expect(projected.banner).toBeNull();
    expect(canSend(projected)).toBe(true);
  });
});
