/** View-session state and its pure update functions.
 *
 * The state is a projection of the server transcript: every clinical string
 * (utterances, hit names, thinking text, diagnosis) originates from a server
 * response field, and rebuilding the state from a fetched transcript yields
 * exactly what the incremental message flow produced.
 */

import type { SessionOptions } from "./api.js";
import type {
  MessageResponse,
  SessionCreatedResponse,
  TranscriptResponse,
} from "./types.js";

export interface ChatMessage {
  role: "patient" | "doctor";
  text: string;
  roundIndex: number;
  kind?: "inquire" | "diagnose";
  pending?: boolean;
  failed?: boolean;
}

export interface HitView {
  diseaseId: string;
  diseaseName: string;
  score: number;
  source: "di" | "mr";
  rank: number;
}

export interface RoundInspector {
  roundIndex: number;
  gateDecision: boolean;
  searched: boolean;
  hits: HitView[];
  thinking: string | null;
  diagnosisNames: string[];
}

export interface EngineSettings {
  topK: number;
  indexMode: string;
  analyzerEnabled: boolean;
  maxRounds: number;
}

export type SessionPhase = "idle" | "active" | "concluded" | "error";

export interface ViewSession {
  serverUrl: string;
  options: SessionOptions;
  sessionId: string | null;
  settings: EngineSettings | null;
  phase: SessionPhase;
  messages: ChatMessage[];
  rounds: RoundInspector[];
  banner: string | null;
  errorText: string | null;
  busy: boolean;
}

export function initialState(serverUrl: string, options: SessionOptions): ViewSession {
  return {
    serverUrl,
    options,
    sessionId: null,
    settings: null,
    phase: "idle",
    messages: [],
    rounds: [],
    banner: null,
    errorText: null,
    busy: false,
  };
}

function settingsFromConfig(config: SessionCreatedResponse["config"]): EngineSettings {
  return {
    topK: config.retriever.top_k,
    indexMode: config.retriever.index_mode,
    analyzerEnabled: config.analyzer_enabled,
    maxRounds: config.max_rounds,
  };
}

export function applySessionCreated(
  state: ViewSession,
  response: SessionCreatedResponse,
): ViewSession {
  return {
    ...state,
    sessionId: response.session_id,
    settings: settingsFromConfig(response.config),
    phase: "active",
    messages: [],
    rounds: [],
    banner: null,
    errorText: null,
    busy: false,
  };
}

/** Connection failures leave a retryable error state with no session id. */
export function applyConnectionFailure(state: ViewSession, message: string): ViewSession {
  return {
    ...state,
    sessionId: null,
    settings: null,
    phase: "error",
    errorText: message,
    busy: false,
  };
}

export function applyPatientPending(state: ViewSession, text: string): ViewSession {
  const roundIndex = state.rounds.length + 1;
  return {
    ...state,
    busy: true,
    messages: [...state.messages, { role: "patient", text, roundIndex, pending: true }],
  };
}

function diagnosisBanner(response: { text: string; diagnosis_names: string[] }): string {
  return response.diagnosis_names.length > 0
    ? response.diagnosis_names.join("; ")
    : response.text;
}

/** Drop transient send flags so a settled message equals its transcript
 * projection key-for-key. */
function settled(message: ChatMessage): ChatMessage {
  const { pending, failed, ...rest } = message;
  void pending;
  void failed;
  return rest;
}

export function applyDoctorResponse(
  state: ViewSession,
  response: MessageResponse,
): ViewSession {
  const messages = state.messages.map((m) => (m.pending ? settled(m) : m));
  messages.push({
    role: "doctor",
    text: response.action.text,
    roundIndex: response.round_index,
    kind: response.action.kind,
  });
  const round: RoundInspector = {
    roundIndex: response.round_index,
    gateDecision: response.gate_decision,
    searched: response.searched,
    hits: response.hits.map((h) => ({
      diseaseId: h.disease_id,
      diseaseName: h.disease_name,
      score: h.score,
      source: h.source,
      rank: h.rank,
    })),
    thinking: response.thinking,
    diagnosisNames: response.action.diagnosis_names,
  };
  const concluded = response.status === "concluded";
  return {
    ...state,
    busy: false,
    messages,
    rounds: [...state.rounds, round],
    phase: concluded ? "concluded" : "active",
    banner: concluded ? diagnosisBanner(response.action) : null,
  };
}

/** A failed send keeps the bubble, marked for retry. */
export function applySendFailure(state: ViewSession, message: string): ViewSession {
  return {
    ...state,
    busy: false,
    errorText: message,
    messages: state.messages.map((m) =>
      m.pending ? { ...settled(m), failed: true } : m,
    ),
  };
}

/** Re-arm the last failed bubble for a retry; returns null if none. */
export function retryTarget(state: ViewSession): string | null {
  const failed = state.messages.filter((m) => m.failed);
  return failed.length > 0 ? failed[failed.length - 1].text : null;
}

export function applyRetryStart(state: ViewSession): ViewSession {
  return {
    ...state,
    busy: true,
    errorText: null,
    messages: state.messages.map((m) =>
      m.failed ? { ...settled(m), pending: true } : m,
    ),
  };
}

export function canSend(state: ViewSession): boolean {
  return state.phase === "active" && !state.busy;
}

/** Rebuild the state a finished (or partial) dialogue produced, from the
 * server transcript alone. */
export function stateFromTranscript(
  serverUrl: string,
  options: SessionOptions,
  transcript: TranscriptResponse,
): ViewSession {
  const messages: ChatMessage[] = transcript.turns.map((turn) => {
    const message: ChatMessage = {
      role: turn.role,
      text: turn.text,
      roundIndex: turn.round_index,
    };
    if (turn.role === "doctor") {
      const round = transcript.rounds.find((r) => r.round_index === turn.round_index);
      if (round) {
        message.kind = round.action.kind;
      }
    }
    return message;
  });
  const rounds: RoundInspector[] = transcript.rounds.map((round) => {
    const names = new Map(
      round.packets.map((p) => [p.disease_id, p.disease_name] as const),
    );
    return {
      roundIndex: round.round_index,
      gateDecision: round.gate_decision,
      searched: round.searched,
      hits: round.hits.map((h) => ({
        diseaseId: h.disease_id,
        diseaseName: names.get(h.disease_id) ?? h.disease_id,
        score: h.score,
        source: h.source,
        rank: h.rank,
      })),
      thinking: round.analysis ? round.analysis.thinking_text : null,
      diagnosisNames: round.action.diagnosis_names,
    };
  });
  const concluded = transcript.status === "concluded";
  const lastRound = transcript.rounds[transcript.rounds.length - 1];
  return {
    serverUrl,
    options,
    sessionId: transcript.session_id,
    settings: settingsFromConfig(transcript.config),
    phase: concluded ? "concluded" : "active",
    messages,
    rounds,
    banner: concluded && lastRound ? diagnosisBanner(lastRound.action) : null,
    errorText: null,
    busy: false,
  };
}
