/** Wire types mirroring the session service's JSON responses. */

export type IndexMode = "di" | "mr" | "both";
export type ActionKind = "inquire" | "diagnose";

export interface HealthResponse {
  status: string;
  corpus_fingerprint: string;
}

export interface SessionCreatedResponse {
  session_id: string;
  status: string;
  config: {
    max_rounds: number;
    analyzer_enabled: boolean;
    retriever: {
      top_k: number;
      index_mode: IndexMode;
      packet_char_budget: number;
      gate_enabled: boolean;
    };
    models: Record<string, string | null>;
  };
}

export interface WireHit {
  disease_id: string;
  disease_name: string;
  score: number;
  source: "di" | "mr";
  rank: number;
}

export interface MessageResponse {
  session_id: string;
  round_index: number;
  status: "awaiting_patient" | "concluded";
  gate_decision: boolean;
  searched: boolean;
  action: {
    kind: ActionKind;
    text: string;
    diagnosis_names: string[];
  };
  hits: WireHit[];
  thinking: string | null;
}

export interface WireTurn {
  role: "patient" | "doctor";
  text: string;
  round_index: number;
}

export interface WireRound {
  round_index: number;
  gate_decision: boolean;
  searched: boolean;
  hits: Array<{ disease_id: string; score: number; source: "di" | "mr"; rank: number }>;
  packets: Array<{ disease_id: string; disease_name: string }>;
  analysis: { thinking_text: string | null } | null;
  action: { kind: ActionKind; text: string; diagnosis_names: string[] };
}

export interface TranscriptResponse {
  session_id: string;
  case_id: string | null;
  status: "awaiting_patient" | "concluded";
  turns: WireTurn[];
  rounds: WireRound[];
  config: SessionCreatedResponse["config"];
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}
