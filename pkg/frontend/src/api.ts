/** Typed client for the session service; the only network surface of the app. */

import type {
  HealthResponse,
  IndexMode,
  MessageResponse,
  SessionCreatedResponse,
  TranscriptResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, status: number, message: string) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

export interface SessionOptions {
  topK: number;
  indexMode: IndexMode;
  analyzerEnabled: boolean;
  includeThinking: boolean;
}

export const DEFAULT_OPTIONS: SessionOptions = {
  topK: 5,
  indexMode: "mr",
  analyzerEnabled: true,
  includeThinking: true,
};

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: { code?: string; message?: string } };
    if (body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the generic code
  }
  return new ApiError(code, response.status, message);
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (cause) {
      throw new ApiError("connection_failed", 0, String(cause));
    }
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/health");
  }

  createSession(options: SessionOptions): Promise<SessionCreatedResponse> {
    return this.request<SessionCreatedResponse>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        top_k: options.topK,
        index_mode: options.indexMode,
        analyzer_enabled: options.analyzerEnabled,
        include_thinking: options.includeThinking,
      }),
    });
  }

  sendMessage(
    sessionId: string,
    text: string,
    includeThinking: boolean,
  ): Promise<MessageResponse> {
    return this.request<MessageResponse>(
      `/sessions/${encodeURIComponent(sessionId)}/messages`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text, include_thinking: includeThinking }),
      },
    );
  }

  getTranscript(sessionId: string, includeThinking: boolean): Promise<TranscriptResponse> {
    const query = includeThinking ? "?include_thinking=true" : "";
    return this.request<TranscriptResponse>(
      `/sessions/${encodeURIComponent(sessionId)}${query}`,
    );
  }
}
