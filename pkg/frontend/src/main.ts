/** DOM wiring: events in, rendered state out.
 *
 * The session id is mirrored into the URL hash, so reloading the page
 * refetches the transcript and reprojects the identical dialogue.
 */

import { ApiClient, ApiError, DEFAULT_OPTIONS, type SessionOptions } from "./api.js";
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
  type ViewSession,
} from "./state.js";
import { renderApp } from "./render.js";

let state: ViewSession = initialState(window.location.origin, DEFAULT_OPTIONS);
let client = new ApiClient(state.serverUrl);

function readOptions(): SessionOptions {
  const topK = Number((document.getElementById("opt-topk") as HTMLInputElement).value);
  const indexMode = (document.getElementById("opt-mode") as HTMLSelectElement).value as
    | "di"
    | "mr"
    | "both";
  const analyzerEnabled = (document.getElementById("opt-analyzer") as HTMLInputElement)
    .checked;
  const includeThinking = (document.getElementById("opt-thinking") as HTMLInputElement)
    .checked;
  return { topK, indexMode, analyzerEnabled, includeThinking };
}

function redraw(): void {
  const root = document.getElementById("app");
  if (!root) return;
  root.innerHTML = renderApp(state);
  const input = document.getElementById("patient-input") as HTMLInputElement | null;
  const send = document.getElementById("send");
  if (input && send) {
    send.addEventListener("click", () => void submit(input.value));
    input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") void submit(input.value);
    });
    if (canSend(state)) input.focus();
  }
  root.querySelectorAll('[data-action="retry"]').forEach((button) =>
    button.addEventListener("click", () => void retry()),
  );
  root.querySelectorAll('[data-action="reconnect"]').forEach((button) =>
    button.addEventListener("click", () => void start()),
  );
}

async function start(): Promise<void> {
  const url = (document.getElementById("opt-server") as HTMLInputElement).value;
  client = new ApiClient(url);
  state = initialState(url, readOptions());
  try {
    const created = await client.createSession(state.options);
    state = applySessionCreated(state, created);
    window.location.hash = `s=${created.session_id}`;
  } catch (error) {
    state = applyConnectionFailure(state, describe(error));
    window.location.hash = "";
  }
  redraw();
}

async function submit(text: string): Promise<void> {
  if (!text.trim() || !canSend(state) || !state.sessionId) return;
  state = applyPatientPending(state, text);
  redraw();
  await deliver(text);
}

async function retry(): Promise<void> {
  const text = retryTarget(state);
  if (text === null || state.busy || !state.sessionId) return;
  state = applyRetryStart(state);
  redraw();
  await deliver(text);
}

async function deliver(text: string): Promise<void> {
  try {
    const response = await client.sendMessage(
      state.sessionId as string,
      text,
      state.options.includeThinking,
    );
    state = applyDoctorResponse(state, response);
  } catch (error) {
    state = applySendFailure(state, describe(error));
  }
  redraw();
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.code}: ${error.message}`;
  }
  return String(error);
}

async function restoreFromHash(): Promise<void> {
  const match = window.location.hash.match(/s=([A-Za-z0-9-]+)/);
  if (!match) return;
  const url = (document.getElementById("opt-server") as HTMLInputElement).value;
  client = new ApiClient(url);
  try {
    const transcript = await client.getTranscript(match[1], readOptions().includeThinking);
    state = stateFromTranscript(url, readOptions(), transcript);
  } catch (error) {
    state = applyConnectionFailure(state, describe(error));
  }
  redraw();
}

document.addEventListener("DOMContentLoaded", () => {
  const startButton = document.getElementById("start");
  if (startButton) startButton.addEventListener("click", () => void start());
  const server = document.getElementById("opt-server") as HTMLInputElement | null;
  if (server && !server.value) server.value = window.location.origin;
  redraw();
  void restoreFromHash();
});
