/** Pure HTML renderers over the view state.
 *
 * No clinical text is synthesized here: everything between the tags comes
 * from state fields that the server populated. Scores render to three
 * decimals; DI/MR sources render as distinct badges.
 */

import { canSend, type RoundInspector, type ViewSession } from "./state.js";

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function formatScore(score: number): string {
  return score.toFixed(3);
}

export function renderSettings(state: ViewSession): string {
  if (!state.settings) {
    return `<span class="muted">not connected</span>`;
  }
  const s = state.settings;
  const parts = [
    `top-k ${s.topK}`,
    `index ${s.indexMode.toUpperCase()}`,
    `analyzer ${s.analyzerEnabled ? "on" : "off"}`,
    `max rounds ${s.maxRounds}`,
  ];
  const sid = state.sessionId ? ` · session ${escapeHtml(state.sessionId)}` : "";
  return `<span class="settings-summary">${parts.join(" · ")}${sid}</span>`;
}

function messageClass(m: { role: string; pending?: boolean; failed?: boolean }): string {
  const classes = ["bubble", m.role];
  if (m.pending) classes.push("pending");
  if (m.failed) classes.push("failed");
  return classes.join(" ");
}

export function renderMessages(state: ViewSession): string {
  const bubbles = state.messages.map((m) => {
    const marker =
      m.role === "doctor" && m.kind === "diagnose"
        ? `<span class="kind-tag">diagnosis</span>`
        : "";
    const retry = m.failed
      ? `<button class="retry" data-action="retry">retry</button>`
      : "";
    return (
      `<div class="${messageClass(m)}" data-round="${m.roundIndex}">` +
      `<span class="round-no">R${m.roundIndex}</span>` +
      `${marker}<span class="text">${escapeHtml(m.text)}</span>${retry}</div>`
    );
  });
  return bubbles.join("");
}

export function renderBanner(state: ViewSession): string {
  if (state.phase === "concluded" && state.banner !== null) {
    return `<div class="banner diagnosis-banner">Final diagnosis: ${escapeHtml(state.banner)}</div>`;
  }
  if (state.phase === "error" && state.errorText !== null) {
    return (
      `<div class="banner error-banner">${escapeHtml(state.errorText)} ` +
      `<button data-action="reconnect">retry</button></div>`
    );
  }
  if (state.errorText !== null) {
    return `<div class="banner warn-banner">${escapeHtml(state.errorText)}</div>`;
  }
  return "";
}

function renderRound(round: RoundInspector): string {
  const gate = round.searched
    ? `<span class="gate searched">retrieved</span>`
    : `<span class="gate skipped">reused previous knowledge</span>`;
  const hits = round.hits
    .map(
      (h) =>
        `<li class="hit">` +
        `<span class="rank">${h.rank}</span>` +
        `<span class="badge badge-${h.source}">${h.source.toUpperCase()}</span>` +
        `<span class="hit-name">${escapeHtml(h.diseaseName)}</span>` +
        `<span class="score">${formatScore(h.score)}</span></li>`,
    )
    .join("");
  const thinking =
    round.thinking !== null
      ? `<details class="thinking"><summary>reasoning</summary><pre>${escapeHtml(round.thinking)}</pre></details>`
      : "";
  const diagnosis =
    round.diagnosisNames.length > 0
      ? `<div class="named">named: ${round.diagnosisNames.map(escapeHtml).join(", ")}</div>`
      : "";
  return (
    `<section class="round" data-round="${round.roundIndex}">` +
    `<header>Round ${round.roundIndex} ${gate}</header>` +
    `<ol class="hits">${hits}</ol>${thinking}${diagnosis}</section>`
  );
}

export function renderInspector(state: ViewSession): string {
  if (state.rounds.length === 0) {
    return `<p class="muted">No rounds yet.</p>`;
  }
  return state.rounds.map(renderRound).join("");
}

export function renderInputAttrs(state: ViewSession): { disabled: boolean } {
  return { disabled: !canSend(state) };
}

/** Full app projection; the e2e suite compares this string across reloads. */
export function renderApp(state: ViewSession): string {
  const disabled = renderInputAttrs(state).disabled ? " disabled" : "";
  return (
    `<div class="console">` +
    `<header class="topbar">${renderSettings(state)}</header>` +
    `${renderBanner(state)}` +
    `<main class="chat">${renderMessages(state)}</main>` +
    `<aside class="inspector">${renderInspector(state)}</aside>` +
    `<footer class="composer"><input id="patient-input"${disabled} ` +
    `placeholder="Describe your symptoms..." />` +
    `<button id="send"${disabled}>Send</button></footer>` +
    `</div>`
  );
}
