/**
 * Pure HTML builders: state in, markup string out. All interactivity is
 * wired by main.ts through data- attributes, so everything here is testable
 * without a browser.
 */

import { TRAVERSE_BACK, describeDecision } from "./decisions.js";
import {
  ConsoleState,
  Notice,
  decisionTimeline,
  isStale,
  metricTable,
} from "./state.js";
import type { LedgerEvent, PendingFlag, RunDetail, RunSummary } from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

const esc = escapeHtml;

export function renderBanner(state: ConsoleState): string {
  if (!isStale(state)) return "";
  return `<div class="banner stale" role="alert">
    Connection lost — showing stale data (${state.missedPolls} polls missed). Retrying…
  </div>`;
}

export function renderNotices(notices: Notice[]): string {
  if (notices.length === 0) return "";
  const items = notices
    .map(
      (notice, index) => `<li class="notice ${notice.kind}">
        <span class="notice-run">${esc(notice.runId)}</span>
        ${esc(notice.message)}
        <button data-action="dismiss" data-index="${index}">×</button>
      </li>`,
    )
    .join("");
  return `<ul class="notices">${items}</ul>`;
}

export function renderBoard(runs: RunSummary[], selectedRun: string | null): string {
  if (runs.length === 0) {
    return `<p class="empty">No runs under this root yet.</p>`;
  }
  const rows = runs
    .map((run) => {
      const classes = [
        "run-row",
        `status-${run.status.toLowerCase()}`,
        run.run_id === selectedRun ? "selected" : "",
      ]
        .filter(Boolean)
        .join(" ");
      return `<tr class="${classes}" data-action="select" data-run="${esc(run.run_id)}">
        <td class="run-id">${esc(run.run_id)}</td>
        <td class="status">${esc(run.status)}</td>
        <td class="revolution">${run.revolution}</td>
        <td class="last-decision">${esc(run.last_decision ?? "—")}</td>
        <td class="checkpoints">${run.periodic_checkpoints} periodic / ${run.true_checkpoints} true</td>
      </tr>`;
    })
    .join("");
  return `<table class="board">
    <thead><tr><th>run</th><th>status</th><th>revolution</th><th>last decision</th><th>checkpoints</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

/** The flag's context: prompts to answer plus the metrics vs. their gates. */
function renderContext(pending: PendingFlag): string {
  const prompts = pending.context.prompts
    .map((prompt) => `<p class="prompt">${esc(prompt)}</p>`)
    .join("");
  const metrics = Object.entries(pending.context.metrics)
    .map(([name, value]) => `<span class="metric">${esc(name)} ${esc(value)}</span>`)
    .join(" ");
  const goal = pending.context.gates["true_exit"];
  return `<div class="context">
    ${prompts}
    <p class="snapshot">${metrics || "no metrics yet"} <span class="goal">vs ${esc(goal)}</span></p>
  </div>`;
}

export function renderPendingCard(pending: PendingFlag): string {
  const options = pending.available_decisions
    .map((kind) => `<option value="${esc(kind)}">${esc(describeDecision(kind))}</option>`)
    .join("");
  const stages = pending.stages
    .map((stage) => `<option value="${esc(stage)}">${esc(stage)}</option>`)
    .join("");
  const offersTraverse = pending.available_decisions.includes(TRAVERSE_BACK);
  return `<div class="card" data-run="${esc(pending.run_id)}">
    <h3>${esc(pending.run_id)} <small>revolution ${pending.revolution}</small></h3>
    ${renderContext(pending)}
    <form data-action="resolve" data-run="${esc(pending.run_id)}">
      <select name="decision">${options}</select>
      <select name="target" ${offersTraverse ? "" : "hidden"} disabled>
        <option value="">— stage —</option>${stages}
      </select>
      <input name="resolver" type="text" placeholder="your name" required />
      <button type="submit">Resolve</button>
      <p class="inline-error" hidden></p>
    </form>
  </div>`;
}

export function renderQueue(pending: PendingFlag[]): string {
  if (pending.length === 0) {
    return `<p class="empty">No flags waiting on a decision.</p>`;
  }
  return pending.map(renderPendingCard).join("");
}

function renderMetricTable(events: LedgerEvent[]): string {
  const rows = metricTable(events);
  if (rows.length === 0) return `<p class="empty">No flag evaluations yet.</p>`;
  const names = [...new Set(rows.flatMap((row) => Object.keys(row.metrics)))].sort();
  const head = names.map((name) => `<th>${esc(name)}</th>`).join("");
  const body = rows
    .map((row) => {
      const cells = names
        .map((name) => `<td>${row.metrics[name] !== undefined ? esc(row.metrics[name]) : "—"}</td>`)
        .join("");
      return `<tr><td>${row.revolution}</td>${cells}</tr>`;
    })
    .join("");
  return `<table class="metrics">
    <thead><tr><th>revolution</th>${head}</tr></thead>
    <tbody>${body}</tbody>
  </table>`;
}

function renderTimeline(events: LedgerEvent[]): string {
  const entries = decisionTimeline(events);
  if (entries.length === 0) return "";
  const items = entries
    .map(
      (entry) => `<li>
        <span class="revolution">r${entry.revolution}</span>
        <span class="decision">${esc(describeDecision(entry.kind))}${entry.target ? ` → ${esc(entry.target)}` : ""}</span>
        <span class="resolver">by ${esc(entry.resolver)}</span>
      </li>`,
    )
    .join("");
  return `<ol class="timeline">${items}</ol>`;
}

export function renderDetail(detail: RunDetail | null, events: LedgerEvent[]): string {
  if (detail === null) {
    return `<p class="empty">Select a run to inspect it.</p>`;
  }
  return `<div class="detail">
    <h2>${esc(detail.run_id)}</h2>
    <p class="facts">
      ${esc(detail.status)} · revolution ${detail.revolution} ·
      stages: ${detail.stages.map(esc).join(" → ")}
    </p>
    ${renderMetricTable(events)}
    ${renderTimeline(events)}
  </div>`;
}

/** Compose the four regions; main.ts swaps each only when its input changed. */
export function renderApp(state: ConsoleState): Record<string, string> {
  return {
    banner: renderBanner(state),
    notices: renderNotices(state.notices),
    board: renderBoard(state.runs, state.selectedRun),
    queue: renderQueue(state.pending),
    detail: renderDetail(state.detail, state.events),
  };
}
