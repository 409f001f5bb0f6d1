/**
 * Browser wiring: owns the live state, drives the poll loop, and delegates
 * DOM events to the pure modules. Regions re-render only when their slice
 * of state actually changed, so form input survives the 2-second poll.
 */

import { ApiClient, ApiError } from "./api.js";
import { TRAVERSE_BACK, canSubmit, encodeDecision } from "./decisions.js";
import { createPoller } from "./poller.js";
import { renderApp } from "./render.js";
import {
  Action,
  ConsoleState,
  initialState,
  nextEventSequence,
  reduce,
} from "./state.js";

const POLL_INTERVAL_MS = 2000;
const RESOLVER_KEY = "spiral-console-resolver";

/** Single setting: the API base URL (?api=… beats the injected global). */
export function resolveBaseUrl(search: string, injected?: string): string {
  const fromQuery = new URLSearchParams(search).get("api");
  return fromQuery ?? injected ?? "http://127.0.0.1:8800";
}

function region(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing console region #${id}`);
  return node;
}

export function mountConsole(): void {
  const api = new ApiClient(
    resolveBaseUrl(
      window.location.search,
      (window as { SPIRAL_API_BASE?: string }).SPIRAL_API_BASE,
    ),
  );
  const regions = {
    banner: region("banner"),
    notices: region("notices"),
    board: region("board"),
    queue: region("queue"),
    detail: region("detail"),
  };
  const painted: Record<string, string> = {};
  let state: ConsoleState = initialState;

  function paint(): void {
    const rendered = renderApp(state);
    for (const [name, html] of Object.entries(rendered)) {
      if (painted[name] === html) continue;
      painted[name] = html;
      regions[name as keyof typeof regions].innerHTML = html;
    }
    for (const input of document.querySelectorAll<HTMLInputElement>(
      'input[name="resolver"]',
    )) {
      if (input.value === "") {
        input.value = localStorage.getItem(RESOLVER_KEY) ?? "";
      }
    }
  }

  function dispatch(action: Action): void {
    state = reduce(state, action);
    paint();
  }

  async function refresh(): Promise<void> {
    try {
      const [runs, pending] = await Promise.all([
        api.listRuns(),
        api.pendingFlags(),
      ]);
      dispatch({ type: "poll-succeeded", runs, pending });
      if (state.selectedRun !== null) {
        const detail = await api.runDetail(state.selectedRun);
        dispatch({ type: "detail-loaded", detail });
        const events = await api.ledgerFrom(
          state.selectedRun,
          nextEventSequence(state),
        );
        dispatch({
          type: "events-appended",
          runId: state.selectedRun,
          events,
        });
      }
    } catch (error) {
      dispatch({ type: "poll-failed" });
      throw error; // the poller backs off on failures
    }
  }

  const poller = createPoller(refresh, POLL_INTERVAL_MS);

  regions.board.addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest<HTMLElement>(
      '[data-action="select"]',
    );
    if (row?.dataset.run) {
      dispatch({ type: "run-selected", runId: row.dataset.run });
      void refresh().catch(() => undefined);
    }
  });

  regions.notices.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLElement>(
      '[data-action="dismiss"]',
    );
    if (button?.dataset.index !== undefined) {
      dispatch({ type: "notice-dismissed", index: Number(button.dataset.index) });
    }
  });

  // Enable the stage picker exactly while traverse-back is selected.
  regions.queue.addEventListener("change", (event) => {
    const select = event.target as HTMLSelectElement;
    if (select.name !== "decision") return;
    const form = select.closest("form");
    const target = form?.querySelector<HTMLSelectElement>('select[name="target"]');
    if (target) target.disabled = select.value !== TRAVERSE_BACK;
  });

  regions.queue.addEventListener("submit", (event) => {
    event.preventDefault();
    const form = event.target as HTMLFormElement;
    const runId = form.dataset.run;
    if (!runId) return;
    const pending = state.pending.find((p) => p.run_id === runId);
    if (pending === undefined) return;

    const data = new FormData(form);
    const selection = {
      kind: String(data.get("decision") ?? ""),
      target: data.get("target") ? String(data.get("target")) : undefined,
    };
    const resolver = String(data.get("resolver") ?? "").trim();
    const inlineError = form.querySelector<HTMLElement>(".inline-error");

    if (!canSubmit(selection, pending, resolver)) {
      if (inlineError) {
        inlineError.hidden = false;
        inlineError.textContent =
          selection.kind === TRAVERSE_BACK && !selection.target
            ? "traverse-back needs a stage"
            : "pick a decision and enter your name";
      }
      return;
    }

    localStorage.setItem(RESOLVER_KEY, resolver);
    api
      .resolveFlag(runId, encodeDecision(selection), resolver)
      .then((receipt) => {
        dispatch({
          type: "resolution-succeeded",
          runId,
          message: `${receipt.decision.kind} recorded by ${receipt.resolver}`,
        });
        void refresh().catch(() => undefined);
      })
      .catch((error: unknown) => {
        if (error instanceof ApiError && error.isConflict) {
          dispatch({ type: "resolution-conflicted", runId, message: error.message });
          void refresh().catch(() => undefined); // converge to the winner's state
        } else if (error instanceof ApiError) {
          dispatch({ type: "resolution-rejected", runId, message: error.message });
        } else {
          dispatch({ type: "poll-failed" });
        }
      });
  });

  paint();
  poller.start();
}

if (typeof document !== "undefined" && document.getElementById("board") !== null) {
  mountConsole();
}
