/**
 * Console view model: a pure reducer over poll results and operator actions.
 *
 * The console never owns authoritative state — every poll replaces the run
 * board and pending queue wholesale, so after any action the next refresh
 * converges the view to whatever the server says. Only staleness counting,
 * selection, the incrementally-fetched ledger, and notices live here.
 */

import type {
  LedgerEvent,
  PendingFlag,
  RunDetail,
  RunSummary,
} from "./types.js";

/** Consecutive missed polls before the rendered data is flagged as stale. */
export const STALE_AFTER = 3;

export interface Notice {
  runId: string;
  kind: "conflict" | "error" | "info";
  message: string;
}

export interface ConsoleState {
  runs: RunSummary[];
  pending: PendingFlag[];
  selectedRun: string | null;
  detail: RunDetail | null;
  /** Selected run's ledger, grown via `from=<seq>` pages, never refetched. */
  events: LedgerEvent[];
  missedPolls: number;
  notices: Notice[];
}

export const initialState: ConsoleState = {
  runs: [],
  pending: [],
  selectedRun: null,
  detail: null,
  events: [],
  missedPolls: 0,
  notices: [],
};

export type Action =
  | { type: "poll-succeeded"; runs: RunSummary[]; pending: PendingFlag[] }
  | { type: "poll-failed" }
  | { type: "run-selected"; runId: string | null }
  | { type: "detail-loaded"; detail: RunDetail }
  | { type: "events-appended"; runId: string; events: LedgerEvent[] }
  | { type: "resolution-succeeded"; runId: string; message: string }
  | { type: "resolution-conflicted"; runId: string; message: string }
  | { type: "resolution-rejected"; runId: string; message: string }
  | { type: "notice-dismissed"; index: number };

export function reduce(state: ConsoleState, action: Action): ConsoleState {
  switch (action.type) {
    case "poll-succeeded":
      return { ...state, runs: action.runs, pending: action.pending, missedPolls: 0 };

    case "poll-failed":
      return { ...state, missedPolls: state.missedPolls + 1 };

    case "run-selected":
      if (action.runId === state.selectedRun) return state;
      return { ...state, selectedRun: action.runId, detail: null, events: [] };

    case "detail-loaded":
      if (action.detail.run_id !== state.selectedRun) return state;
      return { ...state, detail: action.detail };

    case "events-appended": {
      if (action.runId !== state.selectedRun) return state;
      const last = state.events[state.events.length - 1];
      let next = last === undefined ? 1 : last.sequence + 1;
      const grown = [...state.events];
      for (const event of action.events) {
        if (event.sequence !== next) continue; // overlap or gap: keep ours
        grown.push(event);
        next += 1;
      }
      return grown.length === state.events.length
        ? state
        : { ...state, events: grown };
    }

    case "resolution-succeeded":
      // Drop the card immediately; the next poll is the authority anyway.
      return {
        ...state,
        pending: state.pending.filter((p) => p.run_id !== action.runId),
        notices: [
          ...state.notices,
          { runId: action.runId, kind: "info", message: action.message },
        ],
      };

    case "resolution-conflicted":
      return {
        ...state,
        notices: [
          ...state.notices,
          {
            runId: action.runId,
            kind: "conflict",
            message: `already resolved elsewhere — ${action.message}`,
          },
        ],
      };

    case "resolution-rejected":
      return {
        ...state,
        notices: [
          ...state.notices,
          { runId: action.runId, kind: "error", message: action.message },
        ],
      };

    case "notice-dismissed":
      return {
        ...state,
        notices: state.notices.filter((_, i) => i !== action.index),
      };
  }
}

export function isStale(state: ConsoleState): boolean {
  return state.missedPolls >= STALE_AFTER;
}

/** First sequence the next incremental ledger fetch should ask for. */
export function nextEventSequence(state: ConsoleState): number {
  const last = state.events[state.events.length - 1];
  return last === undefined ? 1 : last.sequence + 1;
}

// ---------------------------------------------------------------------------
// Derived views of the selected run's ledger

export interface MetricRow {
  revolution: number;
  metrics: Record<string, number>;
}

/** One row per revolution, from the snapshot each flag evaluation saw. */
export function metricTable(events: LedgerEvent[]): MetricRow[] {
  const rows: MetricRow[] = [];
  for (const event of events) {
    if (event.kind !== "FlagEvaluated") continue;
    rows.push({
      revolution: event.payload["revolution"] as number,
      metrics: event.payload["metrics"] as Record<string, number>,
    });
  }
  return rows;
}

export interface TimelineEntry {
  revolution: number;
  kind: string;
  target: string | null;
  resolver: string;
}

/** The decision made at each resolved flag, oldest first. */
export function decisionTimeline(events: LedgerEvent[]): TimelineEntry[] {
  const entries: TimelineEntry[] = [];
  for (const event of events) {
    if (event.kind !== "FlagResolved") continue;
    const decision = event.payload["decision"] as {
      kind: string;
      target?: string;
    };
    entries.push({
      revolution: event.payload["revolution"] as number,
      kind: decision.kind,
      target: decision.target ?? null,
      resolver: event.payload["resolver"] as string,
    });
  }
  return entries;
}
