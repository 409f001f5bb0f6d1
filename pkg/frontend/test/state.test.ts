import { describe, expect, it } from "vitest";

import {
  ConsoleState,
  decisionTimeline,
  initialState,
  isStale,
  metricTable,
  nextEventSequence,
  reduce,
} from "../src/state.js";
import type { LedgerEvent, PendingFlag, RunSummary } from "../src/types.js";

const run: RunSummary = {
  run_id: "r1",
  status: "AwaitingFlag",
  revolution: 1,
  periodic_checkpoints: 0,
  true_checkpoints: 0,
  workdir: "/runs/r1",
  last_decision: null,
};

const pending: PendingFlag = {
  run_id: "r1",
  revolution: 1,
  context: {
    revolution: 1,
    outcomes: {},
    metrics: {},
    gates: { true_exit: "manual('done?')", periodic_exit: "never", flag: "always" },
    prompts: ["done?"],
  },
  available_decisions: ["continue", "true-exit"],
  stages: ["work"],
  workdir: "/runs/r1",
};

function event(sequence: number, kind: string, payload: object = {}): LedgerEvent {
  return { sequence, kind, timestamp: "2026-01-01T00:00:00+00:00", payload: payload as Record<string, unknown> };
}

describe("staleness", () => {
  it("marks the view stale after three consecutive missed polls", () => {
    let state = initialState;
    expect(isStale(state)).toBe(false);
    state = reduce(state, { type: "poll-failed" });
    state = reduce(state, { type: "poll-failed" });
    expect(isStale(state)).toBe(false);
    state = reduce(state, { type: "poll-failed" });
    expect(isStale(state)).toBe(true);
  });

  it("clears on the next successful poll", () => {
    let state = initialState;
    for (let i = 0; i < 5; i++) state = reduce(state, { type: "poll-failed" });
    state = reduce(state, { type: "poll-succeeded", runs: [run], pending: [] });
    expect(isStale(state)).toBe(false);
    expect(state.runs).toEqual([run]);
  });
});

describe("polling", () => {
  it("replaces the board and queue wholesale", () => {
    let state = reduce(initialState, {
      type: "poll-succeeded",
      runs: [run],
      pending: [pending],
    });
    state = reduce(state, { type: "poll-succeeded", runs: [], pending: [] });
    expect(state.runs).toEqual([]);
    expect(state.pending).toEqual([]);
  });
});

describe("selection and the incremental ledger", () => {
  it("clears detail and events when the selection changes", () => {
    let state: ConsoleState = {
      ...initialState,
      selectedRun: "r1",
      events: [event(1, "RunStarted")],
    };
    state = reduce(state, { type: "run-selected", runId: "r2" });
    expect(state.selectedRun).toBe("r2");
    expect(state.detail).toBeNull();
    expect(state.events).toEqual([]);
  });

  it("appends gapless pages and asks for the next sequence", () => {
    let state = reduce(initialState, { type: "run-selected", runId: "r1" });
    expect(nextEventSequence(state)).toBe(1);
    state = reduce(state, {
      type: "events-appended",
      runId: "r1",
      events: [event(1, "RunStarted"), event(2, "RevolutionStarted")],
    });
    expect(nextEventSequence(state)).toBe(3);
    // an overlapping refetch must not duplicate events
    state = reduce(state, {
      type: "events-appended",
      runId: "r1",
      events: [event(2, "RevolutionStarted"), event(3, "StageStarted")],
    });
    expect(state.events.map((e) => e.sequence)).toEqual([1, 2, 3]);
  });

  it("ignores pages for runs that are no longer selected", () => {
    let state = reduce(initialState, { type: "run-selected", runId: "r1" });
    state = reduce(state, {
      type: "events-appended",
      runId: "other",
      events: [event(1, "RunStarted")],
    });
    expect(state.events).toEqual([]);
  });

  it("refuses a page that would leave a gap", () => {
    let state = reduce(initialState, { type: "run-selected", runId: "r1" });
    state = reduce(state, {
      type: "events-appended",
      runId: "r1",
      events: [event(5, "StageStarted")],
    });
    expect(state.events).toEqual([]);
  });
});

describe("resolution outcomes", () => {
  const withCard = reduce(initialState, {
    type: "poll-succeeded",
    runs: [run],
    pending: [pending],
  });

  it("drops the card and posts an info notice on success", () => {
    const state = reduce(withCard, {
      type: "resolution-succeeded",
      runId: "r1",
      message: "true-exit recorded by dana",
    });
    expect(state.pending).toEqual([]);
    expect(state.notices).toEqual([
      { runId: "r1", kind: "info", message: "true-exit recorded by dana" },
    ]);
  });

  it("keeps the card but posts a conflict notice on a lost race", () => {
    const state = reduce(withCard, {
      type: "resolution-conflicted",
      runId: "r1",
      message: "run is not awaiting a flag",
    });
    expect(state.pending).toHaveLength(1); // the next poll removes it
    expect(state.notices[0].kind).toBe("conflict");
    expect(state.notices[0].message).toContain("already resolved");
  });

  it("posts an error notice on a rejected decision", () => {
    const state = reduce(withCard, {
      type: "resolution-rejected",
      runId: "r1",
      message: "budget boundary",
    });
    expect(state.notices[0]).toEqual({
      runId: "r1",
      kind: "error",
      message: "budget boundary",
    });
  });

  it("dismisses notices by index", () => {
    let state = reduce(withCard, {
      type: "resolution-rejected",
      runId: "r1",
      message: "a",
    });
    state = reduce(state, {
      type: "resolution-rejected",
      runId: "r1",
      message: "b",
    });
    state = reduce(state, { type: "notice-dismissed", index: 0 });
    expect(state.notices.map((n) => n.message)).toEqual(["b"]);
  });
});

describe("ledger-derived views", () => {
  const events = [
    event(1, "RunStarted"),
    event(4, "FlagEvaluated", { revolution: 1, metrics: { auc: 0.76 } }),
    event(5, "FlagResolved", {
      revolution: 1,
      decision: { kind: "continue" },
      resolver: "automatic",
    }),
    event(8, "FlagEvaluated", { revolution: 2, metrics: { auc: 0.87, f1: 0.8 } }),
    event(9, "FlagResolved", {
      revolution: 2,
      decision: { kind: "traverse-back", target: "collect" },
      resolver: "dana",
    }),
  ];

  it("builds one metric row per revolution", () => {
    expect(metricTable(events)).toEqual([
      { revolution: 1, metrics: { auc: 0.76 } },
      { revolution: 2, metrics: { auc: 0.87, f1: 0.8 } },
    ]);
  });

  it("builds the decision timeline with resolver and target", () => {
    expect(decisionTimeline(events)).toEqual([
      { revolution: 1, kind: "continue", target: null, resolver: "automatic" },
      { revolution: 2, kind: "traverse-back", target: "collect", resolver: "dana" },
    ]);
  });
});
