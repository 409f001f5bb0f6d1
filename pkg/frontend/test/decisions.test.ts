import { describe, expect, it } from "vitest";

import {
  CONTINUE,
  FORCED_EXIT,
  PERIODIC_EXIT,
  TRAVERSE_BACK,
  TRUE_EXIT,
  canSubmit,
  describeDecision,
  encodeDecision,
} from "../src/decisions.js";
import type { PendingFlag } from "../src/types.js";

const pending: PendingFlag = {
  run_id: "run-1",
  revolution: 2,
  context: {
    revolution: 2,
    outcomes: {},
    metrics: { auc: 0.82 },
    gates: { true_exit: "auc >= 0.85", periodic_exit: "never", flag: "always" },
    prompts: ["Is the business goal met?"],
  },
  available_decisions: [CONTINUE, TRAVERSE_BACK, PERIODIC_EXIT, TRUE_EXIT],
  stages: ["collect", "train"],
  workdir: "/runs/run-1",
};

describe("encodeDecision", () => {
  it("passes plain decisions through", () => {
    expect(encodeDecision({ kind: CONTINUE })).toBe("continue");
    expect(encodeDecision({ kind: TRUE_EXIT })).toBe("true-exit");
    expect(encodeDecision({ kind: PERIODIC_EXIT })).toBe("periodic-exit");
    expect(encodeDecision({ kind: FORCED_EXIT })).toBe("forced-exit");
  });

  it("carries the traverse target in the back: form", () => {
    expect(encodeDecision({ kind: TRAVERSE_BACK, target: "train" })).toBe(
      "back:train",
    );
  });
});

describe("canSubmit", () => {
  it("accepts an offered decision with a resolver name", () => {
    expect(canSubmit({ kind: CONTINUE }, pending, "dana")).toBe(true);
  });

  it("rejects a blank or whitespace resolver", () => {
    expect(canSubmit({ kind: CONTINUE }, pending, "")).toBe(false);
    expect(canSubmit({ kind: CONTINUE }, pending, "   ")).toBe(false);
  });

  it("rejects decisions the server did not offer", () => {
    expect(canSubmit({ kind: FORCED_EXIT }, pending, "dana")).toBe(false);
    const atBudget = { ...pending, available_decisions: [TRUE_EXIT, FORCED_EXIT] };
    expect(canSubmit({ kind: CONTINUE }, atBudget, "dana")).toBe(false);
    expect(canSubmit({ kind: FORCED_EXIT }, atBudget, "dana")).toBe(true);
  });

  it("requires traverse-back to name one of the run's stages", () => {
    expect(canSubmit({ kind: TRAVERSE_BACK }, pending, "dana")).toBe(false);
    expect(canSubmit({ kind: TRAVERSE_BACK, target: "ghost" }, pending, "dana")).toBe(
      false,
    );
    expect(canSubmit({ kind: TRAVERSE_BACK, target: "train" }, pending, "dana")).toBe(
      true,
    );
  });
});

describe("describeDecision", () => {
  it("labels the known decisions", () => {
    expect(describeDecision(TRAVERSE_BACK)).toBe("Traverse back");
    expect(describeDecision(TRUE_EXIT)).toBe("True exit");
  });

  it("falls back to the raw kind", () => {
    expect(describeDecision("mystery")).toBe("mystery");
  });
});
