/**
 * Flag-decision grammar. The wire encoding is shared with the command line
 * (`back:<stage>` carries the traverse target), so a resolution submitted
 * here lands in the ledger exactly as a CLI resolution would.
 */

import type { PendingFlag } from "./types.js";

export const CONTINUE = "continue";
export const TRAVERSE_BACK = "traverse-back";
export const PERIODIC_EXIT = "periodic-exit";
export const TRUE_EXIT = "true-exit";
export const FORCED_EXIT = "forced-exit";

export interface DecisionSelection {
  kind: string;
  /** Stage to jump back to; required iff kind is traverse-back. */
  target?: string;
}

export const DECISION_LABELS: Record<string, string> = {
  [CONTINUE]: "Continue",
  [TRAVERSE_BACK]: "Traverse back",
  [PERIODIC_EXIT]: "Periodic exit",
  [TRUE_EXIT]: "True exit",
  [FORCED_EXIT]: "Forced exit",
};

export function describeDecision(kind: string): string {
  return DECISION_LABELS[kind] ?? kind;
}

/** Encode a selection in the grammar POST /resolve (and the CLI) accept. */
export function encodeDecision(selection: DecisionSelection): string {
  if (selection.kind === TRAVERSE_BACK) {
    return `back:${selection.target ?? ""}`;
  }
  return selection.kind;
}

/**
 * Gate the submit action: the decision must be one the server offered,
 * traverse-back must name one of the run's stages, and the resolver name
 * (the audit trail) must not be blank.
 */
export function canSubmit(
  selection: DecisionSelection,
  pending: PendingFlag,
  resolver: string,
): boolean {
  if (resolver.trim() === "") return false;
  if (!pending.available_decisions.includes(selection.kind)) return false;
  if (selection.kind === TRAVERSE_BACK) {
    return (
      selection.target !== undefined && pending.stages.includes(selection.target)
    );
  }
  return true;
}
