/**
 * Wire formats served by the runs API. Field names match the server's JSON
 * exactly; the console never reshapes them before storing.
 */

export type RunStatus =
  | "Running"
  | "AwaitingFlag"
  | "ExitedTrue"
  | "ExitedForced"
  | "Failed";

export interface RunSummary {
  run_id: string;
  status: RunStatus;
  revolution: number;
  periodic_checkpoints: number;
  true_checkpoints: number;
  workdir: string;
  last_decision: string | null;
}

export type OutcomeKind =
  | "satisfied"
  | "unsatisfied"
  | "needs-manual"
  | "missing-metric";

export interface GateOutcome {
  kind: OutcomeKind;
  [extra: string]: unknown;
}

/** The FlagEvaluated payload the engine parked the run on. */
export interface FlagContext {
  revolution: number;
  outcomes: Record<string, GateOutcome>;
  metrics: Record<string, number>;
  gates: Record<string, string>;
  prompts: string[];
}

export interface PendingFlag {
  run_id: string;
  revolution: number;
  context: FlagContext;
  available_decisions: string[];
  stages: string[];
  workdir: string;
}

export interface LedgerEvent {
  sequence: number;
  timestamp: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface MetricValue {
  value: number;
  source_stage: string | null;
  revolution: number;
}

export interface RunDetail extends RunSummary {
  spec_digest: string;
  stages: string[];
  metrics: Record<string, MetricValue>;
  pending?: PendingFlag;
  events: LedgerEvent[];
}

export interface LedgerPage {
  run_id: string;
  from: number;
  events: LedgerEvent[];
}

/** 200 response from POST /runs/{id}/resolve. */
export interface ResolveReceipt extends Omit<RunSummary, "last_decision"> {
  decision: { kind: string; [extra: string]: unknown };
  resolver: string;
}
