/**
 * Thin typed client for the runs API. The fetch implementation is injected
 * so tests can fake the transport and the parity suite can reuse the exact
 * request code the browser runs.
 */

import type {
  LedgerEvent,
  LedgerPage,
  PendingFlag,
  ResolveReceipt,
  RunDetail,
  RunSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }

  /** A mutation lost a race: someone else resolved the flag first. */
  get isConflict(): boolean {
    return this.status === 409;
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;

  constructor(
    baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
    private readonly token?: string,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  listRuns(): Promise<RunSummary[]> {
    return this.request<RunSummary[]>("GET", "/runs");
  }

  pendingFlags(): Promise<PendingFlag[]> {
    return this.request<PendingFlag[]>("GET", "/pending-flags");
  }

  runDetail(runId: string): Promise<RunDetail> {
    return this.request<RunDetail>("GET", `/runs/${encodeURIComponent(runId)}`);
  }

  /** Incremental ledger fetch: only events with sequence >= fromSeq. */
  async ledgerFrom(runId: string, fromSeq: number): Promise<LedgerEvent[]> {
    const page = await this.request<LedgerPage>(
      "GET",
      `/runs/${encodeURIComponent(runId)}/ledger?from=${fromSeq}`,
    );
    return page.events;
  }

  resolveFlag(
    runId: string,
    decision: string,
    resolver: string,
  ): Promise<ResolveReceipt> {
    return this.request<ResolveReceipt>(
      "POST",
      `/runs/${encodeURIComponent(runId)}/resolve`,
      { decision, resolver },
    );
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["content-type"] = "application/json";
    if (this.token !== undefined) {
      headers["authorization"] = `Bearer ${this.token}`;
    }
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await extractDetail(response));
    }
    return (await response.json()) as T;
  }
}

async function extractDetail(response: Response): Promise<string> {
  const text = await response.text();
  try {
    const parsed = JSON.parse(text);
    if (parsed && typeof parsed.detail === "string") return parsed.detail;
  } catch {
    // not JSON; fall through to the raw body
  }
  return text || `HTTP ${response.status}`;
}
