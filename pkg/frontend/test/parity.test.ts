/**
 * End-to-end parity: the console's resolve path must land in the run ledger
 * exactly as the command-line path does, and a lost resolution race must
 * surface as one success plus one visible conflict.
 *
 * Boots the real HTTP service over real runs in a temp directory; requires
 * the Python package and its `spiral` entry point on PATH.
 */

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { TRUE_EXIT, encodeDecision } from "../src/decisions.js";
import { renderNotices } from "../src/render.js";
import { initialState, reduce } from "../src/state.js";
import type { LedgerEvent } from "../src/types.js";

let root: string;
let server: ChildProcess | undefined;
let serverLog = "";
let api: ApiClient;

const RUN_NAMES = ["via-console", "via-cli", "contested"] as const;
const workdirs = {} as Record<(typeof RUN_NAMES)[number], string>;
const runIds = {} as Record<(typeof RUN_NAMES)[number], string>;

function spiral(args: string[], expectedExit: number): void {
  const result = spawnSync("spiral", args, { encoding: "utf8" });
  expect(
    result.status,
    `spiral ${args.join(" ")}\n${result.stdout}${result.stderr}`,
  ).toBe(expectedExit);
}

function ledgerEvents(workdir: string): LedgerEvent[] {
  return readFileSync(join(workdir, "ledger.jsonl"), "utf8")
    .trimEnd()
    .split("\n")
    .map((line) => JSON.parse(line) as LedgerEvent);
}

function flagResolutions(workdir: string): LedgerEvent[] {
  return ledgerEvents(workdir).filter((e) => e.kind === "FlagResolved");
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitForApi(client: ApiClient): Promise<void> {
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      await client.listRuns();
      return;
    } catch {
      if (Date.now() > deadline) {
        throw new Error(`runs API never came up\n${serverLog}`);
      }
      await new Promise((resolve) => setTimeout(resolve, 200));
    }
  }
}

beforeAll(async () => {
  root = mkdtempSync(join(tmpdir(), "console-parity-"));

  // A manual-gated project: every run parks awaiting a decision (exit 3).
  spiral(["init", "blank", join(root, "project")], 0);
  const spec = join(root, "project", "spiral.json");
  for (const name of RUN_NAMES) {
    const workdir = join(root, name);
    spiral(["run", spec, "--workdir", workdir], 3);
    workdirs[name] = workdir;
    const started = ledgerEvents(workdir)[0];
    runIds[name] = started.payload["run_id"] as string;
  }

  const port = await freePort();
  server = spawn(
    "python3",
    ["-m", "spiralflow.api", "--root", root, "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  server.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  api = new ApiClient(`http://127.0.0.1:${port}`);
  await waitForApi(api);
});

afterAll(() => {
  server?.kill();
  if (root !== undefined) rmSync(root, { recursive: true, force: true });
});

describe("console/CLI resolution parity", () => {
  it("writes the same FlagResolved decision and resolver either way", async () => {
    // Same decision through both doors, by the same operator name.
    const receipt = await api.resolveFlag(
      runIds["via-console"],
      encodeDecision({ kind: TRUE_EXIT }),
      "dana",
    );
    expect(receipt.status).toBe("ExitedTrue");
    expect(receipt.resolver).toBe("dana");

    spiral(["resolve", workdirs["via-cli"], "true-exit", "--resolver", "dana"], 0);

    const viaConsole = flagResolutions(workdirs["via-console"]);
    const viaCli = flagResolutions(workdirs["via-cli"]);
    expect(viaConsole).toHaveLength(1);
    expect(viaCli).toHaveLength(1);
    expect(viaConsole[0].payload["decision"]).toEqual(
      viaCli[0].payload["decision"],
    );
    expect(viaConsole[0].payload["resolver"]).toEqual(
      viaCli[0].payload["resolver"],
    );
    expect(viaConsole[0].payload["decision"]).toEqual({ kind: "true-exit" });
    expect(viaConsole[0].payload["resolver"]).toBe("dana");
  });

  it("removes the resolved run from the pending queue", async () => {
    const pending = await api.pendingFlags();
    const ids = pending.map((p) => p.run_id);
    expect(ids).not.toContain(runIds["via-console"]);
    expect(ids).not.toContain(runIds["via-cli"]);
    expect(ids).toContain(runIds["contested"]);
  });
});

describe("concurrent double-resolution", () => {
  it("yields exactly one success and one visible conflict", async () => {
    const contested = runIds["contested"];
    const [alice, bob] = await Promise.allSettled([
      api.resolveFlag(contested, "true-exit", "alice"),
      api.resolveFlag(contested, "true-exit", "bob"),
    ]);

    const outcomes = [alice, bob];
    const wins = outcomes.filter((o) => o.status === "fulfilled");
    const losses = outcomes.filter((o) => o.status === "rejected");
    expect(wins).toHaveLength(1);
    expect(losses).toHaveLength(1);

    const defeat = (losses[0] as PromiseRejectedResult).reason as ApiError;
    expect(defeat).toBeInstanceOf(ApiError);
    expect(defeat.status).toBe(409);

    // The ledger recorded the winner once, with the winner's name.
    const resolutions = flagResolutions(workdirs["contested"]);
    expect(resolutions).toHaveLength(1);
    const winner = (wins[0] as PromiseFulfilledResult<{ resolver: string }>).value;
    expect(resolutions[0].payload["resolver"]).toBe(winner.resolver);
    expect(["alice", "bob"]).toContain(resolutions[0].payload["resolver"]);

    // The loser's 409 renders as a conflict notice in the console.
    const state = reduce(initialState, {
      type: "resolution-conflicted",
      runId: contested,
      message: defeat.message,
    });
    const html = renderNotices(state.notices);
    expect(html).toContain("notice conflict");
    expect(html).toContain("already resolved");
  });
});
