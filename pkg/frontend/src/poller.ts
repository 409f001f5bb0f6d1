/**
 * Timer loop driving the refresh cycle. Ticks are chained (never stacked),
 * and a failing API backs the interval off exponentially — capped at 8x —
 * until the first success restores the base cadence.
 */

export interface Scheduler {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

export interface Poller {
  start(): void;
  stop(): void;
  readonly running: boolean;
}

export const BACKOFF_CAP = 8;

export function createPoller(
  tick: () => Promise<void>,
  intervalMs = 2000,
  scheduler: Scheduler = {
    set: (fn, ms) => setTimeout(fn, ms),
    clear: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
  },
): Poller {
  let handle: unknown = null;
  let active = false;
  let failures = 0;

  const delay = () => intervalMs * Math.min(2 ** failures, BACKOFF_CAP);

  async function cycle(): Promise<void> {
    try {
      await tick();
      failures = 0;
    } catch {
      failures += 1; // the tick itself reports the miss; we only slow down
    }
    if (active) handle = scheduler.set(cycle, delay());
  }

  return {
    start() {
      if (active) return;
      active = true;
      void cycle();
    },
    stop() {
      active = false;
      if (handle !== null) scheduler.clear(handle);
      handle = null;
    },
    get running() {
      return active;
    },
  };
}
