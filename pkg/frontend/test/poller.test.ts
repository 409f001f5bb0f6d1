import { describe, expect, it } from "vitest";

import { Scheduler, createPoller } from "../src/poller.js";

/** Deterministic scheduler: collects timers, fires them on demand. */
class FakeClock implements Scheduler {
  pending: { fn: () => void; ms: number; id: number }[] = [];
  private counter = 0;

  set(fn: () => void, ms: number): unknown {
    this.pending.push({ fn, ms, id: ++this.counter });
    return this.counter;
  }

  clear(handle: unknown): void {
    this.pending = this.pending.filter((t) => t.id !== handle);
  }

  /** Run the single scheduled tick and report its delay. */
  async fire(): Promise<number> {
    const timer = this.pending.shift();
    if (timer === undefined) throw new Error("nothing scheduled");
    timer.fn();
    await flush();
    return timer.ms;
  }
}

/** Let the poller's promise chain settle. */
const flush = () => new Promise((resolve) => setTimeout(resolve, 0));

describe("createPoller", () => {
  it("ticks immediately on start and reschedules at the base interval", async () => {
    const clock = new FakeClock();
    let ticks = 0;
    const poller = createPoller(async () => void ticks++, 2000, clock);

    poller.start();
    await flush();
    expect(ticks).toBe(1);
    expect(await clock.fire()).toBe(2000);
    expect(ticks).toBe(2);
  });

  it("backs off exponentially on failures, capped, and recovers", async () => {
    const clock = new FakeClock();
    const outcomes = [false, false, false, false, false, true, true];
    let call = 0;
    const poller = createPoller(
      async () => {
        if (!outcomes[call++]) throw new Error("api down");
      },
      1000,
      clock,
    );

    poller.start();
    await flush();
    const delays = [];
    for (let i = 0; i < 6; i++) delays.push(await clock.fire());
    // five failures: 2x, 4x, 8x then capped; first success restores base
    expect(delays).toEqual([2000, 4000, 8000, 8000, 8000, 1000]);
  });

  it("stops cleanly and does not tick again", async () => {
    const clock = new FakeClock();
    let ticks = 0;
    const poller = createPoller(async () => void ticks++, 500, clock);

    poller.start();
    await flush();
    expect(poller.running).toBe(true);
    poller.stop();
    expect(poller.running).toBe(false);
    expect(clock.pending).toEqual([]);
    expect(ticks).toBe(1);
  });

  it("start is idempotent while running", async () => {
    const clock = new FakeClock();
    let ticks = 0;
    const poller = createPoller(async () => void ticks++, 500, clock);

    poller.start();
    poller.start();
    await flush();
    expect(ticks).toBe(1);
    expect(clock.pending).toHaveLength(1);
    poller.stop();
  });
});
