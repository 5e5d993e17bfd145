import { describe, expect, test } from "vitest";

import type { Phase, SessionSnapshot } from "../src/api.js";
import { ThresholdScheduler } from "../src/slider.js";

function snapshot(threshold: number): SessionSnapshot {
  return { phase: "Streaming", threshold, counts: { nPositive: 0, nNegative: 10 } };
}

function deferred<T>() {
  let resolve!: (value: T) => void;
  let reject!: (reason: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

describe("threshold scheduler", () => {
  test("50 rapid drags coalesce and settle last-write-wins", async () => {
    let daemonThreshold = 5;
    let patches = 0;
    const scheduler = new ThresholdScheduler(
      {
        phase: () => "Streaming",
        patch: async (value) => {
          patches++;
          await sleep(2);
          daemonThreshold = value;
          return snapshot(value);
        },
        onAck: () => {},
        onRevert: (_, note) => {
          throw new Error(`unexpected revert: ${note}`);
        },
      },
      5,
    );
    const values = Array.from({ length: 50 }, (_, i) => (i % 10) + 1);
    for (const value of values) {
      scheduler.request(value);
    }
    await scheduler.settled();
    expect(daemonThreshold).toBe(values[49]);
    expect(scheduler.lastAcked).toBe(values[49]);
    // one in flight plus one queued; never a request per drag tick
    expect(patches).toBeLessThanOrEqual(3);
  });

  test("interleaved drags send only first and last", async () => {
    const first = deferred<SessionSnapshot>();
    const sent: number[] = [];
    const acks: number[] = [];
    const scheduler = new ThresholdScheduler(
      {
        phase: () => "Streaming",
        patch: (value) => {
          sent.push(value);
          return sent.length === 1 ? first.promise : Promise.resolve(snapshot(value));
        },
        onAck: (value) => acks.push(value),
        onRevert: () => {},
      },
      5,
    );
    scheduler.request(3);
    scheduler.request(7);
    scheduler.request(5);
    first.resolve(snapshot(3));
    await scheduler.settled();
    expect(sent).toEqual([3, 5]);
    expect(acks).toEqual([3, 5]);
    expect(scheduler.lastAcked).toBe(5);
  });

  test("drag while idle short-circuits with a revert", async () => {
    const reverts: Array<[number, string]> = [];
    let patched = false;
    const scheduler = new ThresholdScheduler(
      {
        phase: (): Phase => "Idle",
        patch: () => {
          patched = true;
          return Promise.resolve(snapshot(9));
        },
        onAck: () => {},
        onRevert: (value, note) => reverts.push([value, note]),
      },
      4,
    );
    scheduler.request(9);
    await scheduler.settled();
    expect(patched).toBe(false);
    expect(reverts).toEqual([[4, "no active session, threshold unchanged"]]);
    expect(scheduler.lastAcked).toBe(4);
  });

  test("a rejected patch reverts to the last acknowledged value", async () => {
    const reverts: Array<[number, string]> = [];
    const scheduler = new ThresholdScheduler(
      {
        phase: () => "Streaming",
        patch: () => Promise.reject(new Error("no session is running")),
        onAck: () => {},
        onRevert: (value, note) => reverts.push([value, note]),
      },
      6,
    );
    scheduler.request(2);
    await scheduler.settled();
    expect(reverts).toEqual([[6, "no session is running"]]);
    expect(scheduler.lastAcked).toBe(6);
  });

  test("out-of-range values never reach the daemon", async () => {
    const reverts: string[] = [];
    let patched = false;
    const scheduler = new ThresholdScheduler(
      {
        phase: () => "Streaming",
        patch: () => {
          patched = true;
          return Promise.resolve(snapshot(1));
        },
        onAck: () => {},
        onRevert: (_, note) => reverts.push(note),
      },
      5,
    );
    scheduler.request(0);
    scheduler.request(11);
    scheduler.request(2.5);
    await scheduler.settled();
    expect(patched).toBe(false);
    expect(reverts).toHaveLength(3);
  });
});
