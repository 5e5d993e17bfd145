/** Sensitivity slider scheduler: serializes threshold changes last-write-wins. */

import type { Phase, SessionSnapshot } from "./api.js";
import { THRESHOLD_MAX, THRESHOLD_MIN } from "./state.js";

export interface SliderDeps {
  phase(): Phase;
  patch(value: number): Promise<SessionSnapshot>;
  onAck(value: number): void;
  onRevert(value: number, note: string): void;
}

export class ThresholdScheduler {
  private inflight = false;
  private pending: number | null = null;
  private acked: number;

  constructor(
    private readonly deps: SliderDeps,
    initial = 5,
  ) {
    this.acked = initial;
  }

  get lastAcked(): number {
    return this.acked;
  }

  /** Align the acknowledged value with an externally observed threshold. */
  seed(value: number): void {
    this.acked = value;
  }

  /** Called on every drag tick; at most one PATCH is ever in flight. */
  request(value: number): void {
    if (!Number.isInteger(value) || value < THRESHOLD_MIN || value > THRESHOLD_MAX) {
      this.deps.onRevert(this.acked, "threshold must be an integer between 1 and 10");
      return;
    }
    if (this.deps.phase() !== "Streaming") {
      this.deps.onRevert(this.acked, "no active session, threshold unchanged");
      return;
    }
    if (this.inflight) {
      this.pending = value;
      return;
    }
    void this.send(value);
  }

  private async send(value: number): Promise<void> {
    this.inflight = true;
    try {
      const snapshot = await this.deps.patch(value);
      this.acked = snapshot.threshold ?? value;
      this.deps.onAck(this.acked);
    } catch (err) {
      this.pending = null; // a queued retry would hit the same failure
      this.deps.onRevert(this.acked, err instanceof Error ? err.message : String(err));
    } finally {
      this.inflight = false;
      if (this.pending !== null) {
        const next = this.pending;
        this.pending = null;
        if (next !== this.acked) {
          void this.send(next);
        }
      }
    }
  }

  /** Resolves once no request is in flight and nothing is queued. */
  async settled(): Promise<void> {
    while (this.inflight || this.pending !== null) {
      await new Promise((resolve) => setTimeout(resolve, 5));
    }
  }
}
