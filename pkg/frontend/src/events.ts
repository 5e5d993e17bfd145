/** Status event stream subscription with automatic reconnect. */

import type { StatusEventWire } from "./api.js";

export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface StreamHandlers {
  onEvent(event: StatusEventWire): void;
  onUp(): void;
  onDown(note: string): void;
}

export class EventStream {
  private socket: SocketLike | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private backoffMs: number;
  private stopped = true;

  constructor(
    private readonly url: string,
    private readonly factory: SocketFactory,
    private readonly handlers: StreamHandlers,
    private readonly minBackoffMs = 250,
    private readonly maxBackoffMs = 4000,
  ) {
    this.backoffMs = minBackoffMs;
  }

  start(): void {
    if (!this.stopped) {
      return;
    }
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const socket = this.socket;
    this.socket = null;
    if (socket !== null) {
      socket.onclose = null;
      socket.onerror = null;
      socket.close();
    }
  }

  private connect(): void {
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.scheduleRetry("event stream connect failed");
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.backoffMs = this.minBackoffMs;
      this.handlers.onUp();
    };
    socket.onmessage = (message) => {
      let event: StatusEventWire;
      try {
        event = JSON.parse(String(message.data)) as StatusEventWire;
      } catch {
        return; // a malformed frame is dropped; the stream stays up
      }
      this.handlers.onEvent(event);
    };
    socket.onclose = () => this.scheduleRetry("event stream lost");
    socket.onerror = () => {
      // the close event follows and schedules the retry
    };
  }

  private scheduleRetry(note: string): void {
    this.socket = null;
    if (this.stopped) {
      return;
    }
    this.handlers.onDown(`${note}, retrying in ${this.backoffMs} ms`);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.connect();
    }, this.backoffMs);
    this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
  }
}
