/** Typed client for the daemon control API. */

export type Phase = "Idle" | "Connecting" | "Streaming" | "Stopping" | "Faulted";
export type Level = "info" | "warn" | "error";

export interface Binding {
  activity: string;
  onKey: string;
}

export interface Profile {
  name: string;
  taskName: string;
  binding: Binding;
  defaultThreshold: number;
  trained: boolean;
}

export interface Activity {
  name: string;
  label: string;
  onKey: string;
}

export interface Counts {
  nPositive: number;
  nNegative: number;
}

export interface SessionSnapshot {
  phase: Phase;
  threshold: number | null;
  counts: Counts | null;
}

export interface StatusEventWire {
  time: number;
  level: Level;
  message: string;
  phase: Phase;
  counts?: Counts;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ControlApi {
  constructor(
    private readonly base = "",
    // fetch must stay bound to its global, so wrap rather than alias it
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "Unreachable", `daemon unreachable: ${String(err)}`);
    }
    const text = await response.text();
    let payload: unknown = null;
    if (text) {
      try {
        payload = JSON.parse(text);
      } catch {
        payload = null;
      }
    }
    if (!response.ok) {
      const doc = (payload ?? {}) as { error?: string; message?: string };
      throw new ApiError(
        response.status,
        doc.error ?? `HTTP${response.status}`,
        doc.message ?? response.statusText,
      );
    }
    return payload as T;
  }

  listProfiles(): Promise<Profile[]> {
    return this.call("GET", "/profiles");
  }

  saveProfile(profile: Profile, overwrite = false): Promise<Profile> {
    const { name, ...fields } = profile;
    return this.call("PUT", `/profiles/${encodeURIComponent(name)}`, {
      ...fields,
      overwrite,
    });
  }

  train(name: string): Promise<Profile> {
    return this.call("POST", `/profiles/${encodeURIComponent(name)}/train`);
  }

  activities(): Promise<Activity[]> {
    return this.call("GET", "/activities");
  }

  session(): Promise<SessionSnapshot> {
    return this.call("GET", "/session");
  }

  startSession(profile: string, activity?: string, threshold?: number): Promise<SessionSnapshot> {
    return this.call("POST", "/session", {
      profile,
      activity: activity ?? null,
      threshold: threshold ?? null,
    });
  }

  stopSession(): Promise<StatusEventWire> {
    return this.call("DELETE", "/session");
  }

  setThreshold(threshold: number): Promise<SessionSnapshot> {
    return this.call("PATCH", "/session", { threshold });
  }
}
