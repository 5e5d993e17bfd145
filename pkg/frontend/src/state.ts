/** Console state store: a single mutable state object with change listeners. */

import type {
  Activity,
  Counts,
  Phase,
  Profile,
  SessionSnapshot,
  StatusEventWire,
  Level,
} from "./api.js";

export const LOG_LIMIT = 200;
export const WINDOW_SIZE = 10;
export const THRESHOLD_MIN = 1;
export const THRESHOLD_MAX = 10;

export interface LogEntry {
  time: number;
  level: Level;
  message: string;
}

export interface ConsoleState {
  profiles: Profile[];
  activities: Activity[];
  selectedProfile: string | null;
  selectedActivity: string | null;
  threshold: number;
  phase: Phase;
  statusLog: LogEntry[];
  liveCounts: Counts | null;
  banner: string | null;
  streamUp: boolean;
  notice: string | null;
  busy: boolean;
}

export function initialState(): ConsoleState {
  return {
    profiles: [],
    activities: [],
    selectedProfile: null,
    selectedActivity: null,
    threshold: 5,
    phase: "Idle",
    statusLog: [],
    liveCounts: null,
    banner: null,
    streamUp: false,
    notice: null,
    busy: false,
  };
}

export interface ControlFlags {
  canStart: boolean;
  canStop: boolean;
  canTrain: boolean;
  canSlide: boolean;
  startBlocker: string | null;
  stopLabel: "Stop" | "Reset";
}

export function selectedProfile(state: ConsoleState): Profile | null {
  return state.profiles.find((p) => p.name === state.selectedProfile) ?? null;
}

/** Derive which controls may issue requests without tripping a daemon precondition. */
export function controlsFor(state: ConsoleState): ControlFlags {
  const profile = selectedProfile(state);
  let startBlocker: string | null = null;
  if (state.phase === "Idle") {
    if (profile === null) {
      startBlocker = "select a profile";
    } else if (!profile.trained) {
      startBlocker = "train first";
    } else if (state.selectedActivity === null) {
      startBlocker = "select an activity";
    }
  }
  const canStart =
    state.phase === "Idle" &&
    !state.busy &&
    profile !== null &&
    profile.trained &&
    state.selectedActivity !== null;
  const canStop =
    !state.busy &&
    (state.phase === "Streaming" || state.phase === "Connecting" || state.phase === "Faulted");
  const canTrain = state.phase === "Idle" && !state.busy && profile !== null;
  const canSlide = state.phase === "Streaming";
  return {
    canStart,
    canStop,
    canTrain,
    canSlide,
    startBlocker,
    stopLabel: state.phase === "Faulted" ? "Reset" : "Stop",
  };
}

/** Most recent error-level entry, surfaced prominently while Faulted. */
export function lastError(state: ConsoleState): LogEntry | null {
  for (let i = state.statusLog.length - 1; i >= 0; i--) {
    const entry = state.statusLog[i];
    if (entry !== undefined && entry.level === "error") {
      return entry;
    }
  }
  return null;
}

export class ConsoleStore {
  readonly state: ConsoleState = initialState();
  private listeners: Array<(state: ConsoleState) => void> = [];

  subscribe(listener: (state: ConsoleState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  setProfiles(profiles: Profile[]): void {
    this.state.profiles = profiles;
    if (
      this.state.selectedProfile !== null &&
      !profiles.some((p) => p.name === this.state.selectedProfile)
    ) {
      this.state.selectedProfile = null;
    }
    this.emit();
  }

  setActivities(activities: Activity[]): void {
    this.state.activities = activities;
    this.emit();
  }

  selectProfile(name: string | null): void {
    this.state.selectedProfile = name;
    this.state.notice = null;
    this.emit();
  }

  selectActivity(name: string | null): void {
    this.state.selectedActivity = name;
    this.state.notice = null;
    this.emit();
  }

  setBusy(busy: boolean): void {
    this.state.busy = busy;
    this.emit();
  }

  setBanner(message: string | null): void {
    this.state.banner = message;
    this.emit();
  }

  showNotice(message: string | null): void {
    this.state.notice = message;
    this.emit();
  }

  ackThreshold(value: number): void {
    this.state.threshold = value;
    this.state.notice = null;
    this.emit();
  }

  appendLog(level: Level, message: string, time: number = Date.now() / 1000): void {
    this.state.statusLog.push({ time, level, message });
    const excess = this.state.statusLog.length - LOG_LIMIT;
    if (excess > 0) {
      this.state.statusLog.splice(0, excess);
    }
    this.emit();
  }

  /** Reconciliation path, used at boot and whenever the event stream is down. */
  applySnapshot(snapshot: SessionSnapshot): void {
    this.setPhase(snapshot.phase);
    if (snapshot.threshold !== null) {
      this.state.threshold = snapshot.threshold;
    }
    if (snapshot.counts !== null && countsValid(snapshot.counts)) {
      this.state.liveCounts = snapshot.counts;
    }
    this.emit();
  }

  applyEvent(event: StatusEventWire): void {
    this.state.statusLog.push({ time: event.time, level: event.level, message: event.message });
    const excess = this.state.statusLog.length - LOG_LIMIT;
    if (excess > 0) {
      this.state.statusLog.splice(0, excess);
    }
    this.setPhase(event.phase);
    if (event.counts !== undefined && countsValid(event.counts)) {
      this.state.liveCounts = event.counts;
    }
    this.emit();
  }

  streamDown(note: string): void {
    this.state.streamUp = false;
    this.appendLog("warn", note);
  }

  streamRestored(): void {
    const wasDown = !this.state.streamUp;
    this.state.streamUp = true;
    this.state.banner = null;
    if (wasDown) {
      this.appendLog("info", "event stream connected");
    } else {
      this.emit();
    }
  }

  private setPhase(phase: Phase): void {
    if (phase !== "Streaming" && this.state.phase === "Streaming") {
      this.state.liveCounts = null; // counts describe a live window only
    }
    this.state.phase = phase;
  }
}

function countsValid(counts: Counts): boolean {
  return counts.nPositive + counts.nNegative === WINDOW_SIZE;
}
