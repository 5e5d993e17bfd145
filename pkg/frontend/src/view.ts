/** Rendering: pure view-model helpers plus the five-panel DOM layout. */

import type { Counts } from "./api.js";
import {
  THRESHOLD_MAX,
  THRESHOLD_MIN,
  WINDOW_SIZE,
  controlsFor,
  lastError,
  type ConsoleState,
} from "./state.js";

export type Cell = "on" | "off";

/** 10-cell strip for the live window; empty when counts are hidden. */
export function countCells(counts: Counts | null): Cell[] {
  if (counts === null) {
    return [];
  }
  return Array.from({ length: WINDOW_SIZE }, (_, i) =>
    i < counts.nPositive ? "on" : "off",
  );
}

export function formatCounts(counts: Counts): string {
  return `positive: ${counts.nPositive} / negative: ${counts.nNegative}`;
}

export function formatClock(epochSeconds: number): string {
  const date = new Date(epochSeconds * 1000);
  const pad = (n: number) => String(n).padStart(2, "0");
  return `${pad(date.getHours())}:${pad(date.getMinutes())}:${pad(date.getSeconds())}`;
}

export interface ViewActions {
  createProfile(name: string, taskName: string): void;
  trainProfile(name: string): void;
  selectProfile(name: string): void;
  selectActivity(name: string): void;
  dragThreshold(value: number): void;
  start(): void;
  stop(): void;
  retry(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function panel(title: string): HTMLElement {
  const section = el("section", "panel");
  section.appendChild(el("h2", undefined, title));
  return section;
}

function setupPanel(state: ConsoleState, actions: ViewActions): HTMLElement {
  const flags = controlsFor(state);
  const section = panel("Setup & training");

  if (state.profiles.length === 0) {
    section.appendChild(el("p", "empty", "no profiles yet, create one below"));
  } else {
    const list = el("ul", "profile-list");
    for (const profile of state.profiles) {
      const item = el("li", profile.name === state.selectedProfile ? "selected" : undefined);
      const pick = el("button", "pick", profile.name);
      pick.addEventListener("click", () => actions.selectProfile(profile.name));
      item.appendChild(pick);
      item.appendChild(
        el("span", "meta", `${profile.taskName} · ${profile.trained ? "trained" : "untrained"}`),
      );
      list.appendChild(item);
    }
    section.appendChild(list);
  }

  const form = el("div", "create-form");
  const nameInput = el("input");
  nameInput.placeholder = "profile name";
  const taskInput = el("input");
  taskInput.placeholder = "trained action, e.g. push";
  const createButton = el("button", undefined, "Create");
  createButton.addEventListener("click", () => {
    if (nameInput.value.trim() && taskInput.value.trim()) {
      actions.createProfile(nameInput.value.trim(), taskInput.value.trim());
    }
  });
  form.append(nameInput, taskInput, createButton);
  section.appendChild(form);

  const trainButton = el("button", undefined, "Train selected");
  trainButton.disabled = !flags.canTrain;
  trainButton.addEventListener("click", () => {
    if (state.selectedProfile !== null) {
      actions.trainProfile(state.selectedProfile);
    }
  });
  section.appendChild(trainButton);
  return section;
}

function activityPanel(state: ConsoleState, actions: ViewActions): HTMLElement {
  const section = panel("Activity");
  const grid = el("div", "activity-grid");
  for (const activity of state.activities) {
    const button = el(
      "button",
      activity.name === state.selectedActivity ? "activity selected" : "activity",
    );
    button.appendChild(el("strong", undefined, activity.label));
    button.appendChild(el("span", "meta", `key: ${activity.onKey}`));
    button.addEventListener("click", () => actions.selectActivity(activity.name));
    grid.appendChild(button);
  }
  section.appendChild(grid);
  return section;
}

function sensitivityPanel(state: ConsoleState, actions: ViewActions): HTMLElement {
  const flags = controlsFor(state);
  const section = panel("Sensitivity");
  const slider = el("input");
  slider.type = "range";
  slider.min = String(THRESHOLD_MIN);
  slider.max = String(THRESHOLD_MAX);
  slider.step = "1";
  slider.value = String(state.threshold);
  slider.disabled = !flags.canSlide;
  slider.addEventListener("change", () => actions.dragThreshold(Number(slider.value)));
  const label = el("span", "threshold-label", String(state.threshold));
  section.append(slider, label);
  if (state.notice !== null) {
    section.appendChild(el("p", "notice", state.notice));
  }
  return section;
}

function controlsPanel(state: ConsoleState, actions: ViewActions): HTMLElement {
  const flags = controlsFor(state);
  const section = panel("Controls");
  const startButton = el("button", "start", "Start");
  startButton.disabled = !flags.canStart;
  startButton.addEventListener("click", () => actions.start());
  const stopButton = el("button", "stop", flags.stopLabel);
  stopButton.disabled = !flags.canStop;
  stopButton.addEventListener("click", () => actions.stop());
  const chip = el("span", `phase-chip phase-${state.phase.toLowerCase()}`, state.phase);
  section.append(startButton, stopButton, chip);
  if (flags.startBlocker !== null && state.phase === "Idle") {
    section.appendChild(el("p", "notice", flags.startBlocker));
  }
  return section;
}

function statusPanel(state: ConsoleState): HTMLElement {
  const section = panel("Status");

  const fault = state.phase === "Faulted" ? lastError(state) : null;
  if (fault !== null) {
    section.appendChild(el("p", "fault", fault.message));
  }

  const cells = countCells(state.liveCounts);
  if (state.liveCounts !== null && cells.length === WINDOW_SIZE) {
    const strip = el("div", "count-strip");
    for (const cell of cells) {
      strip.appendChild(el("span", `cell ${cell}`));
    }
    section.appendChild(strip);
    section.appendChild(el("p", "counts", formatCounts(state.liveCounts)));
  }

  const log = el("ul", "status-log");
  for (const entry of state.statusLog.slice(-12).reverse()) {
    const item = el("li", `log-${entry.level}`);
    item.appendChild(el("span", "clock", formatClock(entry.time)));
    item.appendChild(el("span", undefined, entry.message));
    log.appendChild(item);
  }
  section.appendChild(log);
  return section;
}

export function render(root: HTMLElement, state: ConsoleState, actions: ViewActions): void {
  root.textContent = "";
  if (state.banner !== null) {
    const banner = el("div", "banner");
    banner.appendChild(el("span", undefined, state.banner));
    const retry = el("button", undefined, "Retry");
    retry.addEventListener("click", () => actions.retry());
    banner.appendChild(retry);
    root.appendChild(banner);
  }
  root.appendChild(setupPanel(state, actions));
  root.appendChild(activityPanel(state, actions));
  root.appendChild(sensitivityPanel(state, actions));
  root.appendChild(controlsPanel(state, actions));
  root.appendChild(statusPanel(state));
}
