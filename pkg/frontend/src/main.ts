/** Browser bootstrap: wire the store, API client, event stream, and renderer. */

import { ApiError, ControlApi } from "./api.js";
import { EventStream } from "./events.js";
import { ThresholdScheduler } from "./slider.js";
import { ConsoleStore } from "./state.js";
import { render, type ViewActions } from "./view.js";

const store = new ConsoleStore();
const api = new ControlApi("");

const scheduler = new ThresholdScheduler(
  {
    phase: () => store.state.phase,
    patch: (value) => api.setThreshold(value),
    onAck: (value) => store.ackThreshold(value),
    onRevert: (value, note) => {
      store.ackThreshold(value);
      store.showNotice(note);
    },
  },
  store.state.threshold,
);

function browserSocket(url: string): import("./events.js").SocketLike {
  const socket = new WebSocket(url);
  const like: import("./events.js").SocketLike = {
    onopen: null,
    onmessage: null,
    onclose: null,
    onerror: null,
    close: () => socket.close(),
  };
  socket.onopen = () => like.onopen?.();
  socket.onmessage = (event) => like.onmessage?.({ data: event.data });
  socket.onclose = () => like.onclose?.();
  socket.onerror = () => like.onerror?.();
  return like;
}

const wsScheme = location.protocol === "https:" ? "wss://" : "ws://";
const stream = new EventStream(
  `${wsScheme}${location.host}/events`,
  browserSocket,
  {
    onEvent: (event) => store.applyEvent(event),
    onUp: () => {
      store.streamRestored();
      void reconcile();
    },
    onDown: (note) => store.streamDown(note),
  },
);

async function reconcile(): Promise<void> {
  try {
    store.applySnapshot(await api.session());
  } catch {
    // the stream handlers already surface connectivity problems
  }
}

async function refresh(): Promise<void> {
  try {
    store.setActivities(await api.activities());
    store.setProfiles(await api.listProfiles());
    store.applySnapshot(await api.session());
    store.setBanner(null);
  } catch (err) {
    store.setBanner(err instanceof Error ? err.message : String(err));
  }
}

function surface(err: unknown): void {
  if (err instanceof ApiError) {
    if (err.code === "ProfileUntrained") {
      store.showNotice("train first");
    } else {
      store.showNotice(err.message);
    }
    store.appendLog("error", `${err.code}: ${err.message}`);
  } else {
    store.appendLog("error", String(err));
  }
}

const actions: ViewActions = {
  createProfile(name, taskName) {
    void (async () => {
      try {
        await api.saveProfile({
          name,
          taskName,
          binding: { activity: "youtube", onKey: "Space" },
          defaultThreshold: store.state.threshold,
          trained: false,
        });
        store.setProfiles(await api.listProfiles());
        store.selectProfile(name);
      } catch (err) {
        surface(err);
      }
    })();
  },
  trainProfile(name) {
    store.setBusy(true);
    void (async () => {
      try {
        await api.train(name);
        store.setProfiles(await api.listProfiles());
        store.appendLog("info", `profile ${name} trained`);
      } catch (err) {
        surface(err);
      } finally {
        store.setBusy(false);
      }
    })();
  },
  selectProfile(name) {
    store.selectProfile(name);
  },
  selectActivity(name) {
    store.selectActivity(name);
  },
  dragThreshold(value) {
    scheduler.request(value);
  },
  start() {
    const profile = store.state.selectedProfile;
    const activity = store.state.selectedActivity;
    if (profile === null || activity === null) {
      return;
    }
    store.setBusy(true);
    void (async () => {
      try {
        const snapshot = await api.startSession(profile, activity, store.state.threshold);
        if (snapshot.threshold !== null) {
          scheduler.seed(snapshot.threshold);
          store.ackThreshold(snapshot.threshold);
        }
        // phase itself follows the event stream, not this response
      } catch (err) {
        surface(err);
      } finally {
        store.setBusy(false);
      }
    })();
  },
  stop() {
    store.setBusy(true);
    void (async () => {
      try {
        await api.stopSession();
      } catch (err) {
        surface(err);
      } finally {
        store.setBusy(false);
      }
    })();
  },
  retry() {
    void refresh();
  },
};

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}
store.subscribe((state) => render(root, state, actions));
render(root, store.state, actions);
stream.start();
void refresh();
