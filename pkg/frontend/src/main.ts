/** App entry point: session form, SSE pump, action dispatch.
 *
 * `boot` is exported so tests can mount the app against any base URL with
 * an injected fetch. In the browser the module mounts itself on #app.
 */

import { ApiError, Client, type CreateSessionBody } from "./api.js";
import {
  applyActionResult,
  applyError,
  applyStreamEvent,
  initialState,
  type SessionState,
} from "./state.js";
import { render } from "./view.js";

export interface BootOptions {
  baseUrl?: string;
  fetchImpl?: typeof fetch;
}

export interface AppHandle {
  client: Client;
  sessionId: () => string | null;
  state: () => SessionState | null;
  /** Resolves once the terminal event has been rendered. */
  finished: Promise<void>;
  stop: () => void;
}

function formValue(form: HTMLFormElement, name: string): string {
  const el = form.elements.namedItem(name);
  if (el instanceof HTMLInputElement) {
    return el.type === "checkbox" ? String(el.checked) : el.value;
  }
  if (el instanceof HTMLSelectElement) return el.value;
  return "";
}

function buildForm(onStart: (body: CreateSessionBody) => void): HTMLFormElement {
  const form = document.createElement("form");
  form.id = "session-form";
  form.innerHTML = `
    <label>seed <input name="seed" type="number" value="1"></label>
    <label>mode
      <select name="mode">
        <option value="constrained">constrained</option>
        <option value="free-stage">free-stage</option>
      </select>
    </label>
    <label>action period <input name="period" type="number" value="1" min="1"></label>
    <label>ghost <input name="ghost" type="checkbox"></label>
    <button type="submit" id="start-btn">start session</button>
  `;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    onStart({
      seed: Number(formValue(form, "seed")) || 1,
      mode: formValue(form, "mode") === "free-stage" ? "free-stage" : "constrained",
      action_period_days: Number(formValue(form, "period")) || 1,
      ghost: formValue(form, "ghost") === "true",
    });
  });
  return form;
}

/** Mount the dashboard under `root` and return a handle for tests. */
export function boot(root: HTMLElement, opts: BootOptions = {}): AppHandle {
  const client = new Client(opts.baseUrl ?? "", opts.fetchImpl);
  let state: SessionState | null = null;
  let sessionId: string | null = null;
  let stopped = false;
  const abort = new AbortController();
  let resolveFinished: () => void = () => undefined;
  const finished = new Promise<void>((res) => {
    resolveFinished = res;
  });

  const stage = document.createElement("div");
  stage.id = "dashboard";
  const form = buildForm((body) => {
    void startSession(body);
  });
  root.appendChild(form);
  root.appendChild(stage);

  const handlers = {
    onStage: (k: number) => {
      void submitStage(k);
    },
  };

  function paint(): void {
    if (state !== null) render(stage, state, handlers);
  }

  async function pump(): Promise<void> {
    while (!stopped && state !== null && state.status !== "finished") {
      try {
        const events = client.streamEvents(
          sessionId as string,
          state.lastEventId,
          abort.signal,
        );
        for await (const ev of events) {
          if (stopped || state === null) return;
          state = applyStreamEvent(state, ev);
          paint();
        }
      } catch (err) {
        if (stopped) return;
        // Transient stream drop: reconnect and resume from the last
        // event id unless the session itself is gone.
        if (err instanceof ApiError && err.status === 404) {
          state = applyError(state as SessionState, "session no longer exists");
          paint();
          break;
        }
      }
      if (state !== null && state.status === "finished") break;
      await new Promise((res) => setTimeout(res, 100));
    }
    if (state !== null && state.status === "finished") resolveFinished();
  }

  async function startSession(body: CreateSessionBody): Promise<void> {
    try {
      const snap = await client.createSession(body);
      sessionId = snap.id;
      state = initialState(snap);
      paint();
      void pump();
    } catch (err) {
      const msg = err instanceof ApiError ? err.message : String(err);
      const banner = document.createElement("div");
      banner.className = "error-banner";
      banner.setAttribute("role", "alert");
      banner.textContent = `could not start session: ${msg}`;
      stage.textContent = "";
      stage.appendChild(banner);
    }
  }

  async function submitStage(k: number): Promise<void> {
    if (state === null || sessionId === null) return;
    try {
      const result = await client.submitAction(sessionId, k);
      state = applyActionResult(state, result.status, result.observation.stage);
      paint();
    } catch (err) {
      const msg = err instanceof ApiError ? err.message : String(err);
      state = applyError(state, msg);
      paint();
    }
  }

  return {
    client,
    sessionId: () => sessionId,
    state: () => state,
    finished,
    stop: () => {
      stopped = true;
      abort.abort();
    },
  };
}

declare global {
  interface Window {
    __epitownTest?: boolean;
  }
}

if (typeof window !== "undefined" && !window.__epitownTest) {
  const root = document.getElementById("app");
  if (root !== null) boot(root);
}
