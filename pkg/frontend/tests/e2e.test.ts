/** End-to-end: scripted browser session against a live service.
 *
 * Spawns the real HTTP service, mounts the app in jsdom, drives it through
 * the form and stage buttons exactly as a person would, holds stage 2 for
 * the whole horizon, and checks the rendered output plus information
 * hygiene (nothing true-state leaves the server before the run finishes).
 */

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import type { AppHandle } from "../src/main.js";

const PORT = 8400 + (process.pid % 400);
const BASE = `http://127.0.0.1:${PORT}`;
const HORIZON = 120;

let server: ChildProcess;
let serverLog = "";

// --- recording fetch: every body that leaves the service gets inspected ---

const jsonBodies: { url: string; body: string }[] = [];
let sseRaw = "";

const recordingFetch: typeof fetch = async (input, init) => {
  const res = await fetch(input, init);
  const ct = res.headers.get("content-type") ?? "";
  if (ct.includes("text/event-stream") && res.body !== null) {
    const clone = res.clone();
    void (async () => {
      const reader = clone.body!.getReader();
      const dec = new TextDecoder();
      try {
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          sseRaw += dec.decode(value, { stream: true });
        }
      } catch {
        // stream aborted at teardown; keep what was captured
      }
    })();
  } else if (ct.includes("application/json")) {
    const text = await res.clone().text();
    jsonBodies.push({ url: String(input), body: text });
  }
  return res;
};

// Keys that only exist on true-state payloads. Perceived day events and
// action responses must never carry any of them.
const FORBIDDEN_KEYS = ["true_history", "compartments", "n_critical", "totals"];

function forbiddenKeysIn(value: unknown, found: string[] = []): string[] {
  if (Array.isArray(value)) {
    for (const v of value) forbiddenKeysIn(v, found);
  } else if (value !== null && typeof value === "object") {
    for (const [k, v] of Object.entries(value)) {
      if (FORBIDDEN_KEYS.includes(k)) found.push(k);
      forbiddenKeysIn(v, found);
    }
  }
  return found;
}

async function until(cond: () => boolean, ms = 20000, step = 5): Promise<void> {
  const t0 = Date.now();
  while (!cond()) {
    if (Date.now() - t0 > ms) throw new Error("timed out waiting for condition");
    await new Promise((r) => setTimeout(r, step));
  }
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "epitown.cli", "serve", "--port", String(PORT)], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  server.stdout?.on("data", (d: Buffer) => {
    serverLog += d.toString();
  });
  server.stderr?.on("data", (d: Buffer) => {
    serverLog += d.toString();
  });
  await until(() => server.exitCode === null && server.pid !== undefined, 5000, 50);
  const t0 = Date.now();
  for (;;) {
    if (server.exitCode !== null) {
      throw new Error(`service exited early:\n${serverLog}`);
    }
    try {
      const res = await fetch(`${BASE}/api/v1/sessions/probe`);
      if (res.status === 404) break;
    } catch {
      // not listening yet
    }
    if (Date.now() - t0 > 45000) throw new Error(`service never came up:\n${serverLog}`);
    await new Promise((r) => setTimeout(r, 150));
  }
});

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("held-stage-2 session", () => {
  let handle: AppHandle;
  let root: HTMLElement;

  function state() {
    const st = handle.state();
    if (st === null) throw new Error("no session state yet");
    return st;
  }

  function clickStage(k: number): void {
    const btn = root.querySelector<HTMLButtonElement>(`button[data-stage='${k}']`);
    if (btn === null) throw new Error(`no button for stage ${k}`);
    expect(btn.disabled).toBe(false);
    btn.click();
  }

  it("runs the full horizon and renders honestly", async () => {
    window.__epitownTest = true;
    const { boot } = await import("../src/main.js");
    document.body.innerHTML = "<div id='root'></div>";
    root = document.getElementById("root") as HTMLElement;
    handle = boot(root, { baseUrl: BASE, fetchImpl: recordingFetch });

    // start a free-stage session through the form, like a person would
    const form = root.querySelector<HTMLFormElement>("#session-form");
    expect(form).not.toBeNull();
    (form!.elements.namedItem("seed") as HTMLInputElement).value = "7";
    (form!.elements.namedItem("mode") as HTMLSelectElement).value = "free-stage";
    form!.dispatchEvent(new window.Event("submit", { bubbles: true, cancelable: true }));
    await until(() => handle.state() !== null && handle.sessionId() !== null);
    expect(state().snapshot.horizon_days).toBe(HORIZON);

    // hold stage 2 for every day of the horizon
    for (let day = 1; day <= HORIZON; day++) {
      clickStage(2);
      await until(() => state().days.length >= day);

      if (day === 60) {
        // mid-run: the perceived picture is on screen, the true one is not
        expect(root.querySelectorAll("#day-log li")).toHaveLength(60);
        expect(root.querySelector("#true-overlay-panel")).toBeNull();
        expect(root.querySelectorAll(".true-overlay")).toHaveLength(0);
        expect(root.textContent ?? "").not.toMatch(/true/i);
      }
    }
    await until(() => state().status === "finished");
    await handle.finished;

    // exactly one rendered day per simulated day
    const items = [...root.querySelectorAll<HTMLLIElement>("#day-log li")];
    expect(items).toHaveLength(HORIZON);
    // day records are 0-based: day 0 is the first simulated day
    expect(state().days.map((d) => d.day)).toEqual(
      Array.from({ length: HORIZON }, (_, i) => i),
    );

    // the stage band is flat at 2: every event, every log row, one band y
    expect(state().days.every((d) => d.stage === 2)).toBe(true);
    expect(items.every((li) => li.dataset.stage === "2")).toBe(true);
    const band = root.querySelector(".stage-band");
    expect(band).not.toBeNull();
    const ys = new Set(
      (band!.getAttribute("points") ?? "")
        .split(" ")
        .map((p) => p.split(",")[1]),
    );
    expect(ys.size).toBe(1);

    // client-side reward tally matches the service's terminal sum
    const terminal = state().terminal;
    expect(terminal).not.toBeNull();
    expect(Math.abs(state().rewardTally - terminal!.cumulative_reward)).toBeLessThan(1e-6);

    // the reveal: true-state overlay appears only now
    expect(root.querySelector("#true-overlay-panel")).not.toBeNull();
    expect(root.querySelectorAll(".true-overlay")).toHaveLength(3);
    expect(terminal!.true_history.infected).toHaveLength(HORIZON);

    handle.stop();
  });

  it("information hygiene: nothing true-state leaves the service pre-finish", async () => {
    // the clone reader that records the wire may trail the app slightly
    await until(() => sseRaw.includes("true_history"), 5000, 20);

    // every JSON body the app ever received: create/action/get responses.
    // None of them may carry true-state keys at any point in the run.
    expect(jsonBodies.length).toBeGreaterThan(0);
    for (const { url, body } of jsonBodies) {
      const leaked = forbiddenKeysIn(JSON.parse(body));
      expect(leaked, `forbidden keys in response from ${url}`).toEqual([]);
    }

    // the SSE wire: day frames (everything before the terminal frame)
    // must be free of true-state keys; the terminal frame must exist and
    // be the only carrier.
    const cut = sseRaw.indexOf('"type": "terminal"');
    expect(cut).toBeGreaterThan(0);
    const preFinish = sseRaw.slice(0, cut);
    for (const key of FORBIDDEN_KEYS) {
      expect(preFinish, `pre-finish SSE stream leaked ${key}`).not.toContain(key);
    }
    const dayFrames = preFinish.split("\n\n").filter((f) => f.includes("event: day"));
    expect(dayFrames).toHaveLength(HORIZON);
    expect(sseRaw.slice(cut)).toContain("true_history");
  });
});
