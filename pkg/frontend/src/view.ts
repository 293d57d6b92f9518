/** DOM rendering for the session dashboard.
 *
 * Renders only what sits in the state: perceived series, the stage band,
 * reward tallies, the day log (one entry per daily event received), and,
 * strictly after the terminal event, the true-vs-perceived comparison.
 */

import { renderChart } from "./chart.js";
import { allowedStages, chartSeries, type SessionState } from "./state.js";

export interface ViewHandlers {
  onStage: (stage: number) => void;
}

function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function fmt(x: number): string {
  return x.toFixed(4);
}

function renderStatus(state: SessionState): HTMLElement {
  const box = h("div", { class: "status-line" });
  const obs = state.snapshot.observation;
  box.appendChild(h("span", { id: "status" }, `status: ${state.status}`));
  box.appendChild(h("span", { id: "day-count" }, `days: ${state.days.length}`));
  box.appendChild(h("span", { id: "stage-now" }, `stage: ${state.currentStage}`));
  box.appendChild(
    h("span", { id: "reward-tally" }, `cumulative reward: ${fmt(state.rewardTally)}`),
  );
  box.appendChild(h("span", { id: "population" }, `population: ${obs.population}`));
  return box;
}

function renderError(state: SessionState): HTMLElement | null {
  if (state.error === null) return null;
  return h("div", { class: "error-banner", role: "alert" }, state.error);
}

function renderPanel(state: SessionState, handlers: ViewHandlers): HTMLElement {
  const panel = h("div", { class: "decision-panel" });
  panel.appendChild(h("span", {}, "set stage:"));
  const allowed = new Set(allowedStages(state));
  for (let k = 0; k <= state.snapshot.max_stage; k++) {
    const btn = h("button", { "data-stage": String(k) }, String(k));
    if (!allowed.has(k) || state.status === "finished") {
      btn.disabled = true;
    }
    btn.addEventListener("click", () => handlers.onStage(k));
    panel.appendChild(btn);
  }
  return panel;
}

function renderDayLog(state: SessionState): HTMLElement {
  const wrap = h("div", { class: "day-log-wrap" });
  wrap.appendChild(h("h2", {}, "daily events"));
  const log = h("ol", { id: "day-log" });
  for (const d of state.days) {
    log.appendChild(
      h(
        "li",
        { "data-day": String(d.day), "data-stage": String(d.stage) },
        `day ${d.day}: stage ${d.stage}, infected ${d.perceived.infected}, ` +
          `critical ${d.perceived.critical}, reward ${fmt(d.reward)}`,
      ),
    );
  }
  wrap.appendChild(log);
  return wrap;
}

function renderGhostPanel(state: SessionState): HTMLElement | null {
  if (!state.snapshot.ghost) return null;
  const last = state.days[state.days.length - 1];
  const panel = h("div", { id: "ghost-panel" });
  panel.appendChild(h("h2", {}, "benchmark ghost"));
  const ghostReward = last?.ghost?.cumulative_reward ?? 0;
  panel.appendChild(
    h(
      "p",
      {},
      `you ${fmt(state.rewardTally)} vs benchmark ${fmt(ghostReward)} (same seed)`,
    ),
  );
  return panel;
}

function renderTerminal(state: SessionState): HTMLElement | null {
  if (state.terminal === null) return null;
  const t = state.terminal;
  const box = h("section", { id: "true-overlay-panel" });
  box.appendChild(h("h2", {}, "true vs perceived"));
  box.appendChild(
    h(
      "p",
      { id: "final-summary" },
      `final reward ${fmt(t.cumulative_reward)}; deaths ${t.totals.deaths}; ` +
        `peak critical ${t.totals.peak_critical}; ` +
        `infected ever ${t.totals.cumulative_infected}`,
    ),
  );
  if (t.ghost !== null) {
    box.appendChild(
      h(
        "p",
        { id: "ghost-final" },
        `benchmark on this seed: reward ${fmt(t.ghost.cumulative_reward)}, ` +
          `deaths ${t.ghost.totals.deaths}`,
      ),
    );
  }
  return box;
}

/** Full re-render of the dashboard into `root`. */
export function render(
  root: HTMLElement,
  state: SessionState,
  handlers: ViewHandlers,
): void {
  root.textContent = "";
  root.appendChild(renderStatus(state));
  const err = renderError(state);
  if (err !== null) root.appendChild(err);
  root.appendChild(renderPanel(state, handlers));

  const chartBox = h("div", { class: "chart-box" });
  chartBox.appendChild(
    renderChart(chartSeries(state), {
      horizonDays: state.snapshot.horizon_days,
      maxStage: state.snapshot.max_stage,
      capacity: state.snapshot.critical_capacity,
      trueHistory: state.terminal?.true_history ?? null,
    }),
  );
  root.appendChild(chartBox);

  const ghost = renderGhostPanel(state);
  if (ghost !== null) root.appendChild(ghost);
  const terminal = renderTerminal(state);
  if (terminal !== null) root.appendChild(terminal);
  root.appendChild(renderDayLog(state));
}
