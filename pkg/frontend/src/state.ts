/** Session state and pure update functions.
 *
 * The SSE stream is the single source of truth for daily data: one chart
 * point per day event received, deduplicated by event id so a resumed
 * stream can never double-append.  Action responses update only status and
 * the decision panel.  True-state series exist in the state only after the
 * terminal event; before that the shape has nowhere to put them.
 */

import type {
  DayEvent,
  Snapshot,
  StreamEvent,
  TerminalEvent,
} from "./api.js";

export interface SessionState {
  snapshot: Snapshot;
  days: DayEvent[];
  lastEventId: number;
  rewardTally: number;
  status: "awaiting-action" | "running" | "finished";
  terminal: TerminalEvent | null;
  error: string | null;
  currentStage: number;
}

export function initialState(snapshot: Snapshot): SessionState {
  return {
    snapshot,
    days: [],
    lastEventId: 0,
    rewardTally: 0,
    status: snapshot.status,
    terminal: null,
    error: null,
    currentStage: snapshot.observation.stage,
  };
}

/** Fold one stream event into the state; stale ids are a no-op. */
export function applyStreamEvent(
  state: SessionState,
  ev: StreamEvent,
): SessionState {
  if (ev.id <= state.lastEventId) return state;
  if (ev.payload.type === "day") {
    return {
      ...state,
      days: [...state.days, ev.payload],
      lastEventId: ev.id,
      rewardTally: state.rewardTally + ev.payload.reward,
      currentStage: ev.payload.stage,
      error: null,
    };
  }
  return {
    ...state,
    lastEventId: ev.id,
    status: "finished",
    terminal: ev.payload,
  };
}

/** Record an accepted action's snapshot-level effects (days arrive via SSE). */
export function applyActionResult(
  state: SessionState,
  status: "awaiting-action" | "finished",
  stage: number,
): SessionState {
  return { ...state, status, currentStage: stage, error: null };
}

/** Surface a service rejection inline; chart data is untouched. */
export function applyError(state: SessionState, message: string): SessionState {
  return { ...state, error: message };
}

export function clearError(state: SessionState): SessionState {
  return state.error === null ? state : { ...state, error: null };
}

/** Stages the decision panel may submit from the current stage. */
export function allowedStages(state: SessionState): number[] {
  const max = state.snapshot.max_stage;
  const all = Array.from({ length: max + 1 }, (_, k) => k);
  if (state.snapshot.mode === "free-stage") return all;
  return all.filter((k) => Math.abs(k - state.currentStage) <= 1);
}

export interface ChartSeries {
  infected: number[];
  critical: number[];
  dead: number[];
  stage: number[];
  ghostReward: number[] | null;
}

/** Per-day series for the chart; lengths always equal days received. */
export function chartSeries(state: SessionState): ChartSeries {
  const withGhost = state.days.every((d) => d.ghost !== null) && state.days.length > 0;
  return {
    infected: state.days.map((d) => d.perceived.infected),
    critical: state.days.map((d) => d.perceived.critical),
    dead: state.days.map((d) => d.perceived.dead),
    stage: state.days.map((d) => d.stage),
    ghostReward: withGhost
      ? state.days.map((d) => (d.ghost as NonNullable<DayEvent["ghost"]>).cumulative_reward)
      : null,
  };
}
