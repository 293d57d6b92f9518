/** Typed client for the session service's JSON + SSE surface.
 *
 * Everything the dashboard knows about the simulation arrives through the
 * five documented `/api/v1` endpoints; there is no other backend traffic.
 * The event stream is read with fetch streaming rather than EventSource so
 * the same code runs in the browser and under the test runner, and so
 * resume can set the Last-Event-ID header explicitly.
 */

import { parseSseStream, type SseEvent } from "./sse.js";

export const API_PREFIX = "/api/v1";

export interface Perceived {
  infected: number;
  critical: number;
  dead: number;
  recovered: number;
}

export interface ObservationPayload {
  day: number;
  stage: number;
  population: number;
  perceived: Perceived;
}

export interface Snapshot {
  id: string;
  status: "awaiting-action" | "running" | "finished";
  mode: "constrained" | "free-stage";
  action_period_days: number;
  horizon_days: number;
  max_stage: number;
  hospital_capacity: number;
  critical_capacity: number;
  ghost: boolean;
  cumulative_reward: number;
  last_event_id: number;
  observation: ObservationPayload;
}

export interface GhostRow {
  stage: number;
  reward: number;
  cumulative_reward: number;
  perceived_infected: number;
}

export interface DayEvent {
  type: "day";
  day: number;
  stage: number;
  perceived: Perceived;
  reward: number;
  reward_components: { health: number; econ: number; shaping: number };
  cumulative_reward: number;
  contacts: number;
  ghost: GhostRow | null;
}

export interface TrueHistory {
  none: number[];
  infected: number[];
  critical: number[];
  dead: number[];
  recovered: number[];
  n_critical: number[];
}

export interface TerminalEvent {
  type: "terminal";
  status: "finished";
  day: number;
  cumulative_reward: number;
  true_history: TrueHistory;
  totals: { deaths: number; peak_critical: number; cumulative_infected: number };
  ghost: {
    cumulative_reward: number;
    true_history: TrueHistory;
    totals: { deaths: number };
  } | null;
}

export type StreamEvent =
  | { id: number; payload: DayEvent }
  | { id: number; payload: TerminalEvent };

export interface CreateSessionBody {
  seed?: number;
  mode?: "constrained" | "free-stage";
  action_period_days?: number;
  ghost?: boolean;
  config?: Record<string, unknown>;
}

export interface ActionResult {
  observation: ObservationPayload;
  reward: number;
  cumulative_reward: number;
  status: "awaiting-action" | "finished";
  records: DayEvent[];
}

/** Service rejection with the HTTP status and the server's message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function readError(res: Response): Promise<never> {
  let message = `HTTP ${res.status}`;
  try {
    const body = (await res.json()) as { error?: string; detail?: unknown };
    if (typeof body.error === "string") message = body.error;
    else if (body.detail !== undefined) message = JSON.stringify(body.detail);
  } catch {
    // non-JSON body; keep the status text
  }
  throw new ApiError(res.status, message);
}

export class Client {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${API_PREFIX}${path}`;
  }

  async createSession(body: CreateSessionBody): Promise<Snapshot> {
    const res = await this.fetchImpl(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) await readError(res);
    return (await res.json()) as Snapshot;
  }

  async getSession(id: string): Promise<Snapshot> {
    const res = await this.fetchImpl(this.url(`/sessions/${id}`));
    if (!res.ok) await readError(res);
    return (await res.json()) as Snapshot;
  }

  async submitAction(id: string, stage: number): Promise<ActionResult> {
    const res = await this.fetchImpl(this.url(`/sessions/${id}/actions`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ stage }),
    });
    if (!res.ok) await readError(res);
    return (await res.json()) as ActionResult;
  }

  async deleteSession(id: string): Promise<void> {
    const res = await this.fetchImpl(this.url(`/sessions/${id}`), {
      method: "DELETE",
    });
    if (!res.ok && res.status !== 204) await readError(res);
  }

  /** Yield day/terminal events starting after `lastEventId`.
   *
   * The generator ends when the server closes the stream (it does so after
   * the terminal event); network failures propagate so the caller's resume
   * loop can reconnect with the id it has already applied.
   */
  async *streamEvents(
    id: string,
    lastEventId = 0,
    signal?: AbortSignal,
  ): AsyncGenerator<StreamEvent> {
    const headers: Record<string, string> = { accept: "text/event-stream" };
    if (lastEventId > 0) headers["last-event-id"] = String(lastEventId);
    const res = await this.fetchImpl(this.url(`/sessions/${id}/events`), {
      headers,
      signal: signal ?? null,
    });
    if (!res.ok) await readError(res);
    if (res.body === null) throw new ApiError(0, "response has no body stream");
    for await (const ev of parseSseStream(res.body)) {
      const parsed = decodeStreamEvent(ev);
      if (parsed !== null) yield parsed;
    }
  }
}

/** Parse one wire-level SSE frame into a typed stream event, or null for
 * frames that carry no session data (keep-alives). */
export function decodeStreamEvent(ev: SseEvent): StreamEvent | null {
  if (ev.data === "" || ev.id === null) return null;
  const payload = JSON.parse(ev.data) as DayEvent | TerminalEvent;
  if (payload.type !== "day" && payload.type !== "terminal") return null;
  return { id: ev.id, payload } as StreamEvent;
}
