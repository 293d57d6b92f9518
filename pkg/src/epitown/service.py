"""Session service: the government loop over HTTP.

A session wraps one live simulation.  The caller plays the government:
each action submits a stage for the next period and gets back the
perceived picture only.  True compartment counts stay server-side until
the horizon is reached, at which point the terminal event discloses the
full history (the true-vs-perceived reveal).  An optional ghost runs the
strongest staged-reopening heuristic on the same seed in lockstep so the
UI can show a score to beat.
"""

from __future__ import annotations

import asyncio
import copy
import json
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from . import engine as engine_mod
from .cli import load_config_dict, realize_config, _deep_merge
from .interventions import stage_table
from .policies import StagedPeak
from .world import ConfigError

API = "/api/v1"
DEFAULT_EXPIRY_SECONDS = 3600.0


class CreateSession(BaseModel):
    seed: int = 1
    mode: str = "constrained"  # or "free-stage"
    action_period_days: int | None = None
    ghost: bool = False
    config: dict = {}


class ActionBody(BaseModel):
    stage: int


def _true_categories(compartments) -> dict[str, int]:
    c = compartments
    return {
        "none": int(c[0]),
        "infected": int(sum(c[1:6])),
        "critical": int(c[6] + c[7]),
        "dead": int(c[9]),
        "recovered": int(c[8]),
    }


@dataclass
class _Ghost:
    sim: object
    policy: StagedPeak
    activated: bool = False
    cumulative_reward: float = 0.0
    true_rows: list = field(default_factory=list)

    def step_days(self, table, config, days: int) -> list[dict]:
        out = []
        for _ in range(days):
            if self.sim.day >= config.horizon_days:
                break
            obs = self.sim.observation()
            if not self.activated and obs.perceived_infected >= config.activation_threshold:
                self.activated = True
                self.sim.activation_day = self.sim.day
            if self.activated:
                self.sim.stage = int(self.policy(obs))
            rec, _ = engine_mod.step_day(self.sim, table[self.sim.stage])
            self.cumulative_reward += rec.reward
            self.true_rows.append(rec)
            out.append(
                {
                    "stage": rec.stage,
                    "reward": rec.reward,
                    "cumulative_reward": self.cumulative_reward,
                    "perceived_infected": rec.perceived_infected,
                }
            )
        return out


@dataclass
class Session:
    sid: str
    config: object
    sim: object
    table: tuple
    mode: str
    action_period: int
    ghost: _Ghost | None
    status: str = "awaiting-action"
    cumulative_reward: float = 0.0
    events: list = field(default_factory=list)  # (event_id, payload dict)
    true_rows: list = field(default_factory=list)
    history: list = field(default_factory=list)  # (day, action, reward)
    last_touch: float = field(default_factory=time.monotonic)
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    changed: asyncio.Event = field(default_factory=asyncio.Event)

    def touch(self) -> None:
        self.last_touch = time.monotonic()

    @property
    def max_stage(self) -> int:
        return len(self.table) - 1

    def observation_payload(self) -> dict:
        obs = self.sim.observation()
        return {
            "day": obs.day,
            "stage": obs.stage,
            "population": obs.population,
            "perceived": {
                "infected": obs.perceived_infected,
                "critical": obs.perceived_critical,
                "dead": obs.perceived_dead,
                "recovered": obs.perceived_recovered,
            },
        }

    def snapshot(self) -> dict:
        return {
            "id": self.sid,
            "status": self.status,
            "mode": self.mode,
            "action_period_days": self.action_period,
            "horizon_days": self.config.horizon_days,
            "max_stage": self.max_stage,
            "hospital_capacity": self.sim.hospital_capacity,
            "critical_capacity": self.config.reward.max_critical,
            "ghost": self.ghost is not None,
            "cumulative_reward": self.cumulative_reward,
            "last_event_id": self.events[-1][0] if self.events else 0,
            "observation": self.observation_payload(),
        }

    def _emit(self, payload: dict) -> None:
        eid = len(self.events) + 1
        self.events.append((eid, payload))
        self.changed.set()
        self.changed = asyncio.Event()

    def emit_day(self, rec, ghost_row) -> None:
        self._emit(
            {
                "type": "day",
                "day": rec.day,
                "stage": rec.stage,
                "perceived": {
                    "infected": rec.perceived_infected,
                    "critical": rec.perceived_critical,
                    "dead": rec.perceived_dead,
                    "recovered": rec.perceived_recovered,
                },
                "reward": rec.reward,
                "reward_components": {
                    "health": rec.reward_health,
                    "econ": rec.reward_econ,
                    "shaping": rec.reward_shaping,
                },
                "cumulative_reward": self.cumulative_reward,
                "contacts": rec.contacts,
                "ghost": ghost_row,
            }
        )

    def _true_history(self, rows) -> dict:
        hist: dict = {k: [] for k in ("none", "infected", "critical", "dead", "recovered")}
        hist["n_critical"] = []
        for rec in rows:
            cats = _true_categories(rec.compartments)
            for k, v in cats.items():
                hist[k].append(v)
            hist["n_critical"].append(rec.n_critical)
        return hist

    def emit_terminal(self) -> None:
        rows = self.true_rows
        deaths = rows[-1].compartments[9] if rows else 0
        payload = {
            "type": "terminal",
            "status": "finished",
            "day": self.sim.day,
            "cumulative_reward": self.cumulative_reward,
            "true_history": self._true_history(rows),
            "totals": {
                "deaths": int(deaths),
                "peak_critical": max((r.n_critical for r in rows), default=0),
                "cumulative_infected": int(self.sim.world.n - rows[-1].compartments[0]) if rows else 0,
            },
        }
        if self.ghost is not None:
            payload["ghost"] = {
                "cumulative_reward": self.ghost.cumulative_reward,
                "true_history": self._true_history(self.ghost.true_rows),
                "totals": {
                    "deaths": int(self.ghost.true_rows[-1].compartments[9]) if self.ghost.true_rows else 0,
                },
            }
        else:
            payload["ghost"] = None
        self._emit(payload)


def create_app(
    config_alias: str = "town1k",
    max_sessions: int = 8,
    expiry_seconds: float = DEFAULT_EXPIRY_SECONDS,
    base_config_dict: dict | None = None,
) -> FastAPI:
    app = FastAPI(title="epitown service", version="1")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    base_dict = base_config_dict if base_config_dict is not None else load_config_dict(config_alias)
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions

    def purge() -> None:
        now = time.monotonic()
        for sid in [s for s, sess in sessions.items() if now - sess.last_touch > expiry_seconds]:
            del sessions[sid]

    def get_session(sid: str) -> Session | None:
        purge()
        sess = sessions.get(sid)
        if sess is not None:
            sess.touch()
        return sess

    @app.post(API + "/sessions", status_code=201)
    async def create_session(body: CreateSession):
        purge()
        if len(sessions) >= max_sessions:
            return JSONResponse(
                {"error": f"session capacity {max_sessions} reached"}, status_code=429
            )
        if body.mode not in ("constrained", "free-stage"):
            return JSONResponse(
                {"error": f"unknown mode {body.mode!r}"}, status_code=400
            )
        if body.action_period_days is not None and body.action_period_days < 1:
            return JSONResponse(
                {"error": "action_period_days must be at least 1"}, status_code=400
            )
        try:
            merged = copy.deepcopy(base_dict)
            _deep_merge(merged, body.config or {})
            cfg = realize_config(merged)
        except (ConfigError, TypeError, ValueError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        sim = engine_mod.reset(cfg, seed=body.seed)
        table = stage_table(cfg.stage_table)
        ghost = None
        if body.ghost:
            gsim = engine_mod.reset(cfg, seed=body.seed)
            ghost = _Ghost(sim=gsim, policy=StagedPeak(max_stage=len(table) - 1))
        sess = Session(
            sid=uuid.uuid4().hex,
            config=cfg,
            sim=sim,
            table=table,
            mode=body.mode,
            action_period=body.action_period_days or cfg.action_period_days,
            ghost=ghost,
        )
        sessions[sess.sid] = sess
        return sess.snapshot()

    @app.get(API + "/sessions/{sid}")
    async def get_session_info(sid: str):
        sess = get_session(sid)
        if sess is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        return sess.snapshot()

    @app.delete(API + "/sessions/{sid}", status_code=204)
    async def delete_session(sid: str):
        purge()
        if sid not in sessions:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        del sessions[sid]
        return Response(status_code=204)

    @app.post(API + "/sessions/{sid}/actions")
    async def submit_action(sid: str, body: ActionBody):
        sess = get_session(sid)
        if sess is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        async with sess.lock:
            if sess.status == "finished":
                return JSONResponse(
                    {"error": "session already finished"}, status_code=409
                )
            stage = body.stage
            if not 0 <= stage <= sess.max_stage:
                return JSONResponse(
                    {"error": f"stage must be within [0, {sess.max_stage}]"},
                    status_code=422,
                )
            current = sess.sim.stage
            if sess.mode == "constrained" and abs(stage - current) > 1:
                return JSONResponse(
                    {
                        "error": (
                            f"constrained mode allows stage changes of at most 1 "
                            f"(current {current}, requested {stage})"
                        )
                    },
                    status_code=422,
                )
            sess.sim.stage = stage
            period_reward = 0.0
            public_records = []
            for _ in range(sess.action_period):
                if sess.sim.day >= sess.config.horizon_days:
                    break
                rec, _ = engine_mod.step_day(sess.sim, sess.table[sess.sim.stage])
                sess.cumulative_reward += rec.reward
                period_reward += rec.reward
                sess.true_rows.append(rec)
                ghost_rows = (
                    sess.ghost.step_days(sess.table, sess.config, 1)
                    if sess.ghost is not None
                    else [None]
                )
                ghost_row = ghost_rows[0] if ghost_rows else None
                sess.emit_day(rec, ghost_row)
                public_records.append(sess.events[-1][1])
            sess.history.append((sess.sim.day, stage, period_reward))
            if sess.sim.day >= sess.config.horizon_days:
                sess.status = "finished"
                sess.emit_terminal()
            return {
                "observation": sess.observation_payload(),
                "reward": period_reward,
                "cumulative_reward": sess.cumulative_reward,
                "status": sess.status,
                "records": public_records,
            }

    @app.get(API + "/sessions/{sid}/events")
    async def stream_events(sid: str, request: Request, last_event_id: int | None = None):
        sess = get_session(sid)
        if sess is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        header_last = request.headers.get("last-event-id")
        start_after = last_event_id if last_event_id is not None else (
            int(header_last) if header_last and header_last.isdigit() else 0
        )

        async def gen():
            cursor = start_after
            while True:
                while cursor < len(sess.events):
                    eid, payload = sess.events[cursor]
                    cursor = eid
                    yield f"id: {eid}\nevent: {payload['type']}\ndata: {json.dumps(payload)}\n\n"
                    if payload["type"] == "terminal":
                        return
                if sess.status == "finished":
                    return
                waiter = sess.changed
                try:
                    await asyncio.wait_for(waiter.wait(), timeout=30.0)
                except asyncio.TimeoutError:
                    yield ": keep-alive\n\n"
                if await request.is_disconnected():
                    return

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app
