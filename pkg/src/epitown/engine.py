"""Day-loop simulation engine.

A simulation day runs in a fixed phase order so that trajectories are a
pure function of (config, seed): hourly movement and contact sampling,
end-of-day infection draws, disease progression in person-id order, then
testing and contact tracing.  All randomness flows from one PCG64 stream;
the contact kernel consumes uniforms in a documented order so the compiled
and pure backends produce bit-identical runs.

The policy layer sees only the perceived state (test results), never true
compartment counts.  Regulations stay at stage 0 until the perceived
infection count crosses the activation threshold; after that the policy is
consulted at its action cadence and its stage choice is clamped into the
active stage table's range (with a counted warning on clamp).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import disease, interventions, world as world_mod
from .backends import get_backend
from .disease import DiseaseState, SeirParams
from .interventions import ContactRegistry, Regulation, TestingConfig, TestState
from .world import Calendar, PopulationConfig, World

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "day,stage,S,E,preY,preA,Y,A,H,N,R,D,"
    "perceived_infected,perceived_critical,perceived_dead,"
    "n_critical,reward,reward_health,reward_econ,reward_shaping,contacts"
)


@dataclass(frozen=True)
class RewardParams:
    """Daily reward: penalize critical cases beyond capacity, economic
    weight of the stage, and stage thrash."""

    health_weight: float = -0.4
    econ_weight: float = -0.1
    econ_power: float = 1.5
    shaping_weight: float = -0.02
    max_critical: int = 10
    max_stage: int = 4


def reward_components(
    prev_stage: int, stage: int, n_critical: int, params: RewardParams
) -> tuple[float, float, float]:
    over = max((n_critical - params.max_critical) / params.max_critical, 0.0)
    health = params.health_weight * over
    econ = params.econ_weight * (
        (stage**params.econ_power) / (params.max_stage**params.econ_power)
    )
    shaping = params.shaping_weight * abs(stage - prev_stage)
    return health, econ, shaping


def reward(prev_stage: int, stage: int, n_critical: int, params: RewardParams) -> float:
    return sum(reward_components(prev_stage, stage, n_critical, params))


@dataclass
class EngineConfig:
    population: PopulationConfig = field(default_factory=PopulationConfig)
    seir: SeirParams = field(default_factory=SeirParams)
    testing: TestingConfig = field(default_factory=TestingConfig)
    reward: RewardParams = field(default_factory=RewardParams)
    stage_table: str = "five-stage"
    # Small cohorts leave room for the outbreak to build visibly before
    # saturating a 1k town; 3 keeps every run igniting in practice.
    seed_cohort: int = 3
    horizon_days: int = 120
    activation_threshold: int = 5
    action_period_days: int = 1
    hospital_capacity: int | None = None
    contact_rate_scale: float = 1.0
    gathering_cap_override: int | None = None  # fixed cap for sensitivity runs


def default_config() -> EngineConfig:
    return EngineConfig()


@dataclass
class Observation:
    """What the policy is allowed to see: testing results plus the stage."""

    day: int
    stage: int
    population: int
    perceived_infected: int
    perceived_critical: int
    perceived_dead: int
    perceived_recovered: int

    def as_vector(self, max_stage: int) -> np.ndarray:
        n = float(self.population)
        return np.array(
            [
                self.perceived_infected / n,
                self.perceived_critical / n,
                self.perceived_dead / n,
                self.perceived_recovered / n,
                self.stage / max(max_stage, 1),
            ],
            dtype=np.float32,
        )


@dataclass
class DayRecord:
    day: int
    stage: int
    compartments: tuple  # counts in disease.COMP_NAMES order
    perceived_infected: int
    perceived_critical: int
    perceived_dead: int
    perceived_recovered: int
    n_critical: int
    reward: float
    reward_health: float
    reward_econ: float
    reward_shaping: float
    contacts: int

    def csv_row(self) -> str:
        c = self.compartments
        nums = [self.day, self.stage, *c]
        nums += [
            self.perceived_infected,
            self.perceived_critical,
            self.perceived_dead,
            self.n_critical,
        ]
        fl = [self.reward, self.reward_health, self.reward_econ, self.reward_shaping]
        return ",".join(
            [str(int(v)) for v in nums]
            + [f"{v + 0.0:.10g}" for v in fl]  # +0.0 folds -0.0 into 0
            + [str(self.contacts)]
        )


@dataclass
class SimState:
    config: EngineConfig
    world: World
    rng: np.random.Generator
    backend: object
    ds: DiseaseState
    ts: TestState
    registry: ContactRegistry
    hospital_capacity: int
    day: int = 0
    stage: int = 0
    prev_stage: int = 0
    activated: bool = False
    activation_day: int = -1
    quarantine_until: np.ndarray = None
    pending_traced: np.ndarray = None
    events_by_day: dict = field(default_factory=dict)
    party_budget: np.ndarray = None
    clamp_warnings: int = 0
    seed: int = 0

    def observation(self) -> Observation:
        pc = interventions.perceived_counts(self.ts, self.ds.comp)
        return Observation(
            day=self.day,
            stage=self.stage,
            population=self.world.n,
            **pc,
        )

    def true_summary(self) -> dict[str, int]:
        counts = self.ds.counts()
        infected = int(
            counts[disease.E]
            + counts[disease.PRE_Y]
            + counts[disease.PRE_A]
            + counts[disease.Y]
            + counts[disease.A]
        )
        return {
            "none": int(counts[disease.S]),
            "infected": infected,
            "critical": int(counts[disease.H] + counts[disease.N]),
            "dead": int(counts[disease.D]),
            "recovered": int(counts[disease.R]),
        }


def reset(config: EngineConfig, seed: int, backend: str | None = None) -> SimState:
    """Build the town and seed the infection cohort; day counter at zero."""
    world = world_mod.build_population(config.population, seed)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    ds = DiseaseState.susceptible(world.n)
    ts = TestState.fresh(world.n)
    disease.seed_infections(
        ds, world.stratum, world.high_risk, config.seir, config.seed_cohort, rng
    )
    if config.hospital_capacity is not None:
        beds = config.hospital_capacity
    else:
        hospitals = world.locations_of_kind(world_mod.HOSPITAL)
        beds = int(world.loc_visitor_cap[hospitals].sum()) if len(hospitals) else 0
    sim = SimState(
        config=config,
        world=world,
        rng=rng,
        backend=get_backend(backend),
        ds=ds,
        ts=ts,
        registry=ContactRegistry(config.testing.tracing_horizon_days),
        hospital_capacity=beds,
        quarantine_until=np.zeros(world.n, dtype=np.int32),
        pending_traced=np.empty(0, dtype=np.int64),
        seed=seed,
    )
    return sim


def _apply_regulation(config: EngineConfig, reg: Regulation) -> Regulation:
    if config.gathering_cap_override is not None:
        cap = config.gathering_cap_override
        reg = replace(reg, gathering_cap_low=cap, gathering_cap_high=cap)
    return reg


def step_day(
    sim: SimState, regulation: Regulation, collect_pairs: bool = False
) -> tuple[DayRecord, tuple[np.ndarray, np.ndarray] | None]:
    """Advance one simulated day under the given regulation.

    Returns the day record and, when requested, the day's contact pairs.
    """
    cfg = sim.config
    world = sim.world
    ds = sim.ds
    rng = sim.rng
    n = world.n
    day = sim.day
    regulation = _apply_regulation(cfg, regulation)

    if day % 30 == 0:
        for ev in world_mod.schedule_social_events(world, day, rng):
            sim.events_by_day.setdefault(ev.day, []).append(ev)
        b = world.config.event_attendance_budget
        sim.party_budget = np.full(n, -1 if b is None else b, dtype=np.int32)
    todays_events = sim.events_by_day.pop(day, [])

    eff_rates = (
        interventions.effective_contact_rates(world.loc_rates, regulation)
        * cfg.contact_rate_scale
    )

    need_pairs = collect_pairs or cfg.testing.tracing_horizon_days > 0
    day_surv = np.ones(n, dtype=np.float64)
    day_pi: list[np.ndarray] = []
    day_pj: list[np.ndarray] = []
    contacts = 0

    alive = ds.comp != disease.D
    susceptible = (ds.comp == disease.S).astype(np.uint8)
    infectious = np.isin(ds.comp, disease.INFECTIOUS).astype(np.uint8)
    dead = ~alive
    hospitalized = ds.comp == disease.H
    needs_hosp = ds.comp == disease.N
    quarantined = sim.quarantine_until > day
    positive = sim.ts.status == interventions.POSITIVE

    event_loc = np.full(n, -1, dtype=np.int32)
    ev_end = world_mod.EVENT_START_HOUR + world.config.event_duration_hours

    for hour in range(24):
        cal = Calendar(day=day, hour=hour)
        flout = rng.random(n) >= world.compliance
        if hour == world_mod.EVENT_START_HOUR and todays_events:
            budget = None
            if world.config.event_attendance_budget is not None:
                budget = sim.party_budget
            event_loc = world_mod.resolve_event_attendance(
                world,
                todays_events,
                regulation,
                flout,
                blocked=dead | hospitalized | needs_hosp,
                quarantined=quarantined,
                positive=positive,
                budget=budget,
            )
        elif hour == ev_end:
            event_loc = np.full(n, -1, dtype=np.int32)

        loc, role = world_mod.plan_hour(
            world,
            cal,
            regulation,
            flout,
            dead=dead,
            hospitalized=hospitalized,
            needs_hospital=needs_hosp,
            quarantined=quarantined,
            positive=positive,
            event_loc=event_loc if world_mod.EVENT_START_HOUR <= hour < ev_end else None,
        )

        mult = np.ones(n, dtype=np.float64)
        obeys = ~flout
        if regulation.wear_masks:
            mult[obeys] *= world.config.mask_multiplier
        if regulation.practice_hygiene:
            mult[obeys] *= world.config.hygiene_multiplier
        trans = world.spread_rate * mult

        ids = np.flatnonzero(alive)
        key = loc[ids].astype(np.int64) * 2 + role[ids]
        order = np.argsort(key, kind="stable")
        sorted_persons = ids[order].astype(np.int32)
        sorted_key = key[order]
        sorted_loc = sorted_key >> 1
        uniq, first_idx, counts = np.unique(
            sorted_loc, return_index=True, return_counts=True
        )
        active = counts >= 2
        starts = first_idx[active].astype(np.int64)
        ends = (first_idx[active] + counts[active]).astype(np.int64)
        act_locs = uniq[active]
        wends = np.searchsorted(sorted_key, act_locs * 2 + 1, side="left").astype(
            np.int64
        )

        ncon, pi, pj = sim.backend.contact_hour(
            sorted_persons,
            starts,
            ends,
            wends,
            eff_rates[act_locs],
            world.loc_min_contacts[act_locs],
            susceptible,
            infectious,
            trans,
            day_surv,
            need_pairs,
            rng,
        )
        contacts += int(ncon)
        if need_pairs and len(pi):
            day_pi.append(pi)
            day_pj.append(pj)

    # End-of-day infection draw: one uniform per person.
    u = rng.random(n)
    new_exposed = np.flatnonzero((ds.comp == disease.S) & (u < 1.0 - day_surv))

    disease.seir_daily_update(
        ds, world.stratum, world.high_risk, cfg.seir, sim.hospital_capacity, rng
    )
    disease.infect(ds, new_exposed, world.stratum, world.high_risk, cfg.seir, rng)

    # Testing and tracing.
    pairs_i = np.concatenate(day_pi) if day_pi else np.empty(0, dtype=np.int32)
    pairs_j = np.concatenate(day_pj) if day_pj else np.empty(0, dtype=np.int32)
    if cfg.testing.tracing_horizon_days > 0:
        sim.registry.record_day(day, pairs_i, pairs_j)

    was_positive = sim.ts.status == interventions.POSITIVE
    newly_positive = interventions.run_testing(
        sim.ts,
        ds.comp,
        cfg.testing,
        rng,
        extra_candidates=sim.pending_traced if len(sim.pending_traced) else None,
    )
    released = was_positive & (sim.ts.status == interventions.NEGATIVE)
    sim.quarantine_until[released] = 0

    traced: set[int] = set()
    if cfg.testing.tracing_horizon_days > 0:
        for p in newly_positive:
            found = interventions.quarantine_first_order(
                sim.registry,
                int(p),
                world.hh_offsets,
                world.hh_members,
                world.home,
                include_households=cfg.testing.quarantine_households,
            )
            traced.update(int(x) for x in found)
    if traced:
        traced_arr = np.array(sorted(traced), dtype=np.int64)
        if cfg.testing.quarantine_traced:
            sim.quarantine_until[traced_arr] = day + 1 + cfg.testing.quarantine_days
        sim.pending_traced = traced_arr
    else:
        sim.pending_traced = np.empty(0, dtype=np.int64)

    counts_now = ds.counts()
    n_critical = int(counts_now[disease.H] + counts_now[disease.N])
    pc = interventions.perceived_counts(sim.ts, ds.comp)
    rh, re, rs = reward_components(
        sim.prev_stage, regulation.stage, n_critical, cfg.reward
    )
    rec = DayRecord(
        day=day,
        stage=regulation.stage,
        compartments=tuple(int(x) for x in counts_now),
        perceived_infected=pc["perceived_infected"],
        perceived_critical=pc["perceived_critical"],
        perceived_dead=pc["perceived_dead"],
        perceived_recovered=pc["perceived_recovered"],
        n_critical=n_critical,
        reward=rh + re + rs,
        reward_health=rh,
        reward_econ=re,
        reward_shaping=rs,
        contacts=contacts,
    )
    sim.prev_stage = regulation.stage
    sim.stage = regulation.stage
    sim.day += 1
    pairs = (pairs_i, pairs_j) if collect_pairs else None
    return rec, pairs


@dataclass
class RunResult:
    records: list
    seed: int
    clamp_warnings: int
    world: World
    ds: DiseaseState
    ts: TestState
    daily_pairs: list | None = None
    activation_day: int = -1

    @property
    def cumulative_infected(self) -> int:
        return int(np.count_nonzero(self.ds.ever_infected))

    @property
    def deaths(self) -> int:
        return self.records[-1].compartments[disease.D] if self.records else 0

    def total_reward(self) -> float:
        return float(sum(r.reward for r in self.records))

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        lines.extend(r.csv_row() for r in self.records)
        return "\n".join(lines) + "\n"


def run(
    config: EngineConfig,
    seed: int,
    policy=None,
    *,
    action_period: int | None = None,
    collect_contacts: bool = False,
    backend: str | None = None,
) -> RunResult:
    """Run a full episode; the policy is consulted at its action cadence
    once the perceived infection count reaches the activation threshold."""
    table = interventions.stage_table(config.stage_table)
    max_stage = len(table) - 1
    period = action_period or config.action_period_days
    sim = reset(config, seed, backend=backend)
    daily_pairs = [] if collect_contacts else None
    records: list[DayRecord] = []

    for day in range(config.horizon_days):
        obs = sim.observation()
        if not sim.activated and obs.perceived_infected >= config.activation_threshold:
            sim.activated = True
            sim.activation_day = day
        if (
            sim.activated
            and policy is not None
            and (day - sim.activation_day) % period == 0
        ):
            target = policy(obs)
            if target is not None:
                clamped = min(max(int(target), 0), max_stage)
                if clamped != target:
                    sim.clamp_warnings += 1
                    logger.warning(
                        "policy stage %s out of range, clamped to %s", target, clamped
                    )
                sim.stage = clamped
        rec, pairs = step_day(sim, table[sim.stage], collect_pairs=collect_contacts)
        records.append(rec)
        if collect_contacts:
            daily_pairs.append(pairs)

    return RunResult(
        records=records,
        seed=seed,
        clamp_warnings=sim.clamp_warnings,
        world=sim.world,
        ds=sim.ds,
        ts=sim.ts,
        daily_pairs=daily_pairs,
        activation_day=sim.activation_day,
    )
