"""Synthetic town construction and hourly movement planning.

The world is a struct-of-arrays snapshot of a small town: people with ages,
household assignments, workplaces and errand habits, plus a flat table of
locations with role capacities and contact parameters.  Everything is built
from a single ``numpy.random.Generator`` so that one (config, seed) pair
always produces the same town, byte for byte.

Design notes:

- People fall into three categories by age: minors (<18), working adults
  (18-64) and retirees (65+).  Minors attend school on weekdays, adults work
  an eight-hour shift five days a week, retirees have no fixed schedule.
- Households are homes.  A configurable fraction of homes houses only
  retirees; every other home gets at least one working adult before the
  remaining population is spread round-robin.
- Adults and retirees get favourite stores and a hair salon, visited on
  fixed per-person slots (weekly for stores, monthly for the salon).  The
  slots are drawn at build time so that routines are periodic and cheap to
  evaluate.
- Households host open-invite social events on random dates; invitees are
  drawn uniformly from the whole town.  Attendance is resolved at the event
  start hour against gathering caps and per-hour compliance.
- Movement is planned hour by hour as a priority cascade.  Hard states
  (dead, hospitalized, critically ill) override routine; quarantine and
  stay-home-when-positive bind compliant people only; location locks always
  bind because a locked venue is closed no matter who shows up.

The planner never draws randomness itself: per-hour compliance flout bits
are drawn by the engine and passed in, which keeps the consumed RNG stream
identical across simulation backends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

# Location kinds, in the order location ids are laid out.
HOME = 0
GROCERY = 1
OFFICE = 2
SCHOOL = 3
HOSPITAL = 4
RETAIL = 5
SALON = 6
CEMETERY = 7

KIND_NAMES = (
    "home",
    "grocery",
    "office",
    "school",
    "hospital",
    "retail",
    "salon",
    "cemetery",
)

# Person categories.
MINOR = 0
WORKER = 1
RETIREE = 2

# Roles at a location.  Residents and staff occupy the worker role; guests,
# customers, students and hospital patients occupy the visitor role.
ROLE_WORKER = 0
ROLE_VISITOR = 1

# Contact rate triples (worker-worker, worker-visitor, visitor-visitor)
# and the matching per-person minimum contact floors, per location kind.
CONTACT_RATES = {
    HOME: (0.5, 0.3, 0.3),
    GROCERY: (0.2, 0.25, 0.3),
    OFFICE: (0.1, 0.01, 0.01),
    SCHOOL: (0.1, 0.0, 0.1),
    HOSPITAL: (0.1, 0.0, 0.0),
    RETAIL: (0.2, 0.25, 0.3),
    SALON: (0.5, 0.3, 0.1),
    CEMETERY: (0.0, 0.0, 0.05),
}
MIN_CONTACTS = {
    HOME: (0, 1, 0),
    GROCERY: (0, 1, 0),
    OFFICE: (2, 1, 0),
    SCHOOL: (5, 1, 0),
    HOSPITAL: (0, 3, 1),
    RETAIL: (0, 1, 0),
    SALON: (1, 1, 0),
    CEMETERY: (0, 0, 0),
}

# Weekday work shifts [start, end) and visiting hours per kind.
SHIFT_HOURS = {
    OFFICE: (9, 17),
    SCHOOL: (8, 16),
    GROCERY: (9, 17),
    RETAIL: (9, 17),
    SALON: (9, 17),
    HOSPITAL: (9, 17),
}
VISIT_HOURS = {
    GROCERY: (9, 19),
    RETAIL: (9, 19),
    SALON: (9, 19),
    SCHOOL: (8, 16),
}

EVENT_START_HOUR = 18

AGE_BUCKETS = (
    (0, 4, 0.06),
    (5, 17, 0.16),
    (18, 49, 0.43),
    (50, 64, 0.19),
    (65, 89, 0.16),
)

# Age strata used by the disease severity tables: 0-4, 5-17, 18-49, 50-64, 65+.
STRATUM_EDGES = np.array([5, 18, 50, 65], dtype=np.int64)


class ConfigError(ValueError):
    """Raised when a population config cannot be realized."""


@dataclass
class LocationCounts:
    homes: int = 300
    groceries: int = 4
    offices: int = 5
    schools: int = 1
    hospitals: int = 1
    retail: int = 4
    salons: int = 4
    cemeteries: int = 1


@dataclass
class LocationCapacities:
    """Role capacities per kind: (worker cap, visitor cap).

    Homes and cemeteries are uncapped.  The hospital visitor cap is its
    patient capacity; nobody visits hospitals recreationally here.
    """

    grocery: tuple[int, int] = (5, 30)
    office: tuple[int, int] = (200, 0)
    school: tuple[int, int] = (40, 300)
    hospital: tuple[int, int] = (30, 10)
    retail: tuple[int, int] = (5, 30)
    salon: tuple[int, int] = (3, 5)


@dataclass
class PopulationConfig:
    size: int = 1000
    locations: LocationCounts = field(default_factory=LocationCounts)
    capacities: LocationCapacities = field(default_factory=LocationCapacities)
    retiree_home_fraction: float = 0.15
    retirees_per_retiree_home: int = 2
    high_risk_fraction: float = 0.2
    compliance: float = 0.99
    spread_rate_mean: float = 0.03
    spread_rate_sd: float = 0.01
    events_per_household_per_month: int = 1
    event_invitees: int = 30
    event_duration_hours: int = 5
    # Parties a person will actually attend per 30-day cycle (None = any).
    # Default None keeps parties open-invite; set a small value to model
    # households that only go out a couple of times a month.
    event_attendance_budget: int | None = None
    mask_multiplier: float = 0.6
    hygiene_multiplier: float = 0.8


@dataclass
class PersonState:
    """Read-only view of one person, for inspection and tests."""

    pid: int
    age: int
    category: int
    high_risk: bool
    home: int
    work: int
    compliance: float
    spread_rate: float


@dataclass
class Location:
    """Read-only view of one location."""

    lid: int
    kind: int
    worker_capacity: int
    visitor_capacity: int
    contact_rates: tuple[float, float, float]
    min_contacts: tuple[int, int, int]


@dataclass
class World:
    config: PopulationConfig
    n: int
    # Person arrays.
    age: np.ndarray
    category: np.ndarray
    stratum: np.ndarray
    high_risk: np.ndarray
    home: np.ndarray
    work: np.ndarray
    compliance: np.ndarray
    spread_rate: np.ndarray
    fav_grocery: np.ndarray
    fav_retail: np.ndarray
    fav_salon: np.ndarray
    # Errand slots: weekly (weekday, hour) for stores, monthly day + hour
    # for the salon.  -1 disables the errand for that person.
    grocery_slot: np.ndarray  # (n, 2)
    retail_slot: np.ndarray  # (n, 2)
    salon_slot: np.ndarray  # (n, 2)
    # Location arrays.
    n_locations: int
    loc_kind: np.ndarray
    loc_worker_cap: np.ndarray
    loc_visitor_cap: np.ndarray
    loc_rates: np.ndarray  # (L, 3) base contact rates
    loc_min_contacts: np.ndarray  # (L, 3)
    # Household structure: members of home h are
    # hh_members[hh_offsets[h]:hh_offsets[h+1]].
    hh_offsets: np.ndarray
    hh_members: np.ndarray
    retiree_only_home: np.ndarray

    def person(self, pid: int) -> PersonState:
        return PersonState(
            pid=pid,
            age=int(self.age[pid]),
            category=int(self.category[pid]),
            high_risk=bool(self.high_risk[pid]),
            home=int(self.home[pid]),
            work=int(self.work[pid]),
            compliance=float(self.compliance[pid]),
            spread_rate=float(self.spread_rate[pid]),
        )

    def location(self, lid: int) -> Location:
        kind = int(self.loc_kind[lid])
        return Location(
            lid=lid,
            kind=kind,
            worker_capacity=int(self.loc_worker_cap[lid]),
            visitor_capacity=int(self.loc_visitor_cap[lid]),
            contact_rates=CONTACT_RATES[kind],
            min_contacts=MIN_CONTACTS[kind],
        )

    def household_of(self, pid: int) -> np.ndarray:
        h = int(self.home[pid])
        return self.hh_members[self.hh_offsets[h] : self.hh_offsets[h + 1]]

    def locations_of_kind(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.loc_kind == kind)


def _sample_ages(n: int, rng: np.random.Generator) -> np.ndarray:
    weights = np.array([b[2] for b in AGE_BUCKETS])
    weights = weights / weights.sum()
    bucket = rng.choice(len(AGE_BUCKETS), size=n, p=weights)
    lo = np.array([b[0] for b in AGE_BUCKETS])
    hi = np.array([b[1] for b in AGE_BUCKETS])
    span = hi - lo + 1
    offs = np.floor(rng.random(n) * span[bucket]).astype(np.int64)
    return (lo[bucket] + offs).astype(np.int16)


def draw_spread_rate(
    rng: np.random.Generator, mean: float, sd: float, size: int
) -> np.ndarray:
    """Per-person transmission rates: clamped Gaussian, never negative."""
    rates = rng.normal(mean, sd, size=size)
    return np.clip(rates, 0.0, 1.0)


def build_population(config: PopulationConfig, seed: int) -> World:
    """Deterministically synthesize a town from a config and a seed.

    Raises ConfigError when the location capacities cannot accommodate the
    drawn population (for example too few school seats for the minors).
    """
    rng = np.random.default_rng(seed)
    n = config.size
    counts = config.locations
    caps = config.capacities

    kinds_layout = [
        (HOME, counts.homes, -1, -1),
        (GROCERY, counts.groceries, *caps.grocery),
        (OFFICE, counts.offices, *caps.office),
        (SCHOOL, counts.schools, *caps.school),
        (HOSPITAL, counts.hospitals, *caps.hospital),
        (RETAIL, counts.retail, *caps.retail),
        (SALON, counts.salons, *caps.salon),
        (CEMETERY, counts.cemeteries, -1, -1),
    ]
    loc_kind = []
    loc_wcap = []
    loc_vcap = []
    for kind, cnt, wcap, vcap in kinds_layout:
        loc_kind.extend([kind] * cnt)
        loc_wcap.extend([wcap] * cnt)
        loc_vcap.extend([vcap] * cnt)
    loc_kind = np.array(loc_kind, dtype=np.int8)
    loc_worker_cap = np.array(loc_wcap, dtype=np.int32)
    loc_visitor_cap = np.array(loc_vcap, dtype=np.int32)
    n_locations = len(loc_kind)
    loc_rates = np.array([CONTACT_RATES[k] for k in loc_kind], dtype=np.float64)
    loc_min = np.array([MIN_CONTACTS[k] for k in loc_kind], dtype=np.int32)

    if counts.homes < 1 or counts.cemeteries < 1:
        raise ConfigError("town needs at least one home and one cemetery")

    age = _sample_ages(n, rng)
    category = np.where(age < 18, MINOR, np.where(age < 65, WORKER, RETIREE)).astype(
        np.int8
    )
    stratum = np.searchsorted(STRATUM_EDGES, age, side="right").astype(np.int8)

    high_risk = (rng.random(n) < config.high_risk_fraction) | (category == RETIREE)
    compliance = np.full(n, config.compliance, dtype=np.float64)
    spread_rate = draw_spread_rate(
        rng, config.spread_rate_mean, config.spread_rate_sd, n
    )

    # Household assignment.
    home_ids = np.flatnonzero(loc_kind == HOME)
    n_homes = len(home_ids)
    n_retiree_homes = int(round(config.retiree_home_fraction * n_homes))
    retiree_only = np.zeros(n_homes, dtype=bool)
    retiree_only[:n_retiree_homes] = True

    minors = np.flatnonzero(category == MINOR)
    adults = np.flatnonzero(category == WORKER)
    retirees = np.flatnonzero(category == RETIREE)

    family_homes = home_ids[n_retiree_homes:]
    if len(adults) < len(family_homes):
        raise ConfigError(
            f"{len(family_homes)} family homes need an adult each but only "
            f"{len(adults)} working adults were drawn"
        )

    home = np.full(n, -1, dtype=np.int32)
    retirees_shuffled = rng.permutation(retirees)
    want = config.retirees_per_retiree_home * n_retiree_homes
    in_ret_homes = retirees_shuffled[:want]
    for i, pid in enumerate(in_ret_homes):
        home[pid] = home_ids[i % max(n_retiree_homes, 1)]
    leftover_retirees = retirees_shuffled[want:]

    adults_shuffled = rng.permutation(adults)
    for i, hid in enumerate(family_homes):
        home[adults_shuffled[i]] = hid
    pool = np.concatenate(
        [adults_shuffled[len(family_homes) :], minors, leftover_retirees]
    )
    pool = rng.permutation(pool)
    for i, pid in enumerate(pool):
        home[pid] = family_homes[i % len(family_homes)]

    # Work and school assignment.
    work = np.full(n, -1, dtype=np.int32)
    school_ids = np.flatnonzero(loc_kind == SCHOOL)
    school_seats = int(loc_visitor_cap[school_ids].sum()) if len(school_ids) else 0
    if len(minors) > school_seats:
        raise ConfigError(
            f"school visitor capacity {school_seats} cannot seat "
            f"{len(minors)} minors"
        )
    seat_left = {int(s): int(loc_visitor_cap[s]) for s in school_ids}
    si = 0
    for pid in minors:
        while seat_left[int(school_ids[si])] == 0:
            si = (si + 1) % len(school_ids)
        sid = int(school_ids[si])
        work[pid] = sid
        seat_left[sid] -= 1
        si = (si + 1) % len(school_ids)

    workplace_ids = np.flatnonzero(
        np.isin(loc_kind, [OFFICE, SCHOOL, HOSPITAL, GROCERY, RETAIL, SALON])
    )
    slots_left = {int(l): int(loc_worker_cap[l]) for l in workplace_ids}
    total_slots = sum(slots_left.values())
    if len(adults) > total_slots:
        raise ConfigError(
            f"worker capacity {total_slots} cannot employ {len(adults)} adults"
        )
    # Round-robin over workplaces so every venue gets staffed.
    queue = list(adults_shuffled)
    qi = 0
    while queue:
        progressed = False
        for lid in workplace_ids:
            if not queue:
                break
            if slots_left[int(lid)] > 0:
                work[queue.pop()] = lid
                slots_left[int(lid)] -= 1
                progressed = True
        if not progressed:
            break
        qi += 1

    # Favourite venues and errand slots for adults and retirees.
    grocery_ids = np.flatnonzero(loc_kind == GROCERY)
    retail_ids = np.flatnonzero(loc_kind == RETAIL)
    salon_ids = np.flatnonzero(loc_kind == SALON)
    fav_grocery = np.full(n, -1, dtype=np.int32)
    fav_retail = np.full(n, -1, dtype=np.int32)
    fav_salon = np.full(n, -1, dtype=np.int32)
    errand_people = np.flatnonzero(category != MINOR)
    m = len(errand_people)
    if m:
        fav_grocery[errand_people] = grocery_ids[rng.integers(0, len(grocery_ids), m)]
        fav_retail[errand_people] = retail_ids[rng.integers(0, len(retail_ids), m)]
        fav_salon[errand_people] = salon_ids[rng.integers(0, len(salon_ids), m)]

    grocery_slot = np.full((n, 2), -1, dtype=np.int16)
    retail_slot = np.full((n, 2), -1, dtype=np.int16)
    salon_slot = np.full((n, 2), -1, dtype=np.int16)
    # Workers shop outside their shift: weekday evenings or weekends.
    worker_slots = [(d, h) for d in range(5) for h in (17, 18)] + [
        (d, h) for d in (5, 6) for h in range(9, 19)
    ]
    open_slots = [(d, h) for d in range(7) for h in range(9, 19)]
    for pid in errand_people:
        slots = worker_slots if category[pid] == WORKER else open_slots
        gi = int(rng.integers(0, len(slots)))
        ri = int(rng.integers(0, len(slots)))
        grocery_slot[pid] = slots[gi]
        retail_slot[pid] = slots[ri]
        salon_slot[pid, 0] = int(rng.integers(0, 30))
        salon_slot[pid, 1] = int(rng.integers(9, 19))

    # Household CSR.
    order = np.argsort(home * n + np.arange(n), kind="stable")
    sorted_home = home[order]
    hh_offsets = np.zeros(n_homes + 1, dtype=np.int64)
    first_home = int(home_ids[0])
    np.add.at(hh_offsets, sorted_home - first_home + 1, 1)
    hh_offsets = np.cumsum(hh_offsets)
    hh_members = order.astype(np.int32)

    return World(
        config=config,
        n=n,
        age=age,
        category=category,
        stratum=stratum,
        high_risk=high_risk,
        home=home,
        work=work,
        compliance=compliance,
        spread_rate=spread_rate,
        fav_grocery=fav_grocery,
        fav_retail=fav_retail,
        fav_salon=fav_salon,
        grocery_slot=grocery_slot,
        retail_slot=retail_slot,
        salon_slot=salon_slot,
        n_locations=n_locations,
        loc_kind=loc_kind,
        loc_worker_cap=loc_worker_cap,
        loc_visitor_cap=loc_visitor_cap,
        loc_rates=loc_rates,
        loc_min_contacts=loc_min,
        hh_offsets=hh_offsets,
        hh_members=hh_members,
        retiree_only_home=retiree_only,
    )


@dataclass
class Calendar:
    day: int
    hour: int

    @property
    def weekday(self) -> int:
        return self.day % 7

    @property
    def is_weekend(self) -> bool:
        return self.weekday >= 5


def plan_hour(
    world: World,
    cal: Calendar,
    regulation,
    flout: np.ndarray,
    *,
    dead: np.ndarray,
    hospitalized: np.ndarray,
    needs_hospital: np.ndarray,
    quarantined: np.ndarray,
    positive: np.ndarray,
    event_loc: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Assign every person a (location, role) for one hour.

    ``flout`` marks people ignoring advisory rules this hour.  ``event_loc``
    maps attendees of an ongoing social event to the host home (-1 = none).
    Returns int32 location ids and int8 roles.
    """
    n = world.n
    loc = world.home.copy()
    role = np.zeros(n, dtype=np.int8)

    locked = regulation.locked_kinds
    wd = cal.weekday
    hour = cal.hour

    # Routine: work and school shifts on weekdays.
    if wd < 5:
        wk = world.work
        has_work = wk >= 0
        wkind = np.where(has_work, world.loc_kind[np.maximum(wk, 0)], -1)
        for kind, (h0, h1) in SHIFT_HOURS.items():
            if kind in locked or not (h0 <= hour < h1):
                continue
            mask = has_work & (wkind == kind)
            if kind == SCHOOL:
                staff = mask & (world.category == WORKER)
                students = mask & (world.category == MINOR)
                loc[staff] = wk[staff]
                loc[students] = wk[students]
                role[students] = ROLE_VISITOR
            else:
                loc[mask] = wk[mask]

    # Errands at fixed per-person slots, only from home (work wins).
    at_home = loc == world.home
    for kind, fav, slot in (
        (GROCERY, world.fav_grocery, world.grocery_slot),
        (RETAIL, world.fav_retail, world.retail_slot),
    ):
        if kind in locked:
            continue
        h0, h1 = VISIT_HOURS[kind]
        if not (h0 <= hour < h1):
            continue
        mask = at_home & (slot[:, 0] == wd) & (slot[:, 1] == hour) & (fav >= 0)
        loc[mask] = fav[mask]
        role[mask] = ROLE_VISITOR
    if SALON not in locked:
        h0, h1 = VISIT_HOURS[SALON]
        if h0 <= hour < h1:
            slot = world.salon_slot
            mask = (
                at_home
                & (slot[:, 0] == cal.day % 30)
                & (slot[:, 1] == hour)
                & (world.fav_salon >= 0)
            )
            loc[mask] = world.fav_salon[mask]
            role[mask] = ROLE_VISITOR

    # Social events override errands for their duration.
    if event_loc is not None:
        att = event_loc >= 0
        loc[att] = event_loc[att]
        role[att] = ROLE_VISITOR

    # Advisory stay-home rules bind the compliant.
    obeys = ~flout
    stay = quarantined & obeys
    if regulation.stay_home_if_sick:
        stay = stay | (positive & obeys)
    loc[stay] = world.home[stay]
    role[stay] = ROLE_WORKER

    # Hard states override everything.
    loc[needs_hospital] = world.home[needs_hospital]
    role[needs_hospital] = ROLE_WORKER
    hospital_ids = world.locations_of_kind(HOSPITAL)
    if len(hospital_ids):
        loc[hospitalized] = hospital_ids[0]
        role[hospitalized] = ROLE_VISITOR
    cemetery_ids = world.locations_of_kind(CEMETERY)
    loc[dead] = cemetery_ids[0]
    role[dead] = ROLE_VISITOR

    # Visitor capacity: lowest person ids keep their spot, the rest go home.
    if VISIT_HOURS[GROCERY][0] <= hour < VISIT_HOURS[GROCERY][1]:
        visiting = (
            (role == ROLE_VISITOR)
            & ~dead
            & ~hospitalized
            & np.isin(world.loc_kind[loc], [GROCERY, RETAIL, SALON])
        )
        if visiting.any():
            vids = np.flatnonzero(visiting)
            vlocs = loc[vids]
            order = np.argsort(vlocs, kind="stable")
            vids = vids[order]
            vlocs = vlocs[order]
            caps = world.loc_visitor_cap[vlocs]
            # Index of each visitor within its location's arrival queue.
            starts = np.flatnonzero(np.r_[True, vlocs[1:] != vlocs[:-1]])
            idx_within = np.arange(len(vlocs)) - np.repeat(
                starts, np.diff(np.r_[starts, len(vlocs)])
            )
            over = (caps >= 0) & (idx_within >= caps)
            bumped = vids[over]
            loc[bumped] = world.home[bumped]
            role[bumped] = ROLE_WORKER

    return loc, role


def plan_person_hour(
    world: World,
    pid: int,
    cal: Calendar,
    regulation,
    *,
    flouts: bool = False,
    dead: bool = False,
    hospitalized: bool = False,
    needs_hospital: bool = False,
    quarantined: bool = False,
    positive: bool = False,
    event_home: int = -1,
) -> tuple[int, int]:
    """Plan a single person's hour; scalar wrapper over plan_hour."""
    n = world.n

    def onehot(v):
        a = np.zeros(n, dtype=bool)
        a[pid] = v
        return a

    event_loc = np.full(n, -1, dtype=np.int32)
    event_loc[pid] = event_home
    loc, role = plan_hour(
        world,
        cal,
        regulation,
        onehot(flouts),
        dead=onehot(dead),
        hospitalized=onehot(hospitalized),
        needs_hospital=onehot(needs_hospital),
        quarantined=onehot(quarantined),
        positive=onehot(positive),
        event_loc=event_loc,
    )
    return int(loc[pid]), int(role[pid])


@dataclass
class SocialEvent:
    day: int
    host_home: int
    invitees: np.ndarray


def schedule_social_events(
    world: World, cycle_start_day: int, rng: np.random.Generator
) -> list[SocialEvent]:
    """Draw one 30-day cycle of open-invite household gatherings.

    Each household hosts ``events_per_household_per_month`` parties on
    uniform random days of the cycle; invitees are drawn uniformly from the
    whole town without replacement.  Events are returned sorted by (day,
    host home id) so downstream processing is deterministic.
    """
    cfg = world.config
    events: list[SocialEvent] = []
    home_ids = np.flatnonzero(world.loc_kind == HOME)
    k = min(cfg.event_invitees, world.n)
    for hid in home_ids:
        for _ in range(cfg.events_per_household_per_month):
            day = cycle_start_day + int(rng.integers(0, 30))
            invitees = rng.choice(world.n, size=k, replace=False).astype(np.int32)
            events.append(SocialEvent(day=day, host_home=int(hid), invitees=invitees))
    events.sort(key=lambda e: (e.day, e.host_home))
    return events


def resolve_event_attendance(
    world: World,
    events: list[SocialEvent],
    regulation,
    flout: np.ndarray,
    *,
    blocked: np.ndarray,
    quarantined: np.ndarray,
    positive: np.ndarray,
    budget: np.ndarray | None = None,
) -> np.ndarray:
    """Decide who attends tonight's events, honoring gathering caps.

    ``blocked`` marks people who physically cannot attend (dead, in
    hospital, critically ill).  Gathering caps are advisory: compliant
    people respect them, flouting people walk in anyway.  A (0, 0) cap
    pair cancels events outright; nobody attends a venue that never opens.
    ``budget`` is the per-person remaining attendance allowance for the
    current cycle, decremented in place for everyone admitted.
    Returns an int32 map person -> host home (-1 = not attending).
    """
    n = world.n
    event_loc = np.full(n, -1, dtype=np.int32)
    cap_low = regulation.gathering_cap_low
    cap_high = regulation.gathering_cap_high
    if cap_low == 0 and cap_high == 0:
        return event_loc
    obeys = ~flout
    stay = quarantined & obeys
    if regulation.stay_home_if_sick:
        stay = stay | (positive & obeys)
    for ev in events:
        size = 0
        for pid in ev.invitees:
            p = int(pid)
            if blocked[p] or stay[p] or event_loc[p] >= 0:
                continue
            if world.home[p] == ev.host_home:
                continue  # already home with the hosts
            if budget is not None and budget[p] <= 0:
                continue
            cap = cap_high if world.high_risk[p] else cap_low
            if cap is not None and not flout[p] and size >= cap:
                continue
            event_loc[p] = ev.host_home
            if budget is not None:
                budget[p] -= 1
            size += 1
    return event_loc
