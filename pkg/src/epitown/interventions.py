"""Regulations, testing and contact tracing.

A Regulation bundles everything a government stage controls: advisory
stay-home and hygiene rules, mask orders, a social-distancing factor that
scales every location's contact rates, gathering caps split by risk tier,
and hard location locks.  Three staged ladders are provided: the default
five-stage ladder plus two looser calibrations modeled on real national
responses.

Testing is a daily pipeline over pools: critically sick and dead people
are always known, symptomatic people get tested at a higher rate than the
random population screen, and previously-positive people get slow retests
that eventually move them to the perceived-recovered pool.  Results flip
with small false-positive/false-negative probabilities.

Contact tracing keeps a rolling window of the last N days of sampled
contact pairs.  When someone tests positive, their first-order contacts
within the window, plus everyone in those contacts' households, can be
sent into a 14-day quarantine.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import disease, world as world_mod


@dataclass(frozen=True)
class Regulation:
    stage: int = 0
    stay_home_if_sick: bool = False
    practice_hygiene: bool = False
    wear_masks: bool = False
    social_distancing: float = 0.0
    gathering_cap_low: int | None = None
    gathering_cap_high: int | None = None
    locked_kinds: frozenset = frozenset()


def _locks(*kinds: int) -> frozenset:
    return frozenset(kinds)


FIVE_STAGE = (
    Regulation(stage=0),
    Regulation(
        stage=1,
        stay_home_if_sick=True,
        practice_hygiene=True,
        gathering_cap_low=50,
        gathering_cap_high=25,
    ),
    Regulation(
        stage=2,
        stay_home_if_sick=True,
        practice_hygiene=True,
        wear_masks=True,
        social_distancing=0.3,
        gathering_cap_low=25,
        gathering_cap_high=10,
        locked_kinds=_locks(world_mod.SCHOOL, world_mod.SALON),
    ),
    Regulation(
        stage=3,
        stay_home_if_sick=True,
        practice_hygiene=True,
        wear_masks=True,
        social_distancing=0.5,
        gathering_cap_low=0,
        gathering_cap_high=0,
        locked_kinds=_locks(world_mod.SCHOOL, world_mod.SALON),
    ),
    Regulation(
        stage=4,
        stay_home_if_sick=True,
        practice_hygiene=True,
        wear_masks=True,
        social_distancing=0.7,
        gathering_cap_low=0,
        gathering_cap_high=0,
        locked_kinds=_locks(
            world_mod.SCHOOL, world_mod.SALON, world_mod.OFFICE, world_mod.RETAIL
        ),
    ),
)

SWEDEN = (
    Regulation(stage=0),
    Regulation(
        stage=1,
        stay_home_if_sick=True,
        practice_hygiene=True,
        social_distancing=0.7,
        gathering_cap_low=50,
        gathering_cap_high=50,
    ),
)

ITALY = (
    Regulation(stage=0),
    Regulation(
        stage=1,
        stay_home_if_sick=True,
        practice_hygiene=True,
        social_distancing=0.2,
    ),
    Regulation(
        stage=2,
        stay_home_if_sick=True,
        practice_hygiene=True,
        social_distancing=0.25,
        locked_kinds=_locks(world_mod.SCHOOL),
    ),
    Regulation(
        stage=3,
        stay_home_if_sick=True,
        practice_hygiene=True,
        wear_masks=True,
        social_distancing=0.6,
        gathering_cap_low=0,
        gathering_cap_high=0,
        locked_kinds=_locks(world_mod.SCHOOL, world_mod.SALON, world_mod.RETAIL),
    ),
    Regulation(
        stage=4,
        stay_home_if_sick=True,
        practice_hygiene=True,
        wear_masks=True,
        social_distancing=0.8,
        gathering_cap_low=0,
        gathering_cap_high=0,
        locked_kinds=_locks(
            world_mod.OFFICE, world_mod.SCHOOL, world_mod.SALON, world_mod.RETAIL
        ),
    ),
)

STAGE_TABLES = {
    "five-stage": FIVE_STAGE,
    "sweden": SWEDEN,
    "italy": ITALY,
}


def stage_table(name: str):
    try:
        return STAGE_TABLES[name]
    except KeyError:
        raise KeyError(
            f"unknown stage table {name!r}; choose from {sorted(STAGE_TABLES)}"
        ) from None


def effective_contact_rates(
    base_rates: np.ndarray, regulation: Regulation
) -> np.ndarray:
    """Scale base contact rates by (1 - social_distancing)."""
    return base_rates * (1.0 - regulation.social_distancing)


# Test result codes.
UNTESTED = 0
NEGATIVE = 1
POSITIVE = 2


@dataclass
class TestingConfig:
    random_rate: float = 0.02
    symptomatic_rate: float = 0.3
    retest_rate: float = 0.033
    false_positive: float = 0.001
    false_negative: float = 0.01
    tracing_horizon_days: int = 0
    quarantine_traced: bool = False
    quarantine_days: int = 14
    quarantine_households: bool = False


# Named testing/tracing strategies from the contact-tracing study.  The
# trailing flag is whether the paired ladder keeps stay-home-if-sick on.
# Traced contacts are asked to stay home briefly (2 days) while the test
# boost runs; only confirmed positives then stay home via the sick rule.
TESTING_PRESETS = {
    "NONE": (TestingConfig(tracing_horizon_days=0, quarantine_traced=False), False),
    "SICK": (TestingConfig(tracing_horizon_days=0, quarantine_traced=False), True),
    "CON-2": (
        TestingConfig(tracing_horizon_days=2, quarantine_traced=True, quarantine_days=2),
        True,
    ),
    "CON-5": (
        TestingConfig(tracing_horizon_days=5, quarantine_traced=True, quarantine_days=2),
        True,
    ),
    "CON-10": (
        TestingConfig(tracing_horizon_days=10, quarantine_traced=True, quarantine_days=2),
        True,
    ),
    "SICK+": (
        TestingConfig(random_rate=0.3, tracing_horizon_days=0, quarantine_traced=False),
        True,
    ),
    "CON-2+": (
        TestingConfig(
            random_rate=0.3, tracing_horizon_days=2,
            quarantine_traced=True, quarantine_days=2,
        ),
        True,
    ),
    "CON-5+": (
        TestingConfig(
            random_rate=0.3, tracing_horizon_days=5,
            quarantine_traced=True, quarantine_days=2,
        ),
        True,
    ),
    "CON-10+": (
        TestingConfig(
            random_rate=0.3, tracing_horizon_days=10,
            quarantine_traced=True, quarantine_days=2,
        ),
        True,
    ),
    "SICK++": (
        TestingConfig(random_rate=1.0, tracing_horizon_days=0, quarantine_traced=False),
        True,
    ),
}


def testing_preset(name: str) -> tuple[TestingConfig, bool]:
    try:
        cfg, stay_home = TESTING_PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown testing preset {name!r}; choose from {sorted(TESTING_PRESETS)}"
        ) from None
    return replace(cfg), stay_home


class ContactRegistry:
    """Rolling window of the last N days of contact pairs.

    A horizon of zero keeps the registry permanently empty.  Pair counts
    are multiplicities: a pair that met twice today counts twice.
    """

    def __init__(self, horizon_days: int):
        self.horizon = int(horizon_days)
        self._days: deque[tuple[int, np.ndarray, np.ndarray]] = deque()

    def record_day(self, day: int, pi: np.ndarray, pj: np.ndarray) -> None:
        if self.horizon <= 0:
            return
        self._days.append(
            (day, np.asarray(pi, dtype=np.int32), np.asarray(pj, dtype=np.int32))
        )
        while self._days and self._days[0][0] <= day - self.horizon:
            self._days.popleft()

    def pair_count(self, a: int, b: int) -> int:
        lo, hi = min(a, b), max(a, b)
        total = 0
        for _, pi, pj in self._days:
            total += int(np.count_nonzero((pi == lo) & (pj == hi)))
            total += int(np.count_nonzero((pi == hi) & (pj == lo)))
        return total

    def contacts_of(self, pid: int) -> np.ndarray:
        partners = []
        for _, pi, pj in self._days:
            partners.append(pj[pi == pid])
            partners.append(pi[pj == pid])
        if not partners:
            return np.empty(0, dtype=np.int32)
        return np.unique(np.concatenate(partners))


def quarantine_first_order(
    registry: ContactRegistry,
    positive_pid: int,
    hh_offsets,
    hh_members,
    home,
    include_households: bool = False,
) -> np.ndarray:
    """People to quarantine after a positive test: direct registry contacts
    of the positive person, optionally widened to all members of those
    contacts' households.  The index case itself is not included."""
    contacts = registry.contacts_of(positive_pid)
    if len(contacts) == 0:
        return np.empty(0, dtype=np.int64)
    out = set(int(c) for c in contacts)
    if include_households:
        for c in contacts:
            h = int(home[int(c)])
            members = hh_members[hh_offsets[h] : hh_offsets[h + 1]]
            out.update(int(m) for m in members)
    out.discard(int(positive_pid))
    return np.array(sorted(out), dtype=np.int64)


@dataclass
class TestState:
    """Perceived epidemic state: what testing reveals to the government."""

    status: np.ndarray  # UNTESTED / NEGATIVE / POSITIVE
    ever_positive: np.ndarray
    perceived_recovered: np.ndarray  # was positive, retested negative

    @classmethod
    def fresh(cls, n: int) -> "TestState":
        return cls(
            status=np.zeros(n, dtype=np.int8),
            ever_positive=np.zeros(n, dtype=bool),
            perceived_recovered=np.zeros(n, dtype=bool),
        )


def run_testing(
    ts: TestState,
    comp: np.ndarray,
    cfg: TestingConfig,
    rng: np.random.Generator,
    extra_candidates: np.ndarray | None = None,
) -> np.ndarray:
    """One day of testing; returns ids of people newly turned positive.

    Selection pools: every critically sick or dead person is known
    outright; symptomatic people enter at symptomatic_rate, positives are
    retested at retest_rate, everyone else at random_rate.  ``extra_candidates``
    (traced contacts) are tested at symptomatic_rate on top of their pool.
    Administered tests flip with the false positive/negative rates.
    """
    n = len(comp)
    was_positive = ts.status == POSITIVE

    # Selection draw, one uniform per person per day.
    u = rng.random(n)
    dead = comp == disease.D
    critical = (comp == disease.H) | (comp == disease.N)
    symptomatic = comp == disease.Y
    rate = np.full(n, cfg.random_rate)
    rate[symptomatic] = np.maximum(cfg.symptomatic_rate, cfg.random_rate)
    rate[was_positive] = cfg.retest_rate
    selected = u < rate
    if extra_candidates is not None and len(extra_candidates):
        boost = np.zeros(n, dtype=bool)
        boost[extra_candidates] = True
        selected |= boost & ~was_positive & (u < cfg.symptomatic_rate)
    selected &= ~dead & ~critical

    # Administer in id order: one flip draw per administered test.
    infected_mask = np.zeros(n, dtype=bool)
    for c in disease.INFECTED:
        infected_mask |= comp == c
    ids = np.flatnonzero(selected)
    flips = rng.random(len(ids))
    truth = infected_mask[ids]
    err = np.where(truth, cfg.false_negative, cfg.false_positive)
    result_positive = np.where(flips < err, ~truth, truth)

    ts.status[ids] = np.where(result_positive, POSITIVE, NEGATIVE)
    ts.status[critical | dead] = POSITIVE
    ts.ever_positive |= ts.status == POSITIVE

    now_positive = ts.status == POSITIVE
    ts.perceived_recovered = (
        ts.perceived_recovered | (was_positive & ~now_positive)
    ) & ~now_positive

    newly = now_positive & ~was_positive
    return np.flatnonzero(newly).astype(np.int64)


def perceived_counts(ts: TestState, comp: np.ndarray) -> dict[str, int]:
    alive = comp != disease.D
    positive = ts.status == POSITIVE
    return {
        "perceived_infected": int(np.count_nonzero(positive & alive)),
        "perceived_critical": int(
            np.count_nonzero((comp == disease.H) | (comp == disease.N))
        ),
        "perceived_dead": int(np.count_nonzero(~alive)),
        "perceived_recovered": int(np.count_nonzero(ts.perceived_recovered & alive)),
    }
