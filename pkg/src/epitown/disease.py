"""Disease progression: a modified SEIR machine over individual people.

Compartments: susceptible, exposed, presymptomatic/preasymptomatic,
symptomatic, asymptomatic, hospitalized, needs-hospital (critical but no
free bed) and the terminal recovered/dead states.

Progression is agent-level rather than an ODE: branch outcomes (will this
symptomatic person eventually need a hospital bed, will this patient die)
are committed when the person enters the compartment, and sojourn times are
sampled from triangular distributions at entry.  Exits without a natural
duration (hospital admission, untreated critical outcomes) happen at a
daily probability 1 - exp(-rate).  Sampled real-valued durations are
rounded stochastically to whole days, which preserves their means under
the daily tick.

Infection itself lives in the contact layer: each infectious contact k
transmits with probability a_k * m_k in a given hour, so a person's chance
of surviving the hour is the product of (1 - a_k * m_k) over contacts and
the day's infection probability is one minus the product of hourly
survivals.  Helpers for both are here so tests can check the engine against
brute force.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

# Compartment codes.
S = 0
E = 1
PRE_Y = 2
PRE_A = 3
Y = 4
A = 5
H = 6
N = 7
R = 8
D = 9

COMP_NAMES = ("S", "E", "preY", "preA", "Y", "A", "H", "N", "R", "D")
N_COMPS = 10

INFECTIOUS = (PRE_Y, PRE_A, Y, A, H, N)
INFECTED = (E, PRE_Y, PRE_A, Y, A, H, N)


def _tri_mean(tri: tuple[float, float, float]) -> float:
    return sum(tri) / 3.0


@dataclass
class SeirParams:
    """Progression parameters; durations in days, rates per day.

    The severity tables are indexed by age stratum (0-4, 5-17, 18-49,
    50-64, 65+).  Hospitalization fractions come split by risk tier.
    """

    latent_tri: tuple[float, float, float] = (1.9, 2.9, 3.9)
    symptomatic_fraction: float = 0.57  # tau
    pre_infectious_days: float = 2.3  # 1/rho, both pre compartments
    infectious_tri: tuple[float, float, float] = (3.0, 4.0, 5.0)  # 1/gammaY, 1/gammaA
    hospital_tri: tuple[float, float, float] = (9.4, 10.7, 12.8)  # 1/gammaH
    home_recovery_rate: float = 0.0214  # gammaN
    hospitalization_rate: float = 0.1695  # eta
    death_tri: tuple[float, float, float] = (5.2, 8.1, 10.1)  # 1/mu
    untreated_death_rate: float = 0.3  # kappa
    # Symptomatic-case hospitalization ratio, percent, by stratum.
    yhr_low: tuple[float, ...] = (0.04021, 0.03091, 1.903, 4.114, 4.879)
    yhr_high: tuple[float, ...] = (0.4021, 0.3091, 19.03, 41.14, 48.79)
    # Hospitalized fatality ratio, percent, by stratum.
    hfr: tuple[float, ...] = (4.0, 12.365, 3.122, 10.745, 23.158)
    # Death probability when critical but untreated, by stratum.
    untreated_death_prob: tuple[float, ...] = (
        0.239,
        0.3208,
        0.2304,
        0.3049,
        0.4269,
    )

    # Derived at init: pi (Y -> hospital-bound split) and nu (H -> death
    # split), converting the ratio tables into entry probabilities that
    # reproduce them under rate-based competition.
    pi_low: np.ndarray = field(init=False)
    pi_high: np.ndarray = field(init=False)
    nu: np.ndarray = field(init=False)

    def __post_init__(self):
        gamma_y = 1.0 / _tri_mean(self.infectious_tri)
        gamma_h = 1.0 / _tri_mean(self.hospital_tri)
        mu = 1.0 / _tri_mean(self.death_tri)
        eta = self.hospitalization_rate

        def pi_from(yhr_pct):
            yhr = np.asarray(yhr_pct) / 100.0
            return gamma_y * yhr / (eta + (gamma_y - eta) * yhr)

        hfr = np.asarray(self.hfr) / 100.0
        self.pi_low = pi_from(self.yhr_low)
        self.pi_high = pi_from(self.yhr_high)
        self.nu = gamma_h * hfr / (mu + (gamma_h - mu) * hfr)


def hourly_survival(contact_factors) -> float:
    """Probability of NOT getting infected in one hour of contacts.

    ``contact_factors`` are the a_k * m_k transmission probabilities of the
    infectious people met this hour.
    """
    p = 1.0
    for f in contact_factors:
        p *= 1.0 - f
    return p


def daily_infection_probability(hourly_survivals) -> float:
    """One minus the product of the 24 hourly survival probabilities."""
    p = 1.0
    for s in hourly_survivals:
        p *= s
    return 1.0 - p


@dataclass
class DiseaseState:
    """Per-person progression arrays, mutated in place by the daily update."""

    comp: np.ndarray
    days_in: np.ndarray
    duration: np.ndarray  # target days in compartment; -1 = rate-based exit
    dest: np.ndarray  # committed next compartment
    ever_infected: np.ndarray

    @classmethod
    def susceptible(cls, n: int) -> "DiseaseState":
        return cls(
            comp=np.zeros(n, dtype=np.int8),
            days_in=np.zeros(n, dtype=np.int16),
            duration=np.full(n, -1, dtype=np.int16),
            dest=np.full(n, -1, dtype=np.int8),
            ever_infected=np.zeros(n, dtype=bool),
        )

    def counts(self) -> np.ndarray:
        return np.bincount(self.comp, minlength=N_COMPS).astype(np.int64)


def _round_days(x: float, rng: np.random.Generator) -> int:
    base = math.floor(x)
    frac = x - base
    if frac > 0.0 and rng.random() < frac:
        base += 1
    return max(base, 1)


def _enter(
    ds: DiseaseState,
    pid: int,
    comp: int,
    params: SeirParams,
    stratum: int,
    high_risk: bool,
    rng: np.random.Generator,
) -> None:
    ds.comp[pid] = comp
    ds.days_in[pid] = 0
    ds.duration[pid] = -1
    ds.dest[pid] = -1
    if comp == E:
        ds.ever_infected[pid] = True
        dur = rng.triangular(*params.latent_tri)
        ds.duration[pid] = _round_days(dur, rng)
        ds.dest[pid] = PRE_Y if rng.random() < params.symptomatic_fraction else PRE_A
    elif comp in (PRE_Y, PRE_A):
        ds.duration[pid] = _round_days(params.pre_infectious_days, rng)
        ds.dest[pid] = Y if comp == PRE_Y else A
    elif comp == Y:
        pi = params.pi_high if high_risk else params.pi_low
        if rng.random() < pi[stratum]:
            ds.dest[pid] = H  # hospital-bound, admission at rate eta
        else:
            ds.dest[pid] = R
            ds.duration[pid] = _round_days(rng.triangular(*params.infectious_tri), rng)
    elif comp == A:
        ds.dest[pid] = R
        ds.duration[pid] = _round_days(rng.triangular(*params.infectious_tri), rng)
    elif comp == H:
        if rng.random() < params.nu[stratum]:
            ds.dest[pid] = D
            ds.duration[pid] = _round_days(rng.triangular(*params.death_tri), rng)
        else:
            ds.dest[pid] = R
            ds.duration[pid] = _round_days(rng.triangular(*params.hospital_tri), rng)
    elif comp == N:
        if rng.random() < params.untreated_death_prob[stratum]:
            ds.dest[pid] = D  # dies at rate kappa unless admitted first
        else:
            ds.dest[pid] = R  # recovers at home at rate gammaN
    elif comp in (R, D):
        pass
    else:
        raise ValueError(f"cannot enter compartment {comp}")


def _daily_exit_prob(rate: float) -> float:
    return 1.0 - math.exp(-rate)


def seir_daily_update(
    ds: DiseaseState,
    stratum: np.ndarray,
    high_risk: np.ndarray,
    params: SeirParams,
    hospital_capacity: int,
    rng: np.random.Generator,
) -> None:
    """Advance every infected person one day, in person-id order.

    Hospital admission happens before progression: critical people waiting
    at home take any beds freed the previous day.  A person admitted today
    does not also roll death/recovery today.
    """
    beds_free = hospital_capacity - int(np.count_nonzero(ds.comp == H))

    admitted_today = set()
    waiting = np.flatnonzero(ds.comp == N)
    for pid in waiting:
        if beds_free <= 0:
            break
        p = int(pid)
        _enter(ds, p, H, params, int(stratum[p]), bool(high_risk[p]), rng)
        beds_free -= 1
        admitted_today.add(p)

    p_admit = _daily_exit_prob(params.hospitalization_rate)
    p_die_untreated = _daily_exit_prob(params.untreated_death_rate)
    p_home_recover = _daily_exit_prob(params.home_recovery_rate)

    active = np.flatnonzero((ds.comp != S) & (ds.comp != R) & (ds.comp != D))
    for pid in active:
        p = int(pid)
        if p in admitted_today:
            continue
        ds.days_in[p] += 1
        comp = ds.comp[p]
        if ds.duration[p] >= 0:
            if ds.days_in[p] >= ds.duration[p]:
                _enter(
                    ds, p, int(ds.dest[p]), params, int(stratum[p]), bool(high_risk[p]), rng
                )
        elif comp == Y:
            # Hospital-bound symptomatic: admission attempt at rate eta.
            if rng.random() < p_admit:
                if beds_free > 0:
                    _enter(ds, p, H, params, int(stratum[p]), bool(high_risk[p]), rng)
                    beds_free -= 1
                else:
                    _enter(ds, p, N, params, int(stratum[p]), bool(high_risk[p]), rng)
        elif comp == N:
            p_exit = p_die_untreated if ds.dest[p] == D else p_home_recover
            if rng.random() < p_exit:
                _enter(
                    ds, p, int(ds.dest[p]), params, int(stratum[p]), bool(high_risk[p]), rng
                )


def seed_infections(
    ds: DiseaseState,
    stratum: np.ndarray,
    high_risk: np.ndarray,
    params: SeirParams,
    cohort: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Expose a random cohort at day zero; returns the chosen person ids."""
    n = len(ds.comp)
    chosen = np.sort(rng.choice(n, size=min(cohort, n), replace=False))
    for pid in chosen:
        p = int(pid)
        _enter(ds, p, E, params, int(stratum[p]), bool(high_risk[p]), rng)
    return chosen.astype(np.int64)


def infect(
    ds: DiseaseState,
    new_exposed: np.ndarray,
    stratum: np.ndarray,
    high_risk: np.ndarray,
    params: SeirParams,
    rng: np.random.Generator,
) -> None:
    """Convert susceptible people to exposed, in id order."""
    for pid in new_exposed:
        p = int(pid)
        _enter(ds, p, E, params, int(stratum[p]), bool(high_risk[p]), rng)
