"""Stage tables, testing pipeline and contact tracing."""

import numpy as np
import pytest

from epitown import disease as dz
from epitown import world as w
from epitown.interventions import (
    FIVE_STAGE,
    ITALY,
    SWEDEN,
    POSITIVE,
    ContactRegistry,
    Regulation,
    effective_contact_rates,
    perceived_counts,
    quarantine_first_order,
    run_testing,
    stage_table,
)
from epitown.interventions import TestState as TState
from epitown.interventions import TestingConfig as TConfig
from epitown.interventions import testing_preset as preset_of


def test_five_stage_table_values():
    assert len(FIVE_STAGE) == 5
    s0, s1, s2, s3, s4 = FIVE_STAGE
    assert s0 == Regulation(stage=0)
    assert s1.stay_home_if_sick and s1.practice_hygiene and not s1.wear_masks
    assert (s1.gathering_cap_low, s1.gathering_cap_high) == (50, 25)
    assert s2.wear_masks and s2.social_distancing == 0.3
    assert (s2.gathering_cap_low, s2.gathering_cap_high) == (25, 10)
    assert s2.locked_kinds == frozenset({w.SCHOOL, w.SALON})
    assert s3.social_distancing == 0.5
    assert (s3.gathering_cap_low, s3.gathering_cap_high) == (0, 0)
    assert s4.social_distancing == 0.7
    assert s4.locked_kinds == frozenset({w.SCHOOL, w.SALON, w.OFFICE, w.RETAIL})


def test_sweden_table_values():
    assert len(SWEDEN) == 2
    s1 = SWEDEN[1]
    assert s1.stay_home_if_sick and s1.practice_hygiene and not s1.wear_masks
    assert s1.social_distancing == 0.7
    assert (s1.gathering_cap_low, s1.gathering_cap_high) == (50, 50)
    assert s1.locked_kinds == frozenset()


def test_italy_table_values():
    assert len(ITALY) == 5
    assert ITALY[1].social_distancing == 0.2
    assert ITALY[2].locked_kinds == frozenset({w.SCHOOL})
    assert ITALY[3].social_distancing == 0.6
    assert ITALY[4].locked_kinds == frozenset(
        {w.OFFICE, w.SCHOOL, w.SALON, w.RETAIL}
    )


def test_stage_table_lookup():
    assert stage_table("five-stage") is FIVE_STAGE
    with pytest.raises(KeyError):
        stage_table("nope")


def test_effective_rates_scale():
    base = np.array([0.5, 0.3, 0.3])
    out = effective_contact_rates(base, Regulation(social_distancing=0.7))
    np.testing.assert_allclose(out, base * 0.3)


def test_testing_presets_table():
    names = {
        "NONE", "SICK", "CON-2", "CON-5", "CON-10",
        "SICK+", "CON-2+", "CON-5+", "CON-10+", "SICK++",
    }
    cfg, stay = preset_of("NONE")
    assert not stay and cfg.tracing_horizon_days == 0
    cfg, stay = preset_of("SICK")
    assert stay and cfg.random_rate == 0.02
    for days in (2, 5, 10):
        cfg, stay = preset_of(f"CON-{days}")
        assert stay and cfg.tracing_horizon_days == days and cfg.quarantine_traced
        assert cfg.quarantine_days == 2 and not cfg.quarantine_households
        cfg, _ = preset_of(f"CON-{days}+")
        assert cfg.random_rate == 0.3 and cfg.tracing_horizon_days == days
    cfg, _ = preset_of("SICK+")
    assert cfg.random_rate == 0.3 and not cfg.quarantine_traced
    cfg, _ = preset_of("SICK++")
    assert cfg.random_rate == 1.0
    with pytest.raises(KeyError):
        preset_of("SICK+++")
    # each call returns a private copy
    a, _ = preset_of("SICK")
    a.random_rate = 0.5
    b, _ = preset_of("SICK")
    assert b.random_rate == 0.02


def test_critical_and_dead_always_known():
    n = 50
    ts = TState.fresh(n)
    comp = np.zeros(n, dtype=np.int8)
    comp[3] = dz.H
    comp[4] = dz.N
    comp[5] = dz.D
    run_testing(ts, comp, TConfig(random_rate=0.0), np.random.default_rng(0))
    assert (ts.status[[3, 4, 5]] == POSITIVE).all()


def test_symptomatic_rate_oracle():
    n = 100000
    ts = TState.fresh(n)
    comp = np.full(n, dz.Y, dtype=np.int8)
    cfg = TConfig(random_rate=0.0, symptomatic_rate=0.3, false_negative=0.0)
    run_testing(ts, comp, cfg, np.random.default_rng(1))
    frac = np.count_nonzero(ts.status == POSITIVE) / n
    assert abs(frac - 0.3) < 0.01


def test_false_positive_rate_oracle():
    n = 200000
    ts = TState.fresh(n)
    comp = np.zeros(n, dtype=np.int8)  # everyone susceptible
    cfg = TConfig(random_rate=1.0, false_positive=0.001)
    run_testing(ts, comp, cfg, np.random.default_rng(2))
    frac = np.count_nonzero(ts.status == POSITIVE) / n
    assert abs(frac - 0.001) < 0.0005


def test_retest_moves_recovered_to_perceived_recovered():
    n = 1000
    ts = TState.fresh(n)
    comp = np.full(n, dz.R, dtype=np.int8)  # recovered, will test negative
    ts.status[:] = POSITIVE
    cfg = TConfig(retest_rate=1.0, false_negative=0.0, false_positive=0.0)
    run_testing(ts, comp, cfg, np.random.default_rng(3))
    pc = perceived_counts(ts, comp)
    assert pc["perceived_infected"] == 0
    assert pc["perceived_recovered"] == n


def test_perceived_counts_views():
    n = 6
    ts = TState.fresh(n)
    comp = np.array([dz.S, dz.Y, dz.H, dz.N, dz.D, dz.R], dtype=np.int8)
    ts.status[1] = POSITIVE
    ts.status[4] = POSITIVE
    pc = perceived_counts(ts, comp)
    assert pc["perceived_infected"] == 1  # the dead positive is not infected
    assert pc["perceived_critical"] == 2  # H and N are visibly critical
    assert pc["perceived_dead"] == 1


def test_registry_window_and_counts():
    reg = ContactRegistry(horizon_days=2)
    reg.record_day(0, np.array([1, 1]), np.array([2, 3]))
    reg.record_day(1, np.array([2]), np.array([3]))
    assert reg.pair_count(1, 2) == 1
    assert set(reg.contacts_of(1)) == {2, 3}
    reg.record_day(2, np.array([4]), np.array([5]))
    # day 0 fell out of the 2-day window
    assert reg.pair_count(1, 2) == 0
    assert set(reg.contacts_of(3)) == {2}
    # horizon zero stores nothing
    empty = ContactRegistry(horizon_days=0)
    empty.record_day(0, np.array([1]), np.array([2]))
    assert empty.pair_count(1, 2) == 0


def test_quarantine_first_order_contact_sets():
    # homes: {0,1} in home 0, {2,3} in home 1, {4} in home 2
    home = np.array([0, 0, 1, 1, 2])
    hh_offsets = np.array([0, 2, 4, 5])
    hh_members = np.array([0, 1, 2, 3, 4])
    reg = ContactRegistry(horizon_days=5)
    reg.record_day(0, np.array([0]), np.array([2]))  # 0 met 2
    # default: direct contacts only, index case excluded
    out = quarantine_first_order(reg, 0, hh_offsets, hh_members, home)
    assert out.tolist() == [2]
    # widened mode also sweeps the contact's housemates
    out = quarantine_first_order(
        reg, 0, hh_offsets, hh_members, home, include_households=True
    )
    assert out.tolist() == [2, 3]
    assert quarantine_first_order(reg, 4, hh_offsets, hh_members, home).tolist() == []
