"""Experiment apparatus on top of the engine.

Everything here is paired-seed by construction: when two conditions are
compared, the same seed list runs under both, so differences come from the
condition and not from sampling luck.  Aggregation is Welford-based and
iterates seeds in sorted order, which makes the result independent of the
order the caller happened to list them in.
"""

from __future__ import annotations

import copy
import inspect
from dataclasses import dataclass, field

import numpy as np

from .engine import EngineConfig, RunResult, default_config, reset, run, step_day
from .interventions import Regulation, stage_table, testing_preset

# Per-day vector layout used by AggregateStats.  Compartment names are kept
# in engine CSV order so mean curves line up with run CSVs.
DAY_FIELD_NAMES = (
    "stage",
    "S",
    "E",
    "preY",
    "preA",
    "Y",
    "A",
    "H",
    "N",
    "R",
    "D",
    "perceived_infected",
    "perceived_critical",
    "perceived_dead",
    "n_critical",
    "reward",
    "reward_health",
    "reward_econ",
    "reward_shaping",
    "contacts",
)

SCALAR_NAMES = (
    "peak_infected",
    "time_to_peak",
    "time_to_peak_deaths",
    "cumulative_infected",
    "cumulative_deaths",
    "duration",
    "economic_cost",
    "total_reward",
    "peak_critical",
)


class AnalysisError(RuntimeError):
    pass


def _day_vector(rec) -> np.ndarray:
    return np.array(
        [
            rec.stage,
            *rec.compartments,
            rec.perceived_infected,
            rec.perceived_critical,
            rec.perceived_dead,
            rec.n_critical,
            rec.reward,
            rec.reward_health,
            rec.reward_econ,
            rec.reward_shaping,
            rec.contacts,
        ],
        dtype=np.float64,
    )


def infected_curve(records) -> np.ndarray:
    """True currently-infected count per day (E through A, critical apart)."""
    return np.array([sum(r.compartments[1:6]) for r in records], dtype=np.int64)


def daily_deaths(records) -> np.ndarray:
    d = np.array([r.compartments[9] for r in records], dtype=np.int64)
    return np.diff(np.concatenate([[0], d]))


def time_to_peak_deaths(records) -> int:
    """Day of the largest daily death increment.

    A centered 7-day moving average breaks the many ties a raw argmax
    would hit on small towns where several days share the same increment.
    """
    dd = daily_deaths(records).astype(np.float64)
    if len(dd) >= 7:
        smooth = np.convolve(dd, np.ones(7) / 7.0, mode="same")
    else:
        smooth = dd
    return int(np.argmax(smooth))


def pandemic_duration(records) -> int:
    """First day after the infection peak with under 1% of town infected."""
    inf = infected_curve(records)
    n = sum(records[0].compartments)
    peak = int(np.argmax(inf))
    below = np.nonzero(inf[peak:] < 0.01 * n)[0]
    if len(below) == 0:
        return len(records)
    return peak + int(below[0])


def run_scalars(res: RunResult) -> dict[str, float]:
    inf = infected_curve(res.records)
    crit = np.array([r.n_critical for r in res.records])
    econ = -sum(r.reward_econ for r in res.records)
    return {
        "peak_infected": float(inf.max()),
        "time_to_peak": float(np.argmax(inf)),
        "time_to_peak_deaths": float(time_to_peak_deaths(res.records)),
        "cumulative_infected": float(res.cumulative_infected),
        "cumulative_deaths": float(res.deaths),
        "duration": float(pandemic_duration(res.records)),
        "economic_cost": float(econ),
        "total_reward": float(res.total_reward()),
        "peak_critical": float(crit.max()),
    }


class Welford:
    """Streaming mean/variance; sample variance for n >= 2, zero for n = 1."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def push(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def variance(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.n - 1)


@dataclass
class AggregateStats:
    """Across-seed statistics for one condition."""

    seeds: tuple
    day_mean: np.ndarray  # (days, len(DAY_FIELD_NAMES))
    day_var: np.ndarray
    per_seed: dict[str, np.ndarray] = field(default_factory=dict)

    def scalar_mean(self, name: str) -> float:
        return float(np.mean(self.per_seed[name]))

    def scalar_var(self, name: str) -> float:
        vals = self.per_seed[name]
        if len(vals) < 2:
            return 0.0
        return float(np.var(vals, ddof=1))

    def day_field(self, name: str) -> np.ndarray:
        return self.day_mean[:, DAY_FIELD_NAMES.index(name)]


def _policy_for_seed(policy, config: EngineConfig):
    """Resolve the policy argument for one run.

    Stateful heuristics must not bleed trigger state across seeds, so
    multi-run helpers accept a benchmark name or a zero-arg factory and
    build a fresh instance per seed.  A ready policy instance (anything
    whose call takes an argument) is passed through as-is.
    """
    if policy is None:
        return None
    if isinstance(policy, str):
        from .policies import heuristic_policy

        return heuristic_policy(policy, config.stage_table)
    try:
        params = inspect.signature(policy).parameters
    except (TypeError, ValueError):
        return policy
    required = [
        p
        for p in params.values()
        if p.default is inspect.Parameter.empty
        and p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD)
    ]
    return policy() if not required else policy


def multi_seed(
    config: EngineConfig,
    policy,
    seeds,
    *,
    action_period: int | None = None,
    backend: str | None = None,
) -> AggregateStats:
    """Run one condition across seeds and aggregate.

    Seeds are deduplicated and iterated in sorted order so a permuted seed
    list yields a bit-identical result.  `policy` may be a policy instance,
    a benchmark name, or a zero-arg factory; names and factories produce a
    fresh instance per seed.  Any failing run aborts the whole aggregation;
    partial statistics are never returned.
    """
    seed_list = sorted(set(int(s) for s in seeds))
    if not seed_list:
        raise AnalysisError("multi_seed needs at least one seed")
    if isinstance(policy, str):
        from .policies import benchmark_config

        config = benchmark_config(policy, config)
    acc = None
    scalars = {name: [] for name in SCALAR_NAMES}
    for s in seed_list:
        try:
            res = run(
                config,
                seed=s,
                policy=_policy_for_seed(policy, config),
                action_period=action_period,
                backend=backend,
            )
        except Exception as exc:
            raise AnalysisError(f"seed {s} failed: {exc}") from exc
        days = np.stack([_day_vector(r) for r in res.records])
        if acc is None:
            acc = Welford(days.shape)
        elif days.shape != acc.mean.shape:
            raise AnalysisError(f"seed {s} produced {days.shape[0]} days, expected {acc.mean.shape[0]}")
        acc.push(days)
        for name, val in run_scalars(res).items():
            scalars[name].append(val)
    return AggregateStats(
        seeds=tuple(seed_list),
        day_mean=acc.mean.copy(),
        day_var=acc.variance(),
        per_seed={k: np.array(v) for k, v in scalars.items()},
    )


SWEEP_AXES = ("spread-rate", "contact-rate", "gathering-size")


def _apply_axis(cfg: EngineConfig, axis: str, level) -> EngineConfig:
    if axis == "spread-rate":
        cfg.population.spread_rate_mean = float(level)
    elif axis == "contact-rate":
        cfg.contact_rate_scale = float(level)
    elif axis == "gathering-size":
        cfg.gathering_cap_override = None if level is None else int(level)
    else:
        raise AnalysisError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    return cfg


def sensitivity_sweep(
    axis: str,
    levels,
    seeds,
    *,
    base_config: EngineConfig | None = None,
    policy=None,
) -> dict:
    """One-axis sensitivity study; returns {level: AggregateStats}."""
    if not levels:
        raise AnalysisError("sweep needs at least one level")
    out = {}
    for level in levels:
        cfg = copy.deepcopy(base_config) if base_config is not None else default_config()
        cfg = _apply_axis(cfg, axis, level)
        out[level] = multi_seed(cfg, policy, seeds)
    return out


def _fixed_regulation_run(
    config: EngineConfig,
    regulation: Regulation,
    seed: int,
    collect_contacts: bool = False,
) -> RunResult:
    """Run a horizon with one regulation applied from day zero."""
    sim = reset(config, seed=seed)
    records = []
    pairs = [] if collect_contacts else None
    for _ in range(config.horizon_days):
        rec, day_pairs = step_day(sim, regulation, collect_pairs=collect_contacts)
        records.append(rec)
        if collect_contacts:
            pairs.append(day_pairs)
    return RunResult(
        records=records,
        seed=seed,
        clamp_warnings=0,
        world=sim.world,
        ds=sim.ds,
        ts=sim.ts,
        daily_pairs=pairs,
    )


@dataclass
class CalibrationResult:
    chosen: float
    table: dict  # grid value -> mean time-to-peak-deaths

    def __float__(self):
        return self.chosen


def calibrate_spread_rate(
    grid,
    target_days: float = 30.0,
    seeds=range(1, 9),
    *,
    base_config: EngineConfig | None = None,
) -> CalibrationResult:
    """Grid-search the spread-rate mean against a death-peak timing target.

    Each candidate runs under the recommendations-only bundle (stage 1 of
    the five-stage ladder: stay home when positive, hygiene, gathering
    caps) applied for the whole horizon, mirroring a first wave under
    voluntary measures alone.  The chosen value minimizes
    |mean time-to-peak-deaths - target|; ties go to the larger spread rate.
    """
    grid = sorted(set(float(g) for g in grid))
    if not grid:
        raise AnalysisError("calibration grid is empty")
    seed_list = sorted(set(int(s) for s in seeds))
    mild = stage_table("five-stage")[1]
    table = {}
    for g in grid:
        cfg = copy.deepcopy(base_config) if base_config is not None else default_config()
        cfg.population.spread_rate_sd = 0.01  # variance pinned during calibration
        cfg.population.spread_rate_mean = g
        peaks = [
            time_to_peak_deaths(_fixed_regulation_run(cfg, mild, s).records)
            for s in seed_list
        ]
        table[g] = float(np.mean(peaks))
    # max() scans left to right, so later (larger) grid values win ties
    chosen = max(grid, key=lambda g: -abs(table[g] - target_days))
    return CalibrationResult(chosen=chosen, table=table)


def testing_matrix(
    preset_names=None,
    seeds=range(1, 9),
    *,
    base_config: EngineConfig | None = None,
) -> dict[str, AggregateStats]:
    """Run the testing/tracing preset grid on identical seeds."""
    if preset_names is None:
        preset_names = (
            "NONE",
            "SICK",
            "CON-2",
            "CON-5",
            "CON-10",
            "SICK+",
            "CON-2+",
            "CON-5+",
            "CON-10+",
            "SICK++",
        )
    seed_list = sorted(set(int(s) for s in seeds))
    out = {}
    for name in preset_names:
        tcfg, stay_home = testing_preset(name)
        cfg = copy.deepcopy(base_config) if base_config is not None else default_config()
        cfg.testing = tcfg
        reg = Regulation(stage=0, stay_home_if_sick=stay_home)
        acc = None
        scalars = {k: [] for k in SCALAR_NAMES}
        for s in seed_list:
            res = _fixed_regulation_run(cfg, reg, s)
            days = np.stack([_day_vector(r) for r in res.records])
            if acc is None:
                acc = Welford(days.shape)
            acc.push(days)
            for k, v in run_scalars(res).items():
                scalars[k].append(v)
        out[name] = AggregateStats(
            seeds=tuple(seed_list),
            day_mean=acc.mean.copy(),
            day_var=acc.variance(),
            per_seed={k: np.array(v) for k, v in scalars.items()},
        )
    return out


@dataclass
class DailyContactGraph:
    day: int
    edges: tuple  # (pi, pj) int arrays, one entry per sampled contact
    components: int


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)
        self.components = n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:  # path compression
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1


def count_components(n: int, pi: np.ndarray, pj: np.ndarray) -> int:
    uf = _UnionFind(n)
    for a, b in zip(pi.tolist(), pj.tolist()):
        uf.union(a, b)
    return uf.components


def connectivity_series(daily_pairs, n: int) -> list[DailyContactGraph]:
    """Per-day contact-graph component counts from a collected run."""
    out = []
    for day, (pi, pj) in enumerate(daily_pairs):
        out.append(
            DailyContactGraph(
                day=day,
                edges=(pi, pj),
                components=count_components(n, pi, pj),
            )
        )
    return out


def weekend_peak_fraction(components: np.ndarray) -> float:
    """Fraction of whole weeks whose component-count max lands on a weekend.

    Day 0 is a Monday by the calendar convention, so weekend slots are
    weekdays 5 and 6.
    """
    counts = np.asarray(components)
    weeks = len(counts) // 7
    if weeks == 0:
        return 0.0
    hits = 0
    for w in range(weeks):
        chunk = counts[7 * w : 7 * w + 7]
        if int(np.argmax(chunk)) >= 5:
            hits += 1
    return hits / weeks


def write_tidy_csv(path, stats_by_condition: dict) -> None:
    """Tidy per-seed scalar table: condition,seed,metric,value."""
    lines = ["condition,seed,metric,value"]
    for cond, stats in stats_by_condition.items():
        for metric in SCALAR_NAMES:
            for seed, val in zip(stats.seeds, stats.per_seed[metric]):
                # + 0.0 folds IEEE negative zero so CSVs never show "-0"
                lines.append(f"{cond},{seed},{metric},{val + 0.0:.10g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(path, stats_by_condition: dict) -> None:
    lines = ["condition,metric,mean,variance"]
    for cond, stats in stats_by_condition.items():
        for metric in SCALAR_NAMES:
            mean = stats.scalar_mean(metric) + 0.0
            var = stats.scalar_var(metric) + 0.0
            lines.append(f"{cond},{metric},{mean:.10g},{var:.10g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
