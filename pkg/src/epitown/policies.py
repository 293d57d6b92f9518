"""Regulation policies: benchmark heuristics and the RL environment.

A policy is a callable mapping an Observation (the perceived state) to an
absolute stage in the active table.  Stateful heuristics are classes; one
instance drives one run.

The RL environment exposes the asymmetric view used for training: the
actor observes only perceived quantities, while the critic may additionally
see the true compartment summary carried in the step info.  One action
covers one day of simulated time (24 hours) by default.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import engine as engine_mod
from . import interventions
from .engine import EngineConfig, Observation, RewardParams, reward, reward_components

__all__ = [
    "Observation",
    "RewardParams",
    "reward",
    "reward_components",
    "ConstantStage",
    "StagedPeak",
    "SwedenPolicy",
    "ItalyPolicy",
    "RandomPolicy",
    "heuristic_policy",
    "benchmark_config",
    "PandemicEnv",
    "EnvStep",
    "sac_train",
    "policy_act",
    "load_policy",
]


class ConstantStage:
    def __init__(self, stage: int):
        self.stage = stage

    def __call__(self, obs: Observation) -> int:
        return self.stage


class StagedPeak:
    """Escalate to the top stage at a perceived-infection trigger, hold,
    then walk back down one stage per step interval.

    With hold 30 and step 10 the ladder sits at the top for 30 days, makes
    its first cut 10 days later and another every 10 days after that.
    """

    def __init__(
        self,
        max_stage: int = 4,
        trigger: int = 10,
        hold_days: int = 30,
        step_days: int = 10,
    ):
        self.max_stage = max_stage
        self.trigger = trigger
        self.hold_days = hold_days
        self.step_days = step_days
        self.trigger_day: int | None = None

    def __call__(self, obs: Observation) -> int:
        if self.trigger_day is None:
            if obs.perceived_infected >= self.trigger:
                self.trigger_day = obs.day
            else:
                return 0
        dt = obs.day - self.trigger_day
        if dt < self.hold_days:
            return self.max_stage
        if self.step_days <= 0:  # release straight to the bottom
            return 0
        down = (dt - self.hold_days) // self.step_days
        return max(self.max_stage - down, 0)


class SwedenPolicy:
    """Single permanent escalation to the top of the Swedish table."""

    def __init__(self, trigger: int = 10, max_stage: int = 1):
        self.trigger = trigger
        self.max_stage = max_stage
        self.active = False

    def __call__(self, obs: Observation) -> int:
        if obs.perceived_infected >= self.trigger:
            self.active = True
        return self.max_stage if self.active else 0


class ItalyPolicy:
    """Escalate one stage at each doubling of perceived infections."""

    def __init__(self, trigger: int = 10, max_stage: int = 4):
        self.trigger = trigger
        self.max_stage = max_stage
        self.stage = 0

    def __call__(self, obs: Observation) -> int:
        threshold = self.trigger
        stage = 0
        while stage < self.max_stage and obs.perceived_infected >= threshold:
            stage += 1
            threshold *= 2
        self.stage = max(self.stage, stage)  # never de-escalates
        return self.stage


class RandomPolicy:
    """Uniform random stage delta each decision."""

    def __init__(self, seed: int, max_stage: int = 4):
        self.rng = np.random.default_rng(seed)
        self.max_stage = max_stage

    def __call__(self, obs: Observation) -> int:
        delta = int(self.rng.integers(0, 3)) - 1
        return min(max(obs.stage + delta, 0), self.max_stage)


def heuristic_policy(name: str, table_name: str = "five-stage", seed: int = 0):
    """Factory for the named benchmark policies."""
    table = interventions.stage_table(table_name)
    max_stage = len(table) - 1
    name = name.lower()
    if name in ("s0", "stage0", "none"):
        return ConstantStage(0)
    if name.startswith("constant-"):
        return ConstantStage(int(name.split("-")[1]))
    if name in ("s040gi", "gi"):
        return StagedPeak(max_stage=max_stage, step_days=10)
    if name in ("s040fi", "fi"):
        return StagedPeak(max_stage=max_stage, step_days=5)
    if name == "s040":
        return StagedPeak(max_stage=max_stage, step_days=0)
    if name in ("swe", "sweden"):
        return SwedenPolicy(max_stage=max_stage)
    if name in ("ita", "italy"):
        return ItalyPolicy(max_stage=max_stage)
    if name == "random":
        return RandomPolicy(seed=seed, max_stage=max_stage)
    raise KeyError(f"unknown policy {name!r}")


# The national heuristics are defined against their own regulation ladders.
BENCHMARK_TABLE = {
    "swe": "sweden",
    "sweden": "sweden",
    "ita": "italy",
    "italy": "italy",
}


def benchmark_config(name: str, config: EngineConfig) -> EngineConfig:
    """Config copy switched to the named benchmark's native stage table.

    Policies without a national table run on whatever the config names, so
    the config comes back untouched for them.
    """
    native = BENCHMARK_TABLE.get(name.lower())
    if native is None or config.stage_table == native:
        return config
    return replace(config, stage_table=native)


@dataclass
class EnvStep:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict


class PandemicEnv:
    """Stage-control environment over the simulator.

    Actions are stage deltas {-1, 0, +1} encoded as {0, 1, 2}.  reset()
    fast-forwards through the pre-activation period at stage 0 so the first
    decision happens when the perceived infection count crosses the
    activation threshold.  The actor observation is the normalized
    perceived summary plus the stage; the true compartment summary rides
    in info["critic_obs"] for training-time critics only.
    """

    N_ACTIONS = 3

    def __init__(
        self,
        config: EngineConfig | None = None,
        action_period: int | None = None,
        backend: str | None = None,
    ):
        self.config = config or engine_mod.default_config()
        self.table = interventions.stage_table(self.config.stage_table)
        self.max_stage = len(self.table) - 1
        self.action_period = action_period or self.config.action_period_days
        self.backend = backend
        self.sim = None
        self.done = True

    @property
    def obs_dim(self) -> int:
        return 5

    @property
    def critic_obs_dim(self) -> int:
        return 6

    def _obs(self) -> np.ndarray:
        return self.sim.observation().as_vector(self.max_stage)

    def _critic_obs(self) -> np.ndarray:
        t = self.sim.true_summary()
        n = float(self.sim.world.n)
        return np.array(
            [
                t["none"] / n,
                t["infected"] / n,
                t["critical"] / n,
                t["dead"] / n,
                t["recovered"] / n,
                self.sim.stage / max(self.max_stage, 1),
            ],
            dtype=np.float32,
        )

    def reset(self, seed: int) -> tuple[np.ndarray, dict]:
        self.sim = engine_mod.reset(self.config, seed, backend=self.backend)
        self.done = False
        # Hold stage 0 until the outbreak is noticed.
        while self.sim.day < self.config.horizon_days:
            obs = self.sim.observation()
            if obs.perceived_infected >= self.config.activation_threshold:
                self.sim.activated = True
                self.sim.activation_day = self.sim.day
                break
            engine_mod.step_day(self.sim, self.table[0])
        if not self.sim.activated:
            self.done = True
        return self._obs(), {"critic_obs": self._critic_obs(), "day": self.sim.day}

    def step(self, action: int) -> EnvStep:
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        if action not in (0, 1, 2):
            raise ValueError(f"action must be 0, 1 or 2, got {action!r}")
        delta = action - 1
        self.sim.stage = min(max(self.sim.stage + delta, 0), self.max_stage)
        total = 0.0
        for _ in range(self.action_period):
            if self.sim.day >= self.config.horizon_days:
                break
            rec, _ = engine_mod.step_day(self.sim, self.table[self.sim.stage])
            total += rec.reward
        self.done = self.sim.day >= self.config.horizon_days
        return EnvStep(
            obs=self._obs(),
            reward=total,
            done=self.done,
            info={"critic_obs": self._critic_obs(), "day": self.sim.day},
        )


def __getattr__(name):
    # torch is heavy; pull the trainer in only when asked for.
    if name in ("sac_train", "policy_act", "load_policy"):
        from . import sac

        return getattr(sac, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
