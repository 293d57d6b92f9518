"""Discrete soft actor-critic on the stage-control environment.

The actor sees only the perceived summary; the twin critics see the true
compartment summary during training (asymmetric information: the critics
are discarded at deployment, so the deployed policy never benefits from
ground truth).  Networks are small MLPs; everything runs single-threaded
on CPU.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .engine import EngineConfig
from .policies import PandemicEnv

CHECKPOINT_VERSION = 1


@dataclass
class SacHyperparams:
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    alpha: float = 0.01  # fixed entropy temperature
    tau: float = 0.005  # target-network refresh rate
    gamma: float = 0.99
    hidden: int = 128
    depth: int = 2  # hidden layers per network
    replay_capacity: int = 100_000
    batch_size: int = 64
    warmup_steps: int = 1_000
    updates_per_step: int = 1
    total_steps: int = 100_000
    # Training-only regularizer: extra penalty per effective stage move,
    # added on top of the environment's own shaping term.  Discourages the
    # fine-grained oscillation that only a daily cadence can exploit, so
    # the learned stage map transfers to slower decision cadences.  Applied
    # to replay rewards only; logged returns stay on the true objective.
    stage_change_penalty: float = 0.0


def _mlp(in_dim: int, hidden: int, depth: int, out_dim: int) -> nn.Sequential:
    layers, d = [], in_dim
    for _ in range(depth):
        layers += [nn.Linear(d, hidden), nn.ReLU()]
        d = hidden
    layers.append(nn.Linear(d, out_dim))
    return nn.Sequential(*layers)


class _Replay:
    def __init__(self, capacity: int, obs_dim: int, cobs_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.cobs = np.zeros((capacity, cobs_dim), dtype=np.float32)
        self.action = np.zeros(capacity, dtype=np.int64)
        self.reward = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.next_cobs = np.zeros((capacity, cobs_dim), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=np.float32)
        # per-transition discount: gamma ** action_period for that step
        self.disc = np.zeros(capacity, dtype=np.float32)
        self.size = 0
        self.pos = 0

    def push(self, obs, cobs, action, reward, next_obs, next_cobs, done, disc):
        i = self.pos
        self.obs[i] = obs
        self.cobs[i] = cobs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.next_cobs[i] = next_cobs
        self.done[i] = float(done)
        self.disc[i] = disc
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch)
        t = torch.from_numpy
        return (
            t(self.obs[idx]),
            t(self.cobs[idx]),
            t(self.action[idx]),
            t(self.reward[idx]),
            t(self.next_obs[idx]),
            t(self.next_cobs[idx]),
            t(self.done[idx]),
            t(self.disc[idx]),
        )


class SacAgent:
    """Networks plus the update rule; separable from the training loop."""

    def __init__(self, obs_dim: int, cobs_dim: int, n_actions: int, hyper: SacHyperparams):
        self.hyper = hyper
        self.n_actions = n_actions
        h, d = hyper.hidden, hyper.depth
        self.actor = _mlp(obs_dim, h, d, n_actions)
        self.q1 = _mlp(cobs_dim, h, d, n_actions)
        self.q2 = _mlp(cobs_dim, h, d, n_actions)
        self.q1_target = _mlp(cobs_dim, h, d, n_actions)
        self.q2_target = _mlp(cobs_dim, h, d, n_actions)
        self.q1_target.load_state_dict(self.q1.state_dict())
        self.q2_target.load_state_dict(self.q2.state_dict())
        for p in self.q1_target.parameters():
            p.requires_grad_(False)
        for p in self.q2_target.parameters():
            p.requires_grad_(False)
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=hyper.actor_lr)
        self.critic_opt = torch.optim.Adam(
            list(self.q1.parameters()) + list(self.q2.parameters()), lr=hyper.critic_lr
        )

    @torch.no_grad()
    def act(self, obs: np.ndarray, deterministic: bool, rng: np.random.Generator) -> int:
        logits = self.actor(torch.from_numpy(np.asarray(obs, dtype=np.float32)))
        if deterministic:
            return int(torch.argmax(logits).item())
        probs = F.softmax(logits, dim=-1).numpy().astype(np.float64)
        probs /= probs.sum()
        return int(rng.choice(len(probs), p=probs))

    def update(self, batch) -> tuple[float, float, float]:
        obs, cobs, action, reward, next_obs, next_cobs, done, disc = batch
        alpha = self.hyper.alpha

        with torch.no_grad():
            next_logp = F.log_softmax(self.actor(next_obs), dim=-1)
            next_p = next_logp.exp()
            qt = torch.min(self.q1_target(next_cobs), self.q2_target(next_cobs))
            next_v = (next_p * (qt - alpha * next_logp)).sum(dim=-1)
            target = reward + disc * (1.0 - done) * next_v

        a = action.unsqueeze(-1)
        q1 = self.q1(cobs).gather(1, a).squeeze(-1)
        q2 = self.q2(cobs).gather(1, a).squeeze(-1)
        critic_loss = F.mse_loss(q1, target) + F.mse_loss(q2, target)
        self.critic_opt.zero_grad()
        critic_loss.backward()
        self.critic_opt.step()

        logp = F.log_softmax(self.actor(obs), dim=-1)
        p = logp.exp()
        with torch.no_grad():
            q = torch.min(self.q1(cobs), self.q2(cobs))
        actor_loss = (p * (alpha * logp - q)).sum(dim=-1).mean()
        self.actor_opt.zero_grad()
        actor_loss.backward()
        self.actor_opt.step()

        with torch.no_grad():
            tau = self.hyper.tau
            for tgt, src in ((self.q1_target, self.q1), (self.q2_target, self.q2)):
                for pt, ps in zip(tgt.parameters(), src.parameters()):
                    pt.mul_(1.0 - tau).add_(ps, alpha=tau)
            entropy = -(p * logp).sum(dim=-1).mean()
        return float(critic_loss.item()), float(actor_loss.item()), float(entropy.item())

    def checkpoint(self, steps: int, extra: dict | None = None) -> dict:
        ck = {
            "version": CHECKPOINT_VERSION,
            "steps": steps,
            "hyper": asdict(self.hyper),
            "n_actions": self.n_actions,
            "obs_dim": self.actor[0].in_features,
            "critic_obs_dim": self.q1[0].in_features,
            "actor": self.actor.state_dict(),
            "q1": self.q1.state_dict(),
            "q2": self.q2.state_dict(),
        }
        if extra:
            ck.update(extra)
        return ck


def sac_train(
    config: EngineConfig | None = None,
    hyper: SacHyperparams | None = None,
    seed: int = 0,
    *,
    action_period=None,
    checkpoint_path=None,
    curve_path=None,
    snapshot_dir=None,
    snapshot_every: int = 10_000,
    log=None,
) -> dict:
    """Train and return a checkpoint dict (also saved if a path is given).

    `action_period` may be a single cadence or a sequence; with a sequence
    each episode runs at whichever cadence has accumulated fewer transitions
    so far, so the replay stays balanced and one actor learns a stage map
    that holds up whether its choices are applied daily or held for several
    days.  The critic sees the cadence as an extra input and targets use the
    per-transition discount gamma ** period; the actor stays cadence-blind.

    With `snapshot_dir` set, a numbered checkpoint lands there each time the
    step counter crosses a `snapshot_every` boundary, so a post-hoc pass can
    pick the snapshot that generalizes best on validation seeds instead of
    trusting whatever the final gradient step left behind.

    Episode seeds start at 10_000 + episode index, leaving small seeds free
    for held-out evaluation.  Training aborts with a diagnostic if a return
    or loss goes non-finite.
    """
    hyper = hyper or SacHyperparams()
    torch.set_num_threads(1)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    env = PandemicEnv(config, action_period=1)
    if action_period is None:
        periods = (env.config.action_period_days,)
    elif isinstance(action_period, int):
        periods = (action_period,)
    else:
        periods = tuple(int(p) for p in action_period)
    norm = float(max(periods))
    cobs_dim = env.critic_obs_dim + 1  # + cadence feature
    agent = SacAgent(env.obs_dim, cobs_dim, env.N_ACTIONS, hyper)
    replay = _Replay(hyper.replay_capacity, env.obs_dim, cobs_dim)

    curve = []
    steps = 0
    episode = 0
    empty_streak = 0
    steps_by_period = {p: 0 for p in periods}
    next_snap = snapshot_every
    if snapshot_dir is not None:
        snapshot_dir = Path(snapshot_dir)
        snapshot_dir.mkdir(parents=True, exist_ok=True)
    while steps < hyper.total_steps:
        period = min(periods, key=lambda p: (steps_by_period[p], p))
        env.action_period = period
        disc = hyper.gamma ** period
        feat = period / norm
        obs, info = env.reset(seed=10_000 + episode)
        if env.done:
            # outbreak never became visible; skip, but refuse to spin forever
            empty_streak += 1
            episode += 1
            if empty_streak >= 10:
                raise RuntimeError(
                    "10 consecutive episodes ended before activation; "
                    "the config cannot produce training data"
                )
            continue
        empty_streak = 0
        cobs = np.append(info["critic_obs"], feat).astype(np.float32)
        ep_return = 0.0
        losses = []
        while not env.done:
            if steps < hyper.warmup_steps:
                action = int(rng.integers(env.N_ACTIONS))
            else:
                action = agent.act(obs, deterministic=False, rng=rng)
            stage_before = env.sim.stage
            tr = env.step(action)
            moved = abs(env.sim.stage - stage_before)
            r_train = tr.reward - hyper.stage_change_penalty * moved
            next_cobs = np.append(tr.info["critic_obs"], feat).astype(np.float32)
            replay.push(obs, cobs, action, r_train, tr.obs, next_cobs, tr.done, disc)
            obs, cobs = tr.obs, next_cobs
            ep_return += tr.reward
            steps += 1
            steps_by_period[period] += 1
            if steps >= hyper.warmup_steps and replay.size >= hyper.batch_size:
                for _ in range(hyper.updates_per_step):
                    losses.append(agent.update(replay.sample(hyper.batch_size, rng)))
            if steps >= hyper.total_steps:
                break
        if not math.isfinite(ep_return):
            raise RuntimeError(
                f"training diverged: episode {episode} return {ep_return!r} at step {steps}"
            )
        mean_l = np.mean(losses, axis=0) if losses else (0.0, 0.0, 0.0)
        if not np.all(np.isfinite(mean_l)):
            raise RuntimeError(f"training diverged: non-finite loss at step {steps}")
        curve.append(
            (episode, steps, period, ep_return, float(mean_l[0]), float(mean_l[1]), float(mean_l[2]))
        )
        if log is not None:
            log(
                f"episode {episode} steps {steps} period {period} return {ep_return:.3f} "
                f"critic {mean_l[0]:.4f} actor {mean_l[1]:.4f} entropy {mean_l[2]:.3f}"
            )
        episode += 1
        if snapshot_dir is not None and steps >= next_snap:
            torch.save(
                agent.checkpoint(steps, {"action_periods": list(periods)}),
                snapshot_dir / f"snap_{steps:06d}.ckpt",
            )
            while next_snap <= steps:
                next_snap += snapshot_every
        if checkpoint_path is not None and episode % 25 == 0:
            torch.save(
                agent.checkpoint(
                    steps, {"curve_rows": len(curve), "action_periods": list(periods)}
                ),
                checkpoint_path,
            )
        if curve_path is not None and episode % 25 == 0:
            _write_curve(curve_path, curve)

    ck = agent.checkpoint(steps, {"action_periods": list(periods)})
    if checkpoint_path is not None:
        torch.save(ck, checkpoint_path)
    if curve_path is not None:
        _write_curve(curve_path, curve)
    ck["curve"] = curve
    return ck


def _write_curve(path, curve) -> None:
    lines = ["episode,steps,period,return,critic_loss,actor_loss,entropy"]
    for row in curve:
        lines.append(
            f"{row[0]},{row[1]},{row[2]},{row[3]:.6f},{row[4]:.6f},{row[5]:.6f},{row[6]:.6f}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _actor_from_checkpoint(ck: dict) -> tuple[nn.Sequential, SacHyperparams]:
    hyper = SacHyperparams(**ck["hyper"])
    actor = _mlp(ck["obs_dim"], hyper.hidden, hyper.depth, ck["n_actions"])
    actor.load_state_dict(ck["actor"])
    actor.eval()
    return actor, hyper


def load_policy(path) -> "LearnedPolicy":
    ck = torch.load(path, map_location="cpu", weights_only=True)
    if ck.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {ck.get('version')!r}")
    return LearnedPolicy(ck)


class LearnedPolicy:
    """Callable wrapper over a trained actor."""

    def __init__(self, checkpoint: dict):
        self.checkpoint = checkpoint
        self.actor, self.hyper = _actor_from_checkpoint(checkpoint)

    def act(self, obs: np.ndarray, deterministic: bool = True, rng=None) -> int:
        return policy_act(self.actor, obs, deterministic, rng)


def policy_act(actor, obs, deterministic: bool = True, rng=None) -> int:
    """Map an actor observation vector to a discrete action index."""
    if isinstance(actor, dict):
        actor, _ = _actor_from_checkpoint(actor)
    obs = np.asarray(obs, dtype=np.float32)
    if obs.shape != (actor[0].in_features,):
        raise ValueError(f"observation shape {obs.shape} != ({actor[0].in_features},)")
    with torch.no_grad():
        logits = actor(torch.from_numpy(obs))
        if deterministic:
            return int(torch.argmax(logits).item())
        probs = F.softmax(logits, dim=-1).numpy().astype(np.float64)
    probs /= probs.sum()
    rng = rng or np.random.default_rng()
    return int(rng.choice(len(probs), p=probs))


def _delta_toward(target: int, current: int) -> int:
    return int(np.clip(target - current, -1, 1)) + 1


def eval_episode(act_fn, seed: int, config=None, action_period=None) -> float:
    """One evaluation episode; act_fn(obs_vec, env) -> action index."""
    env = PandemicEnv(config, action_period=action_period)
    obs, _ = env.reset(seed=seed)
    total = 0.0
    while not env.done:
        tr = env.step(act_fn(obs, env))
        obs = tr.obs
        total += tr.reward
    return total


def evaluate_checkpoint(ck, seeds, config=None, action_period=None) -> np.ndarray:
    if isinstance(ck, LearnedPolicy):
        policy = ck
    elif isinstance(ck, dict):
        policy = LearnedPolicy(ck)
    else:
        policy = load_policy(ck)
    return np.array(
        [
            eval_episode(lambda o, env: policy.act(o), s, config, action_period)
            for s in seeds
        ]
    )


def evaluate_benchmark(policy, seeds, config=None, action_period=None) -> np.ndarray:
    """Evaluate an Observation -> stage policy through the same env loop.

    Accepts a benchmark name or a zero-arg factory; either way each episode
    gets a fresh policy instance so stateful ladders don't bleed across seeds.
    """
    from . import engine as engine_mod
    from .policies import benchmark_config, heuristic_policy

    if isinstance(policy, str):
        name = policy
        # National ladders run on their own stage table.
        config = benchmark_config(name, config or engine_mod.default_config())
        table_name = config.stage_table
        factory = lambda: heuristic_policy(name, table_name)
    else:
        factory = policy

    def run_one(seed: int) -> float:
        stage_policy = factory()

        def act(obs_vec, env):
            target = stage_policy(env.sim.observation())
            return _delta_toward(int(target), env.sim.stage)

        return eval_episode(act, seed, config, action_period)

    return np.array([run_one(s) for s in seeds])


def evaluate_random(seeds, config=None, action_period=None, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.array(
        [
            eval_episode(lambda o, env: int(rng.integers(3)), s, config, action_period)
            for s in seeds
        ]
    )
