"""Rollout collection, the training loop and policy evaluation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..doorkey import DoorKeyEnv, EnvConfig, OBS_DIM, ACTIONS
from ..planner import PlanLibrary
from ..reward import RewardConfig, RewardModel
from .algos import TrainerConfig, a2c_update, ppo_update
from .buffer import RolloutBuffer, compute_gae
from .network import PolicyValueNet, log_softmax
from .optim import Adam, RMSprop

CURVE_HEADER = ["frames", "update", "return_mean", "return_min", "return_max",
                "policy_loss", "value_loss", "entropy"]
REWARD_HEADER = ["update", "episodes", "env_reward", "reasoner_reward", "adaptive_term", "shaped_total"]


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(len(probs))
    return np.minimum((probs.cumsum(axis=1) < u[:, None]).sum(axis=1), probs.shape[1] - 1)


class RolloutWorkers:
    """A fixed set of environments, each with its own reward tracker and episode bookkeeping."""

    def __init__(self, env_config: EnvConfig, n: int, reward_kind: str = "none",
                 library: Optional[PlanLibrary] = None, reward_config: Optional[RewardConfig] = None,
                 seed=0):
        self.rng = np.random.Generator(np.random.PCG64(seed))
        reward_config = reward_config or RewardConfig(total_steps=env_config.max_steps)
        self.envs = [DoorKeyEnv(env_config) for _ in range(n)]
        self.models = [RewardModel(reward_kind, library, reward_config, warn_positive=False) for _ in range(n)]
        for env, model in zip(self.envs, self.models):
            env.state_distances = model.needs_distances
        self.obs = np.zeros((n, OBS_DIM))
        self.running_return = np.zeros(n)
        for i in range(n):
            self._reset(i)

    def __len__(self) -> int:
        return len(self.envs)

    def _reset(self, i: int) -> None:
        seed = int(self.rng.integers(2 ** 31 - 1))
        obs, _ = self.envs[i].reset(seed)
        model = self.models[i]
        if model.kind != "none":
            model.begin_episode(self.envs[i].symbolic_state(True))
        self.obs[i] = obs
        self.running_return[i] = 0.0


def collect_rollouts(workers: RolloutWorkers, net: PolicyValueNet, frames_per_proc: int,
                     rng: np.random.Generator) -> RolloutBuffer:
    n = len(workers)
    T = frames_per_proc
    obs = np.zeros((T, n, OBS_DIM))
    actions = np.zeros((T, n), dtype=np.int64)
    log_probs = np.zeros((T, n))
    values = np.zeros((T, n))
    rewards = np.zeros((T, n))
    dones = np.zeros((T, n), dtype=bool)
    finished: List[float] = []
    breakdown = np.zeros(4)
    for t in range(T):
        logits, value, _ = net.forward(workers.obs)
        logp = log_softmax(logits)
        a = sample_actions(np.exp(logp), rng)
        obs[t] = workers.obs
        actions[t] = a
        log_probs[t] = logp[np.arange(n), a]
        values[t] = value
        for i, env in enumerate(workers.envs):
            o, r, done, sym = env.step(a[i])
            shaped, parts = workers.models[i].shape(r, sym)
            breakdown += parts
            rewards[t, i] = shaped
            dones[t, i] = done
            workers.running_return[i] += r
            if done:
                finished.append(workers.running_return[i])
                workers._reset(i)
            else:
                workers.obs[i] = o
    _, last_values, _ = net.forward(workers.obs)
    return RolloutBuffer(obs, actions, log_probs, values, rewards, dones, last_values,
                         episode_returns=finished, reward_breakdown=breakdown)


@dataclass
class TrainResult:
    net: PolicyValueNet
    records: List[Dict[str, float]] = field(default_factory=list)
    reward_log: List[List[float]] = field(default_factory=list)


def train(config: TrainerConfig, env_config: EnvConfig, algo: str = "ppo", reward_kind: str = "none",
          library: Optional[PlanLibrary] = None, reward_config: Optional[RewardConfig] = None,
          callback: Optional[Callable[[Dict[str, float]], None]] = None) -> TrainResult:
    """Alternate rollouts and updates until ``config.total_frames`` frames are collected.

    Returns reported on the curves are raw environment returns of episodes that
    finished during each update's rollouts; an update in which none finished
    repeats the previous value (0 before the first episode ends).
    """
    if algo not in ("ppo", "a2c"):
        raise ValueError(f"unknown algorithm {algo!r}")
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    net = PolicyValueNet(OBS_DIM, len(ACTIONS), seed=np.random.Generator(np.random.PCG64(seeds[0])))
    workers = RolloutWorkers(env_config, config.workers, reward_kind, library, reward_config, seed=seeds[1])
    rng = np.random.Generator(np.random.PCG64(seeds[2]))
    if algo == "ppo":
        optimizer, update = Adam(net.params, config.lr, eps=config.optim_eps), ppo_update
    else:
        optimizer, update = RMSprop(net.params, config.lr, config.optim_alpha, config.optim_eps), a2c_update
    result = TrainResult(net)
    frames, u = 0, 0
    last = (0.0, 0.0, 0.0)
    while frames < config.total_frames:
        buf = collect_rollouts(workers, net, config.frames_per_proc, rng)
        compute_gae(buf, config.discount, config.gae_lambda)
        stats = update(net, buf, config, optimizer, rng)
        frames += len(buf)
        u += 1
        if buf.episode_returns:
            er = np.asarray(buf.episode_returns)
            last = (float(er.mean()), float(er.min()), float(er.max()))
        rec = {"frames": frames, "update": u, "return_mean": last[0], "return_min": last[1],
               "return_max": last[2], **{k: stats[k] for k in ("policy_loss", "value_loss", "entropy")}}
        result.records.append(rec)
        result.reward_log.append([u, len(buf.episode_returns), *buf.reward_breakdown.tolist()])
        if callback:
            callback(rec)
    return result


def _fmt(x) -> str:
    return str(x) if isinstance(x, (int, np.integer)) else f"{x:.9g}"


def write_curve(path, records: Sequence[Dict[str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for r in records:
            w.writerow([_fmt(r[k]) for k in CURVE_HEADER])


def read_curve(path) -> Dict[str, np.ndarray]:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in (rows[0].keys() if rows else CURVE_HEADER)}


def write_reward_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REWARD_HEADER)
        for r in rows:
            w.writerow([int(r[0]), int(r[1])] + [f"{x:.9g}" for x in r[2:]])


def save_checkpoint(path, net: PolicyValueNet) -> None:
    """Flat parameter CSV: a shape header line, then one value per line."""
    with open(path, "w", newline="") as fh:
        fh.write("# " + ";".join("x".join(map(str, s)) for s in net.shapes) + "\n")
        for x in net.get_flat():
            fh.write(f"{x:.17g}\n")


def load_checkpoint(path) -> PolicyValueNet:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise ValueError(f"{path}: missing shape header")
        shapes = [tuple(int(d) for d in s.split("x")) for s in header[2:].strip().split(";")]
        flat = np.array([float(line) for line in fh if line.strip()])
    net = PolicyValueNet(shapes[0][0], shapes[4][1], shapes[0][1])
    if [p.shape for p in net.params] != shapes:
        raise ValueError(f"{path}: unexpected parameter shapes {shapes}")
    net.set_flat(flat)
    return net


# ---------------------------------------------------------------- evaluation

def run_policy_episode(net: PolicyValueNet, env: DoorKeyEnv, rng: np.random.Generator, seed: int) -> bool:
    obs, _ = env.reset(seed)
    done = False
    while not done:
        probs, _ = net.act_probs(obs[None])
        a = sample_actions(probs, rng)[0]
        obs, _, done, _ = env.step(a)
    return env.success


def success_stats(outcomes: Sequence[bool]):
    """Mean success percentage and its standard deviation over episodes."""
    x = 100.0 * np.asarray(outcomes, dtype=float)
    return float(x.mean()), float(x.std())


def evaluate(agent, env_config: EnvConfig, episodes: int = 50, seed: int = 0):
    """Success rate (percent) and std over ``episodes`` freshly seeded layouts.

    ``agent`` is a PolicyValueNet or any object with ``run_episode(env, seed) -> bool``.
    """
    if episodes < 1:
        raise ValueError("episodes must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    env = DoorKeyEnv(env_config)
    env.state_distances = False
    layout_seeds = rng.integers(2 ** 31 - 1, size=episodes)
    outcomes = []
    for s in layout_seeds:
        if isinstance(agent, PolicyValueNet):
            outcomes.append(run_policy_episode(agent, env, rng, int(s)))
        else:
            outcomes.append(agent.run_episode(env, int(s)))
    return success_stats(outcomes)
