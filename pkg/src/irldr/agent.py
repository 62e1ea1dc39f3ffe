"""Deep-Q training: replay buffer, epsilon-greedy exploration with per-episode
decay, and a target network updated by soft blending."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import environment as env_mod
from . import qnet
from .domain import Household
from .environment import N_ACTIONS, STATE_DIM, EpisodeEngine, PriceModel, Trajectory
from .rewards import RewardSpec


class Policy(Protocol):
    def act(self, obs: np.ndarray) -> int: ...


class GreedyPolicy:
    """Argmax over Q-values; ties break toward the lower level."""

    def __init__(self, net: qnet.Mlp, normalizer: qnet.InputNormalizer, n_actions: int):
        self.net = net
        self.normalizer = normalizer
        self.n_actions = n_actions

    def act(self, obs: np.ndarray) -> int:
        q = self.net.forward(self.normalizer(obs))
        return int(np.argmax(q[: self.n_actions]))


class RandomPolicy:
    """Uniform random actions, deterministic per (seed, episode) for
    replay-stable rollouts."""

    def __init__(self, n_actions: int, seed: int):
        self.n_actions = n_actions
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def begin_episode(self, day: int) -> None:
        self._rng = np.random.default_rng(np.random.SeedSequence((self.seed, day)))

    def act(self, obs: np.ndarray) -> int:
        return int(self._rng.integers(self.n_actions))


class TabularPolicy:
    """Lookup policy over hashable observation keys (small test MDPs)."""

    def __init__(self, table: dict, default: int = 0):
        self.table = table
        self.default = default

    def act(self, obs: np.ndarray) -> int:
        return int(self.table.get(tuple(np.asarray(obs).tolist()), self.default))


class ConstantPolicy:
    def __init__(self, level: int):
        self.level = level

    def act(self, obs: np.ndarray) -> int:
        return self.level


class ReplayBuffer:
    """Ring buffer of transitions; overwrites the oldest when full."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.terminal = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, state, action, reward, next_state, terminal) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminal[i] = terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self._size, size=batch_size)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.terminal[idx],
        )


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 1500
    batch_size: int = 32
    gamma: float = 0.9
    tau: float = 0.001
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.999
    epsilon_floor: float = 0.05
    learning_rate: float = 0.001
    buffer_capacity: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.gamma < 1:  # 0 allowed for purely myopic training
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if not 0 <= self.epsilon_floor <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_floor <= epsilon_start <= 1")
        if self.episodes < 0 or self.batch_size <= 0 or self.buffer_capacity <= 0:
            raise ValueError("episodes, batch_size and buffer_capacity must be positive")


def epsilon_at(cfg: TrainConfig, episode: int) -> float:
    return max(cfg.epsilon_floor, cfg.epsilon_start * cfg.epsilon_decay**episode)


class EpisodicEnv(Protocol):
    """What the trainer needs from an environment."""

    n_actions: int
    state_dim: int
    normalizer: qnet.InputNormalizer

    def begin_training_episode(self, rng: np.random.Generator) -> np.ndarray: ...

    def step(self, action: int) -> tuple[np.ndarray, float, bool, bool]:
        """Returns (next_obs, reward, terminal, truncated)."""
        ...


class DrEnv:
    """Adapts a household episode to the trainer protocol.

    Each training episode replays one uniformly sampled day from ``days``.
    Terminal at slot 95 (episodes are independent days, no bootstrap).
    """

    def __init__(
        self,
        household: Household,
        days: list[int],
        reward_spec: RewardSpec,
        price: PriceModel | None = None,
        baselines: np.ndarray | None = None,
    ):
        if not days:
            raise ValueError("day range must be non-empty")
        self.n_actions = N_ACTIONS
        self.state_dim = STATE_DIM
        self.days = list(days)
        price = price or PriceModel()
        self.normalizer = qnet.InputNormalizer.for_household(household, price.maximum)
        self.engine = EpisodeEngine(household, reward_spec, price, baselines)
        self.engine.compute_features = False  # training consumes rewards only
        self._state = None

    def begin_training_episode(self, rng: np.random.Generator) -> np.ndarray:
        day = self.days[rng.integers(len(self.days))]
        return self.begin_episode(day)

    def begin_episode(self, day: int) -> np.ndarray:
        self._state = self.engine.begin(day)
        return self._state.vector()

    def step(self, action: int) -> tuple[np.ndarray, float, bool, bool]:
        _, _, _, reward, next_state = self.engine.step(action)
        self._state = next_state
        terminal = next_state is None
        obs = np.zeros(self.state_dim) if terminal else next_state.vector()
        return obs, reward, terminal, False


@dataclass
class TrainResult:
    policy: GreedyPolicy
    net: qnet.Mlp
    episode_rewards: list[float] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)


def train(env: EpisodicEnv, cfg: TrainConfig, max_steps_per_episode: int = 100_000) -> TrainResult:
    """Plain DQN: one minibatch TD update per environment step once the
    buffer holds a batch, soft target blend after every update."""
    seq = np.random.SeedSequence(cfg.seed)
    rng_net, rng_env, rng_explore, rng_buffer = (
        np.random.default_rng(s) for s in seq.spawn(4)
    )
    sizes = (env.state_dim, 32, 32, env.n_actions)
    online = qnet.Mlp(sizes, rng_net)
    target = online.copy()
    opt = qnet.Adam(learning_rate=cfg.learning_rate)
    buffer = ReplayBuffer(cfg.buffer_capacity, env.state_dim)
    norm = env.normalizer
    result = TrainResult(policy=GreedyPolicy(online, norm, env.n_actions), net=online)

    for episode in range(cfg.episodes):
        eps = epsilon_at(cfg, episode)
        obs = norm(env.begin_training_episode(rng_env))
        ep_reward = 0.0
        for _ in range(max_steps_per_episode):
            if rng_explore.random() < eps:
                action = int(rng_explore.integers(env.n_actions))
            else:
                action = int(np.argmax(online.forward(obs)))
            raw_next, reward, terminal, truncated = env.step(action)
            next_obs = norm(raw_next)
            buffer.push(obs, action, reward, next_obs, terminal)
            ep_reward += reward

            if len(buffer) >= cfg.batch_size:
                s, a, r, s2, term = buffer.sample(cfg.batch_size, rng_buffer)
                q_next = target.forward(s2).max(axis=1)
                td = r + cfg.gamma * q_next * ~term
                grads = qnet.backward_batch(online, s, a, td)
                opt.step_flat(online.flat_params, np.concatenate([g.ravel() for g in grads]))
                qnet.soft_update(target, online, cfg.tau)

            obs = next_obs
            if terminal or truncated:
                break
        result.episode_rewards.append(ep_reward)
        result.epsilons.append(eps)
    return result


def train_dr(
    household: Household,
    days: list[int],
    reward_spec: RewardSpec,
    cfg: TrainConfig,
    price: PriceModel | None = None,
    baselines: np.ndarray | None = None,
) -> TrainResult:
    env = DrEnv(household, days, reward_spec, price, baselines)
    return train(env, cfg)


def rollout(env: EpisodicEnv, policy: Policy, max_steps: int = 100_000):
    """Greedy rollout on a trainer-protocol env; returns (obs, action, reward) triples."""
    obs = env.begin_training_episode(np.random.default_rng(0))
    steps = []
    for _ in range(max_steps):
        action = policy.act(obs)
        next_obs, reward, terminal, truncated = env.step(action)
        steps.append((obs, action, reward))
        obs = next_obs
        if terminal or truncated:
            break
    return steps


def evaluate_policy(
    policy: Policy,
    household: Household,
    days: list[int],
    reward_spec: RewardSpec,
    price: PriceModel | None = None,
    baselines: np.ndarray | None = None,
) -> tuple[list[Trajectory], float]:
    """Pure greedy rollouts; returns trajectories and the mean episode reward."""
    engine = EpisodeEngine(household, reward_spec, price, baselines)
    trajectories = [
        env_mod.run_episode(household, day, policy, reward_spec, engine=engine) for day in days
    ]
    mean_reward = float(np.mean([t.rewards().sum() for t in trajectories]))
    return trajectories, mean_reward
