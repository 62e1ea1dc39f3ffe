"""Reward recovery from trajectories: Monte-Carlo basis-value estimation,
LP optimization of the basis coefficients, and the iterative loop that grows
the comparison-policy set by retraining an agent on each candidate reward.

The coefficient LP maximizes sum_j p(m_j) over |alpha_i| <= 1 where
m_j = alpha . (Vhat_expert - Vhat_j) and p(x) = x for x >= 0 but 2x for
x < 0, so comparison policies that beat the expert under a candidate alpha
are penalized twice as hard as ordinary margins are rewarded.  Without the
two-slope penalty the box optimum degenerates to a sign vector independent
of the margin magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import agent as agent_mod
from . import linprog
from .agent import GreedyPolicy, Policy, RandomPolicy, TrainConfig
from .domain import Household
from .environment import (
    N_ACTIONS,
    EpisodeEngine,
    PriceModel,
    Trajectory,
    baseline_series,
    provision_series,
    run_episode,
)
from .metrics import mae
from .rewards import BASIS_COUNT, NEUTRAL_REWARD, LearnedReward, RewardSpec, TrueReward


class StopReason(Enum):
    MAX_ITERATIONS = "max_iterations"
    MARGIN_CONVERGED = "margin_converged"


@dataclass
class ExpertData:
    """The behaviour to explain: recorded trajectories (one per training
    day), optionally with the generating policy attached."""

    trajectories: dict[int, Trajectory]
    policy: Policy | None = None
    spec: RewardSpec | None = None
    trained: bool = True


@dataclass(frozen=True)
class IrlConfig:
    max_iterations: int = 10
    margin_tol: float = 1e-3
    gamma: float = 0.9
    iteration_episodes: int = 1500
    seed: int = 0
    batch_size: int = 32
    tau: float = 0.001
    epsilon_decay: float = 0.999
    epsilon_floor: float = 0.05
    learning_rate: float = 0.001
    buffer_capacity: int = 10_000

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            episodes=self.iteration_episodes,
            batch_size=self.batch_size,
            tau=self.tau,
            gamma=self.gamma,
            epsilon_decay=self.epsilon_decay,
            epsilon_floor=self.epsilon_floor,
            learning_rate=self.learning_rate,
            buffer_capacity=self.buffer_capacity,
            seed=seed,
        )


@dataclass
class IrlResult:
    """History of one reward-learning run.

    ``alpha_history[k]`` was optimized over the expert, the random seed
    policy and the first k retrained policies; entry k of ``margins_history``
    and ``min_margin_history`` belongs to it.  ``validation_mae_history[k]``
    scores the policy trained on ``alpha_history[k]``.  ``alpha`` is the
    entry selected by the smallest validation error (reward-free proxy),
    falling back to the last entry when nothing was trained.
    """

    alpha: tuple[float, ...]
    alpha_history: list[tuple[float, ...]] = field(default_factory=list)
    margins_history: list[list[float]] = field(default_factory=list)
    min_margin_history: list[float] = field(default_factory=list)
    maxmin_margin_history: list[float] = field(default_factory=list)
    validation_mae_history: list[float] = field(default_factory=list)
    stop_reason: StopReason = StopReason.MAX_ITERATIONS
    selected_iteration: int = 0
    policies: list[GreedyPolicy] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "alpha_history": [list(a) for a in self.alpha_history],
            "margins_history": self.margins_history,
            "min_margin_history": self.min_margin_history,
            "maxmin_margin_history": self.maxmin_margin_history,
            "validation_mae_history": self.validation_mae_history,
            "stop_reason": self.stop_reason.value,
            "selected_iteration": self.selected_iteration,
            "iterations_run": len(self.alpha_history),
        }


def discounted_feature_return(trajectory: Trajectory, gamma: float) -> np.ndarray:
    phi = trajectory.feature_matrix()
    weights = gamma ** np.arange(phi.shape[0])
    return weights @ phi


def estimate_values_from_trajectories(
    trajectories: list[Trajectory], gamma: float
) -> np.ndarray:
    """Mean discounted basis returns over the rollout days (Monte-Carlo
    estimate of the per-basis value at the episode start states)."""
    if not trajectories:
        raise ValueError("need at least one trajectory")
    return np.mean([discounted_feature_return(t, gamma) for t in trajectories], axis=0)


def estimate_values(
    policy: Policy,
    household: Household,
    days: list[int],
    gamma: float,
    dispatch_spec: RewardSpec | None = None,
    price: PriceModel | None = None,
    baselines: np.ndarray | None = None,
) -> np.ndarray:
    """Roll the policy greedily over each day and average the discounted
    basis returns.  Rollouts run under the spec the policy was trained with
    (neutral dispatch tie-breaking when none is given)."""
    if not days:
        raise ValueError("day set must be non-empty")
    spec = dispatch_spec if dispatch_spec is not None else NEUTRAL_REWARD
    engine = EpisodeEngine(household, spec, price, baselines)
    trajectories = [
        run_episode(household, day, policy, spec, engine=engine) for day in days
    ]
    return estimate_values_from_trajectories(trajectories, gamma)


def optimize_alpha(
    v_expert: np.ndarray, v_policies: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Maximize sum_j p(m_j(alpha)) subject to |alpha_i| <= 1.

    Compiled to an LP with one auxiliary variable z_j per comparison policy:
    z_j <= m_j and z_j <= 2 m_j force z_j = p(m_j) at the optimum.  Returns
    (alpha, margins m_j, objective value).
    """
    v_policies = np.atleast_2d(np.asarray(v_policies, dtype=float))
    gaps = np.asarray(v_expert, dtype=float)[None, :] - v_policies
    k, d = gaps.shape
    if d != BASIS_COUNT:
        raise ValueError(f"expected {BASIS_COUNT} basis values per policy")

    z_bound = float(2.0 * np.abs(gaps).sum(axis=1).max() + 1.0)
    objective = np.concatenate([np.zeros(d), np.ones(k)])
    rows = []
    for j in range(k):
        z_row = np.zeros(k)
        z_row[j] = 1.0
        rows.append(np.concatenate([-gaps[j], z_row]))
        rows.append(np.concatenate([-2.0 * gaps[j], z_row]))
    rhs = np.zeros(2 * k)
    lower = np.concatenate([-np.ones(d), -z_bound * np.ones(k)])
    upper = np.concatenate([np.ones(d), z_bound * np.ones(k)])
    problem = linprog.box_problem(objective, np.vstack(rows), rhs, lower, upper)
    solution = linprog.solve(problem)
    if solution.status is not linprog.LpStatus.OPTIMAL:
        raise RuntimeError(f"alpha LP unexpectedly {solution.status.value}")
    alpha = np.clip(solution.x[:d], -1.0, 1.0)
    margins = gaps @ alpha
    return alpha, margins, float(solution.objective_value)


def maxmin_margin(v_expert: np.ndarray, v_policies: np.ndarray) -> float:
    """Best-case worst margin of the expert over the comparison set; adding
    comparison policies can only drive this down."""
    v_policies = np.atleast_2d(np.asarray(v_policies, dtype=float))
    gaps = np.asarray(v_expert, dtype=float)[None, :] - v_policies
    k, d = gaps.shape
    bound = float(np.abs(gaps).sum(axis=1).max() + 1.0)
    objective = np.concatenate([np.zeros(d), [1.0]])
    rows = [np.concatenate([-gaps[j], [1.0]]) for j in range(k)]
    problem = linprog.box_problem(
        objective,
        np.vstack(rows),
        np.zeros(k),
        np.concatenate([-np.ones(d), [-bound]]),
        np.concatenate([np.ones(d), [bound]]),
    )
    solution = linprog.solve(problem)
    if solution.status is not linprog.LpStatus.OPTIMAL:
        raise RuntimeError(f"max-min margin LP unexpectedly {solution.status.value}")
    return float(solution.objective_value)


def simulate_expert(
    household: Household,
    days: list[int],
    true_reward: TrueReward,
    episodes: int,
    price: PriceModel | None = None,
    seed: int = 0,
    cfg: IrlConfig | None = None,
    baselines: np.ndarray | None = None,
) -> tuple[ExpertData, agent_mod.TrainResult]:
    """Train a deep-Q expert under the true reward and record its greedy
    trajectories; the stand-in for real DR consumption data.  With
    episodes=0 the untrained network is returned and flagged."""
    cfg = cfg or IrlConfig()
    train_cfg = TrainConfig(
        episodes=episodes,
        batch_size=cfg.batch_size,
        gamma=cfg.gamma,
        tau=cfg.tau,
        epsilon_decay=cfg.epsilon_decay,
        epsilon_floor=cfg.epsilon_floor,
        learning_rate=cfg.learning_rate,
        buffer_capacity=cfg.buffer_capacity,
        seed=seed,
    )
    if baselines is None:
        baselines = baseline_series(household)
    result = agent_mod.train_dr(household, days, true_reward, train_cfg, price, baselines)
    engine = EpisodeEngine(household, true_reward, price, baselines)
    trajectories = {
        day: run_episode(household, day, result.policy, true_reward, engine=engine)
        for day in days
    }
    expert = ExpertData(
        trajectories=trajectories,
        policy=result.policy,
        spec=true_reward,
        trained=episodes > 0,
    )
    return expert, result


def run_irl(
    expert: ExpertData,
    household: Household,
    days: list[int],
    cfg: IrlConfig | None = None,
    price: PriceModel | None = None,
    baselines: np.ndarray | None = None,
) -> IrlResult:
    """The iterative loop: estimate basis values for every policy, optimize
    alpha, train a fresh agent against the candidate reward, grow the
    comparison set; stop at the iteration cap or when the minimum margin
    stalls.  The returned alpha is the one whose trained policy best matches
    the expert's provision on a held-out training day.
    """
    cfg = cfg or IrlConfig()
    if not days:
        raise ValueError("day set must be non-empty")
    missing = [d for d in days if d not in expert.trajectories]
    if missing:
        raise ValueError(f"expert trajectories missing for days {missing}")
    if baselines is None:
        baselines = baseline_series(household)

    # Last training day is held out for iteration selection when possible.
    rollout_days = days[:-1] if len(days) > 1 else list(days)
    validation_day = days[-1]
    expert_val_provision = provision_series(expert.trajectories[validation_day])

    seq = np.random.SeedSequence(cfg.seed)
    train_seeds = [int(s.generate_state(1)[0]) for s in seq.spawn(cfg.max_iterations + 1)]

    v_expert = estimate_values_from_trajectories(
        [expert.trajectories[d] for d in rollout_days], cfg.gamma
    )
    random_policy = RandomPolicy(N_ACTIONS, seed=train_seeds[0])
    v_policies = [
        estimate_values(
            random_policy, household, rollout_days, cfg.gamma, None, price, baselines
        )
    ]

    result = IrlResult(alpha=(0.0,) * BASIS_COUNT)
    for k in range(cfg.max_iterations + 1):
        alpha, margins, _ = optimize_alpha(v_expert, np.array(v_policies))
        result.alpha_history.append(tuple(float(a) for a in alpha))
        result.margins_history.append([float(v) for v in margins])
        result.min_margin_history.append(float(margins.min()))
        result.maxmin_margin_history.append(maxmin_margin(v_expert, np.array(v_policies)))

        if k == cfg.max_iterations:
            result.stop_reason = StopReason.MAX_ITERATIONS
            break
        if np.max(np.abs(margins)) < cfg.margin_tol:
            # Nothing separates the expert from the comparisons; stop early.
            result.stop_reason = StopReason.MARGIN_CONVERGED
            break
        if (
            len(result.min_margin_history) >= 2
            and abs(result.min_margin_history[-1] - result.min_margin_history[-2])
            < cfg.margin_tol
        ):
            result.stop_reason = StopReason.MARGIN_CONVERGED
            break

        candidate = LearnedReward(alpha=tuple(float(a) for a in alpha))
        train_result = agent_mod.train_dr(
            household,
            rollout_days,
            candidate,
            cfg.train_config(train_seeds[k + 1]),
            price,
            baselines,
        )
        policy = train_result.policy
        result.policies.append(policy)
        v_policies.append(
            estimate_values(
                policy, household, rollout_days, cfg.gamma, candidate, price, baselines
            )
        )
        val_traj = run_episode(
            household,
            validation_day,
            policy,
            candidate,
            engine=EpisodeEngine(household, candidate, price, baselines),
        )
        result.validation_mae_history.append(
            mae(expert_val_provision, provision_series(val_traj))
        )

    if result.validation_mae_history:
        result.selected_iteration = int(np.argmin(result.validation_mae_history))
    else:
        result.selected_iteration = len(result.alpha_history) - 1
    result.alpha = result.alpha_history[result.selected_iteration]
    return result
