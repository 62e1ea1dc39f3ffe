"""Exact linear-programming IRL for small finite MDPs with known transition
matrices, plus the value-iteration utilities used to certify experts.

This is the validation oracle for the whole IRL idea: given an expert policy
a1 and the dynamics, recover a reward R maximizing the margin by which a1
beats the best alternative action in every state, minus an L1 penalty, under
the feasibility inequality

    (P_a1 - P_a) (I - gamma P_a1)^-1 R >= 0   for every a != a1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linprog

_ROW_SUM_TOL = 1e-12


@dataclass
class FiniteMdp:
    """Tabular MDP: transitions[a, s, s'] row-stochastic, state reward R(s)
    external, deterministic expert policy per state."""

    transitions: np.ndarray
    gamma: float
    expert_policy: np.ndarray

    def __post_init__(self) -> None:
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.expert_policy = np.asarray(self.expert_policy, dtype=int)
        if self.transitions.ndim != 3 or self.transitions.shape[1] != self.transitions.shape[2]:
            raise ValueError("transitions must have shape (A, N, N)")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        sums = self.transitions.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if self.expert_policy.shape != (self.n_states,):
            raise ValueError("expert policy must assign one action per state")
        if np.any(self.expert_policy < 0) or np.any(self.expert_policy >= self.n_actions):
            raise ValueError("expert policy actions out of range")

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    def policy_matrix(self) -> np.ndarray:
        """P_a1: row s follows the expert action at s."""
        idx = np.arange(self.n_states)
        return self.transitions[self.expert_policy, idx, :]

    def to_json(self) -> str:
        payload = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.gamma,
            "transitions": [p.flatten().tolist() for p in self.transitions],
            "expert_policy": self.expert_policy.tolist(),
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FiniteMdp":
        payload = json.loads(text)
        n = payload["n_states"]
        transitions = np.array(
            [np.array(rows, dtype=float).reshape(n, n) for rows in payload["transitions"]]
        )
        return cls(transitions, payload["gamma"], np.array(payload["expert_policy"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FiniteMdp":
        return cls.from_json(Path(path).read_text())


def policy_value(m: FiniteMdp, reward: np.ndarray) -> np.ndarray:
    """V = (I - gamma P_a1)^-1 R (exact policy evaluation)."""
    reward = np.asarray(reward, dtype=float)
    system = np.eye(m.n_states) - m.gamma * m.policy_matrix()
    return np.linalg.solve(system, reward)


def feasibility_residual(m: FiniteMdp, reward: np.ndarray, action: int) -> np.ndarray:
    """(P_a1 - P_a)(I - gamma P_a1)^-1 R; >= 0 wherever a1 beats ``action``."""
    v = policy_value(m, reward)
    return (m.policy_matrix() - m.transitions[action]) @ v


def value_iteration(
    m: FiniteMdp, reward: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000
) -> tuple[np.ndarray, np.ndarray]:
    """Returns (V*, Q*) for the state-based reward."""
    reward = np.asarray(reward, dtype=float)
    v = np.zeros(m.n_states)
    for _ in range(max_iter):
        q = reward[:, None] + m.gamma * (m.transitions @ v).T
        new_v = q.max(axis=1)
        if np.max(np.abs(new_v - v)) < tol:
            v = new_v
            break
        v = new_v
    q = reward[:, None] + m.gamma * (m.transitions @ v).T
    return v, q


def greedy_policy(q: np.ndarray) -> np.ndarray:
    return np.argmax(q, axis=1)


def uniquely_optimal_states(q: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Boolean mask of states whose best action beats all others by > tol."""
    order = np.sort(q, axis=1)
    return order[:, -1] - order[:, -2] > tol


@dataclass(frozen=True)
class ExactIrlConfig:
    l1_weight: float = 1.0
    r_max: float = 1.0

    def __post_init__(self) -> None:
        if self.l1_weight < 0:
            raise ValueError("l1 penalty weight must be >= 0")
        if self.r_max <= 0:
            raise ValueError("r_max must be > 0")


def recover_reward(m: FiniteMdp, cfg: ExactIrlConfig) -> np.ndarray:
    """Solve the exact-IRL LP.

    Variables are [R (N), u (N), t (N)]: u_i is the min over alternative
    actions of the state-i margin row, t_i majorizes |R_i| for the L1 term.
    Maximizes sum(u) - l1_weight * sum(t).
    """
    n = m.n_states
    f = np.linalg.inv(np.eye(n) - m.gamma * m.policy_matrix())
    p_expert = m.policy_matrix()

    rows = []
    rhs = []

    def block(r_part: np.ndarray, u_part: np.ndarray, t_part: np.ndarray) -> np.ndarray:
        return np.hstack([r_part, u_part, t_part])

    for action in range(m.n_actions):
        mask = m.expert_policy != action
        if not mask.any():
            continue
        delta = (p_expert - m.transitions[action]) @ f
        sel = delta[mask]
        n_sel = sel.shape[0]
        u_rows = np.zeros((n_sel, n))
        u_rows[np.arange(n_sel), np.where(mask)[0]] = 1.0
        # u_i <= margin row  and  margin row >= 0 (feasibility of the expert)
        rows.append(block(-sel, u_rows, np.zeros((n_sel, n))))
        rhs.extend([0.0] * n_sel)
        rows.append(block(-sel, np.zeros((n_sel, n)), np.zeros((n_sel, n))))
        rhs.extend([0.0] * n_sel)

    eye = np.eye(n)
    rows.append(block(eye, np.zeros((n, n)), -eye))  # R_i - t_i <= 0
    rhs.extend([0.0] * n)
    rows.append(block(-eye, np.zeros((n, n)), -eye))  # -R_i - t_i <= 0
    rhs.extend([0.0] * n)

    objective = np.concatenate([np.zeros(n), np.ones(n), -cfg.l1_weight * np.ones(n)])
    lower = np.concatenate([-cfg.r_max * np.ones(n), np.full(n, -np.inf), np.zeros(n)])
    upper = np.concatenate([cfg.r_max * np.ones(n), np.full(n, np.inf), cfg.r_max * np.ones(n)])
    problem = linprog.box_problem(objective, np.vstack(rows), np.array(rhs), lower, upper)
    solution = linprog.solve(problem)
    if solution.status is not linprog.LpStatus.OPTIMAL:
        raise RuntimeError(f"exact IRL LP unexpectedly {solution.status.value} (R=0 is feasible)")
    return solution.x[:n]


def policy_agreement(m: FiniteMdp, recovered: np.ndarray, true_reward: np.ndarray) -> float:
    """Fraction of uniquely-optimal states (under the true reward) where the
    greedy policy of the recovered reward matches the expert."""
    _, q_true = value_iteration(m, true_reward)
    mask = uniquely_optimal_states(q_true)
    if not mask.any():
        return 1.0
    _, q_rec = value_iteration(m, recovered)
    greedy = greedy_policy(q_rec)
    return float(np.mean(greedy[mask] == m.expert_policy[mask]))


def make_gridworld(
    size: int = 5,
    goal: tuple[int, int] | None = None,
    gamma: float = 0.9,
    goal_reward: float = 1.0,
) -> tuple[FiniteMdp, np.ndarray]:
    """Deterministic gridworld with an absorbing goal.

    Actions are up/down/left/right; off-grid moves stay in place; the goal
    self-loops under every action.  The expert is the value-iteration greedy
    policy for the true reward (goal_reward at the goal, 0 elsewhere).
    Returns (mdp with certified expert, true reward vector).
    """
    if goal is None:
        goal = (size - 1, size - 1)
    n = size * size
    goal_state = goal[0] * size + goal[1]
    moves = ((-1, 0), (1, 0), (0, -1), (0, 1))
    transitions = np.zeros((4, n, n))
    for r in range(size):
        for c in range(size):
            s = r * size + c
            for a, (dr, dc) in enumerate(moves):
                if s == goal_state:
                    transitions[a, s, s] = 1.0
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < size and 0 <= nc < size):
                    nr, nc = r, c
                transitions[a, s, nr * size + nc] = 1.0
    reward = np.zeros(n)
    reward[goal_state] = goal_reward

    placeholder = FiniteMdp(transitions, gamma, np.zeros(n, dtype=int))
    _, q = value_iteration(placeholder, reward)
    expert = greedy_policy(q)
    return FiniteMdp(transitions, gamma, expert), reward
