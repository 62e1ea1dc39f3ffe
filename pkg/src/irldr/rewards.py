"""Reward machinery: the configurable true reward, the six fixed basis
functions, and linear learned rewards over them.

Every basis combines a revenue form with a discomfort form:

    index = 3 * revenue_mode + discomfort_mode

    0  reduction-only revenue, no discomfort
    1  reduction-only revenue, absolute discomfort
    2  reduction-only revenue, quadratic discomfort
    3  bidirectional revenue,  no discomfort
    4  bidirectional revenue,  absolute discomfort
    5  bidirectional revenue,  quadratic discomfort

Revenue is price * max(0, baseline - realized) in reduction-only form and
price * (baseline - realized) in bidirectional form.  Discomfort inside the
basis functions uses unit weights on *normalized* deviations (AC curtailment
divided by the requested AC demand, delays divided by 96 slots) so the six
components share a comparable scale and the |alpha| <= 1 box on learned
coefficients is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .domain import SLOTS_PER_DAY, TS_APPLIANCES

BASIS_COUNT = 6


class RevenueMode(IntEnum):
    REDUCTION_ONLY = 0
    BIDIRECTIONAL = 1


class DiscomfortMode(IntEnum):
    NONE = 0
    ABSOLUTE = 1
    QUADRATIC = 2


BASIS_MODES: tuple[tuple[RevenueMode, DiscomfortMode], ...] = tuple(
    (rev, disc) for rev in RevenueMode for disc in DiscomfortMode
)


def basis_index(revenue: RevenueMode, discomfort: DiscomfortMode) -> int:
    return 3 * int(revenue) + int(discomfort)


def _deviations(state, dispatch) -> tuple[float, list[float]]:
    """Raw AC curtailment (kW) and per-appliance still-open delays (slots).

    A request started this slot contributes zero delay; a deferred one
    contributes its current counter.
    """
    ac_dev = state.pc_demand - dispatch.pc_realized
    delays = []
    for i, name in enumerate(TS_APPLIANCES):
        decision = dispatch.ts_decisions.get(name)
        open_and_unserved = decision is not None and decision.value == "deferred"
        delays.append(float(state.ts_delays[i]) if open_and_unserved else 0.0)
    return ac_dev, delays


def _discomfort(mode: DiscomfortMode, ac_dev_norm: float, delay_norms: list[float]) -> float:
    if mode is DiscomfortMode.NONE:
        return 0.0
    if mode is DiscomfortMode.ABSOLUTE:
        return abs(ac_dev_norm) + sum(abs(d) for d in delay_norms)
    return ac_dev_norm**2 + sum(d**2 for d in delay_norms)


def features(state, dispatch) -> np.ndarray:
    """Evaluate all six basis functions on one (state, dispatch) pair.

    Output ordering is fixed by ``BASIS_MODES`` (revenue-major)."""
    c = state.price
    gap = state.baseline - dispatch.realized_total
    rev_bi = c * gap
    rev_ro = rev_bi if gap > 0 else 0.0
    ac_dev, delays = _deviations(state, dispatch)
    ac_norm = ac_dev / state.pc_demand if state.pc_demand > 0 else 0.0
    d_abs = abs(ac_norm)
    d_quad = ac_norm * ac_norm
    for d in delays:
        dn = d / SLOTS_PER_DAY
        d_abs += dn
        d_quad += dn * dn
    return np.array(
        [rev_ro, rev_ro - d_abs, rev_ro - d_quad, rev_bi, rev_bi - d_abs, rev_bi - d_quad]
    )


@dataclass(frozen=True)
class TrueReward:
    """Generating reward: revenue minus weighted AC-deviation and TS-delay terms.

    With ``normalized_deviations`` the discomfort terms use the same
    normalized quantities as the basis functions, so unit weights make the
    reward coincide exactly with one basis function (the setup of the
    household-adaptability study).  The default is raw kW / slot deviations.
    """

    revenue_mode: RevenueMode = RevenueMode.REDUCTION_ONLY
    discomfort_mode: DiscomfortMode = DiscomfortMode.QUADRATIC
    w_ac: float = 1.0
    w_ts: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    normalized_deviations: bool = False

    def __post_init__(self) -> None:
        if self.w_ac < 0 or any(w < 0 for w in self.w_ts):
            raise ValueError("dissatisfaction weights must be >= 0")

    def reward(self, state, dispatch, phi: np.ndarray | None = None) -> float:
        c = state.price
        gap = state.baseline - dispatch.realized_total
        revenue = c * max(0.0, gap) if self.revenue_mode is RevenueMode.REDUCTION_ONLY else c * gap
        ac_dev, delays = _deviations(state, dispatch)
        if self.normalized_deviations:
            ac_dev = ac_dev / state.pc_demand if state.pc_demand > 0 else 0.0
            delays = [d / SLOTS_PER_DAY for d in delays]
        if self.discomfort_mode is DiscomfortMode.NONE:
            psi = 0.0
        elif self.discomfort_mode is DiscomfortMode.ABSOLUTE:
            psi = self.w_ac * abs(ac_dev) + sum(w * abs(d) for w, d in zip(self.w_ts, delays))
        else:
            psi = self.w_ac * ac_dev**2 + sum(w * d**2 for w, d in zip(self.w_ts, delays))
        return revenue - psi

    def defer_penalty(self, ts_index: int, delay_if_deferred: int) -> float:
        """Discomfort this spec would charge next slot if the request stays open."""
        d = float(delay_if_deferred)
        if self.normalized_deviations:
            d /= SLOTS_PER_DAY
        w = self.w_ts[ts_index]
        if self.discomfort_mode is DiscomfortMode.NONE:
            return 0.0
        if self.discomfort_mode is DiscomfortMode.ABSOLUTE:
            return w * d
        return w * d * d


@dataclass(frozen=True)
class LearnedReward:
    """Linear combination of the six basis functions, |alpha_i| <= 1."""

    alpha: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.alpha) != BASIS_COUNT:
            raise ValueError(f"alpha must have {BASIS_COUNT} components")
        if any(abs(a) > 1.0 + 1e-9 for a in self.alpha):
            raise ValueError("learned coefficients must satisfy |alpha_i| <= 1")

    def reward(self, state, dispatch, phi: np.ndarray | None = None) -> float:
        if phi is None:
            phi = features(state, dispatch)
        return learned_reward(phi, self)

    def defer_penalty(self, ts_index: int, delay_if_deferred: int) -> float:
        d = delay_if_deferred / SLOTS_PER_DAY
        penalty = 0.0
        for i, (_, disc) in enumerate(BASIS_MODES):
            if disc is DiscomfortMode.ABSOLUTE:
                penalty += self.alpha[i] * d
            elif disc is DiscomfortMode.QUADRATIC:
                penalty += self.alpha[i] * d * d
        return penalty


# Either reward flavour works as the environment's active spec; both expose
# reward(state, dispatch, phi) and defer_penalty(ts_index, delay).
RewardSpec = TrueReward | LearnedReward

NEUTRAL_REWARD = LearnedReward(alpha=(0.0,) * BASIS_COUNT)


def true_reward(state, dispatch, spec: TrueReward) -> float:
    return spec.reward(state, dispatch)


def learned_reward(phi: np.ndarray, spec: LearnedReward) -> float:
    return float(np.dot(np.asarray(spec.alpha), phi))
