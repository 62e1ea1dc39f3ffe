"""The demand-response MDP.

One episode is a single day of 96 fifteen-minute slots.  The agent observes
an 8-component state (power-curtailable demand, non-shiftable demand, four
open time-shiftable delays, the flexibility price and the baseline) and picks
one of 11 curtailment levels; the level fixes a target total consumption of
level/10 times the slot's counterfactual demand, which a deterministic
dispatch rule distributes over the individual appliances.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import rewards
from .domain import (
    NS_APPLIANCE,
    PC_APPLIANCE,
    SLOTS_PER_DAY,
    SLOTS_PER_HOUR,
    TS_APPLIANCES,
    Household,
    SlotIndex,
)

N_ACTIONS = 11
STATE_DIM = 8
BASELINE_WINDOW_DAYS = 10

# Headroom slack when deciding whether a time-shiftable start fits the target.
_FIT_EPS = 1e-9


class TsDecision(Enum):
    DEFERRED = "deferred"
    STARTED = "started"
    # Kept for the schedule-grid encoding (-1 cells); the greedy priority
    # dispatch never starts an appliance ahead of its request.
    FORCED_START = "forced_start"


@dataclass(frozen=True)
class EnvState:
    """Observation at one slot; the vector layout is fixed and documented."""

    pc_demand: float
    ns_demand: float
    ts_delays: tuple[int, int, int, int]
    price: float
    baseline: float

    def vector(self) -> np.ndarray:
        return np.array(
            [self.pc_demand, self.ns_demand, *self.ts_delays, self.price, self.baseline]
        )


@dataclass(frozen=True)
class Dispatch:
    """Realized per-appliance consumption at one slot plus the TS decisions."""

    consumption: dict[str, float]
    ts_decisions: dict[str, TsDecision]
    pc_realized: float
    realized_total: float


@dataclass(frozen=True)
class TrajectoryStep:
    state: EnvState
    action: int
    dispatch: Dispatch
    features: np.ndarray
    reward: float


@dataclass
class Trajectory:
    household_id: str
    day: int
    steps: list[TrajectoryStep]

    def feature_matrix(self) -> np.ndarray:
        return np.stack([s.features for s in self.steps])

    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps])


@dataclass(frozen=True)
class Request:
    """A time-shiftable run extracted from the counterfactual series."""

    appliance: str
    slot: int
    profile: tuple[float, ...]


class PriceModel:
    """Flexibility price per slot: constant or a repeating daily profile."""

    def __init__(self, constant: float | None = 0.1, profile: np.ndarray | None = None):
        if (constant is None) == (profile is None):
            raise ValueError("provide exactly one of constant or profile")
        if profile is not None:
            profile = np.asarray(profile, dtype=float)
            if profile.shape != (SLOTS_PER_DAY,):
                raise ValueError(f"price profile must have {SLOTS_PER_DAY} values")
            if np.any(profile < 0):
                raise ValueError("prices must be >= 0")
        elif constant < 0:
            raise ValueError("prices must be >= 0")
        self._constant = constant
        self._profile = profile

    @property
    def maximum(self) -> float:
        return float(self._constant if self._profile is None else self._profile.max())

    def at(self, slot: int) -> float:
        if self._profile is None:
            return self._constant
        return float(self._profile[slot])


def baseline_series(h: Household) -> np.ndarray:
    """Per-(day, slot) baseline demand in kW.

    The baseline for an hour is the mean counterfactual consumption in that
    hour over the previous 10 days (fewer while the history is shorter),
    broadcast to the hour's four slots.  Day 0 falls back to the current
    slot's counterfactual total.  Only the no-DR counterfactual feeds this,
    so providing demand response never erodes the baseline.
    """
    totals = h.total_series().reshape(h.n_days, SLOTS_PER_DAY)
    hourly = totals.reshape(h.n_days, 24, SLOTS_PER_HOUR).mean(axis=2)
    out = np.empty_like(totals)
    out[0] = totals[0]
    for d in range(1, h.n_days):
        lo = max(0, d - BASELINE_WINDOW_DAYS)
        hourly_baseline = hourly[lo:d].mean(axis=0)
        out[d] = np.repeat(hourly_baseline, SLOTS_PER_HOUR)
    return out


def baseline(h: Household, t: SlotIndex, series: np.ndarray | None = None) -> float:
    if series is None:
        series = baseline_series(h)
    if t.day >= h.n_days:
        raise IndexError(f"day {t.day} outside household range")
    return float(series[t.day, t.slot])


def extract_requests(h: Household, day: int) -> dict[str, list[Request]]:
    """Per-appliance time-shiftable requests for one day.

    A request is raised at the first slot of each contiguous positive-demand
    run of the appliance within the day; the run's demand values form its
    profile.  Open requests never cross midnight.
    """
    out: dict[str, list[Request]] = {}
    for name in TS_APPLIANCES:
        if name not in h.demand:
            out[name] = []
            continue
        series = h.day_series(name, day)
        requests = []
        start = None
        for slot in range(SLOTS_PER_DAY + 1):
            positive = slot < SLOTS_PER_DAY and series[slot] > 0
            if positive and start is None:
                start = slot
            elif not positive and start is not None:
                profile = tuple(float(v) for v in series[start:slot])
                requests.append(Request(name, start, profile))
                start = None
        out[name] = requests
    return out


@dataclass
class _TsBook:
    """Per-appliance request bookkeeping inside one episode."""

    queue: list[Request]
    opened_at: int | None = None  # slot the front request became open
    open_request: Request | None = None
    committed: tuple[float, ...] = ()  # remaining profile of a running appliance
    committed_pos: int = 0

    def running_draw(self) -> float:
        if self.committed_pos < len(self.committed):
            return self.committed[self.committed_pos]
        return 0.0


def dispatch_slot(
    target: float,
    ns_demand: float,
    pc_demand: float,
    committed_draws: dict[str, float],
    open_requests: list[tuple[int, str, int, tuple[float, ...]]],
    spec: rewards.RewardSpec,
) -> tuple[dict[str, float], dict[str, TsDecision], float]:
    """Distribute a target total consumption over the appliances.

    Deterministic priority rule: (1) non-shiftable demand and committed
    time-shiftable runs are served unconditionally, (2) remaining headroom
    starts open requests, most-costly-to-defer first under the active reward
    spec (ties by appliance order), (3) leftovers go to the curtailable
    appliance, (4) if the unconditional part alone exceeds the target the
    realized total exceeds the target.

    ``open_requests`` entries are (ts_index, name, current_delay, profile).
    Returns (per-appliance ts/ns consumption, TS decisions, pc_realized).
    """
    if target < 0:
        raise ValueError("target must be >= 0")
    consumption = dict(committed_draws)
    unconditional = ns_demand + sum(committed_draws.values())
    headroom = max(0.0, target - unconditional)

    decisions: dict[str, TsDecision] = {}
    order = sorted(
        open_requests,
        key=lambda item: (-spec.defer_penalty(item[0], item[2] + 1), item[0]),
    )
    for _, name, _, profile in order:
        first = profile[0]
        if first <= headroom + _FIT_EPS:
            decisions[name] = TsDecision.STARTED
            consumption[name] = consumption.get(name, 0.0) + first
            headroom -= first
        else:
            decisions[name] = TsDecision.DEFERRED

    pc_realized = min(pc_demand, headroom)
    return consumption, decisions, pc_realized


class EpisodeEngine:
    """Steps one household through one day under an active reward spec.

    The reward spec shapes both the recorded rewards and the dispatch
    tie-breaking, so policies should be rolled out under the spec they were
    trained with (a neutral all-zero spec falls back to appliance order).
    """

    def __init__(
        self,
        household: Household,
        reward_spec: rewards.RewardSpec,
        price: PriceModel | None = None,
        baselines: np.ndarray | None = None,
    ):
        self.household = household
        self.spec = reward_spec
        self.price = price or PriceModel()
        self.baselines = baselines if baselines is not None else baseline_series(household)
        self._ns = household.demand[NS_APPLIANCE]
        self._pc = household.demand[PC_APPLIANCE]
        self._ts = [household.demand[name] for name in TS_APPLIANCES]
        self._requests_cache: dict[int, dict[str, list[Request]]] = {}
        self.day = -1
        self.t = SLOTS_PER_DAY
        self._books: list[_TsBook] = []
        self._current: EnvState | None = None
        # Feature evaluation is skipped for specs that ignore it (training
        # under the true reward) unless a recorder asks for it.
        self.compute_features = True

    def clone(self) -> "EpisodeEngine":
        """Snapshot of the mid-episode bookkeeping (for replay checks)."""
        twin = EpisodeEngine.__new__(EpisodeEngine)
        twin.__dict__.update(self.__dict__)
        twin._books = copy.deepcopy(self._books)
        return twin

    def begin(self, day: int) -> EnvState:
        if not 0 <= day < self.household.n_days:
            raise IndexError(f"day {day} outside household range")
        if day not in self._requests_cache:
            self._requests_cache[day] = extract_requests(self.household, day)
        per_app = self._requests_cache[day]
        self.day = day
        self.t = 0
        self._books = [_TsBook(queue=list(per_app[name])) for name in TS_APPLIANCES]
        self._open_requests()
        self._current = self._state()
        return self._current

    @property
    def done(self) -> bool:
        return self.t >= SLOTS_PER_DAY

    def _open_requests(self) -> None:
        # A request opens when its slot has arrived and the appliance is idle;
        # a busy appliance keeps later requests queued without delay accrual.
        for book in self._books:
            if book.open_request is None and book.committed_pos >= len(book.committed):
                if book.queue and book.queue[0].slot <= self.t:
                    book.open_request = book.queue.pop(0)
                    book.opened_at = self.t

    def _state(self) -> EnvState:
        flat = self.day * SLOTS_PER_DAY + self.t
        delays = tuple(
            self.t - b.opened_at if b.open_request is not None else 0 for b in self._books
        )
        return EnvState(
            pc_demand=float(self._pc[flat]),
            ns_demand=float(self._ns[flat]),
            ts_delays=delays,
            price=self.price.at(self.t),
            baseline=float(self.baselines[self.day, self.t]),
        )

    def step(self, action: int) -> tuple[EnvState, Dispatch, np.ndarray, float, EnvState | None]:
        """Apply one action; returns (state, dispatch, features, reward, next_state)."""
        if self.done:
            raise RuntimeError("episode is finished; call begin() first")
        if not isinstance(action, (int, np.integer)) or not 0 <= action < N_ACTIONS:
            raise ValueError(f"action must be an integer level in 0..{N_ACTIONS - 1}, got {action!r}")

        state = self._current
        flat = self.day * SLOTS_PER_DAY + self.t
        total = self._ns[flat] + self._pc[flat] + sum(ts[flat] for ts in self._ts)
        target = (action / (N_ACTIONS - 1)) * float(total)

        committed = {
            name: book.running_draw()
            for name, book in zip(TS_APPLIANCES, self._books)
            if book.running_draw() > 0
        }
        open_reqs = [
            (i, TS_APPLIANCES[i], self.t - book.opened_at, book.open_request.profile)
            for i, book in enumerate(self._books)
            if book.open_request is not None
        ]
        ts_cons, decisions, pc_realized = dispatch_slot(
            target, state.ns_demand, state.pc_demand, committed, open_reqs, self.spec
        )

        consumption = {name: 0.0 for name in self.household.demand}
        consumption.update(ts_cons)
        consumption[PC_APPLIANCE] = pc_realized
        consumption[NS_APPLIANCE] = state.ns_demand
        realized_total = state.ns_demand + pc_realized + sum(ts_cons.values())
        dispatch = Dispatch(consumption, decisions, pc_realized, realized_total)

        needs_phi = self.compute_features or isinstance(self.spec, rewards.LearnedReward)
        phi = rewards.features(state, dispatch) if needs_phi else None
        reward = self.spec.reward(state, dispatch, phi)

        # Advance the bookkeeping.
        for name, book in zip(TS_APPLIANCES, self._books):
            if decisions.get(name) is TsDecision.STARTED:
                book.committed = book.open_request.profile
                book.committed_pos = 1  # first profile slot consumed now
                book.open_request = None
                book.opened_at = None
            elif book.committed_pos < len(book.committed):
                book.committed_pos += 1
        self.t += 1
        if not self.done:
            self._open_requests()
            next_state = self._state()
        else:
            next_state = None
        self._current = next_state
        return state, dispatch, phi, reward, next_state


def run_episode(
    household: Household,
    day: int,
    policy,
    reward_spec: rewards.RewardSpec,
    price: PriceModel | None = None,
    baselines: np.ndarray | None = None,
    engine: EpisodeEngine | None = None,
) -> Trajectory:
    """Roll one full day under ``policy`` (an object with act(obs) -> level)."""
    if engine is None:
        engine = EpisodeEngine(household, reward_spec, price, baselines)
    state = engine.begin(day)
    begin_episode = getattr(policy, "begin_episode", None)
    if begin_episode is not None:
        begin_episode(day)
    steps = []
    while not engine.done:
        action = policy.act(state.vector())
        state, dispatch, phi, reward, next_state = engine.step(action)
        steps.append(TrajectoryStep(state, int(action), dispatch, phi, reward))
        state = next_state
    return Trajectory(household.household_id, day, steps)


def provision(baseline_kw: float, realized_kw: float, eps: float = 1e-9) -> float:
    """Normalized DR provision at one slot, clipped to [-1, 1]."""
    value = (baseline_kw - realized_kw) / max(baseline_kw, eps)
    return float(np.clip(value, -1.0, 1.0))


def provision_series(trajectory: Trajectory) -> np.ndarray:
    return np.array(
        [provision(s.state.baseline, s.dispatch.realized_total) for s in trajectory.steps]
    )
