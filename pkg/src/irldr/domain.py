"""Appliance and household data model shared by every other module."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from enum import Enum

import numpy as np

SLOTS_PER_DAY = 96
SLOTS_PER_HOUR = 4


class ApplianceClass(Enum):
    TIME_SHIFTABLE = "time_shiftable"
    POWER_CURTAILABLE = "power_curtailable"
    NON_SHIFTABLE = "non_shiftable"


# Canonical inventory. The observation layout, checkpoint formats and the
# synthetic generator all rely on this ordering; households missing an
# appliance carry a zero-filled series so the width stays fixed.
TS_APPLIANCES = ("ev", "washing_machine", "dishwasher", "dryer")
PC_APPLIANCE = "ac"
NS_APPLIANCE = "base"
CANONICAL_APPLIANCES = TS_APPLIANCES + (PC_APPLIANCE, NS_APPLIANCE)

CLASS_BY_CANONICAL_NAME = {
    **{name: ApplianceClass.TIME_SHIFTABLE for name in TS_APPLIANCES},
    PC_APPLIANCE: ApplianceClass.POWER_CURTAILABLE,
    NS_APPLIANCE: ApplianceClass.NON_SHIFTABLE,
}


@dataclass(frozen=True)
class Appliance:
    name: str
    appliance_class: ApplianceClass


@dataclass(frozen=True)
class SlotIndex:
    """One 15-minute step: (day ordinal, slot 0..95)."""

    day: int
    slot: int

    def __post_init__(self) -> None:
        if not 0 <= self.slot < SLOTS_PER_DAY:
            raise ValueError(f"slot must be in [0, {SLOTS_PER_DAY}), got {self.slot}")
        if self.day < 0:
            raise ValueError(f"day must be non-negative, got {self.day}")

    @property
    def hour(self) -> int:
        return self.slot // SLOTS_PER_HOUR

    @property
    def flat(self) -> int:
        return self.day * SLOTS_PER_DAY + self.slot


@dataclass
class Household:
    """Per-appliance counterfactual (no-DR) demand at 15-minute resolution.

    ``demand`` maps appliance name to a flat kW series covering whole days.
    ``day_dates`` optionally attaches a calendar date to each day ordinal
    (needed by the train/test split; days need not be contiguous because
    loaders may drop damaged days).
    """

    household_id: str
    appliances: tuple[Appliance, ...]
    demand: dict[str, np.ndarray]
    day_dates: tuple[date, ...] | None = None
    _total: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        names = [a.name for a in self.appliances]
        if len(set(names)) != len(names):
            raise ValueError("duplicate appliance names")
        if set(self.demand) != set(names):
            raise ValueError("demand keys must match the appliance inventory exactly")
        n_ts = sum(a.appliance_class is ApplianceClass.TIME_SHIFTABLE for a in self.appliances)
        n_pc = sum(a.appliance_class is ApplianceClass.POWER_CURTAILABLE for a in self.appliances)
        if n_ts > len(TS_APPLIANCES):
            raise ValueError(f"at most {len(TS_APPLIANCES)} time-shiftable appliances supported")
        if n_pc > 1:
            raise ValueError("at most one power-curtailable appliance supported")
        length = None
        for name in names:
            series = np.asarray(self.demand[name], dtype=float)
            self.demand[name] = series
            if series.ndim != 1:
                raise ValueError(f"demand series for {name!r} must be 1-D")
            if length is None:
                length = series.size
            elif series.size != length:
                raise ValueError("all demand series must have equal length")
            if series.size == 0 or series.size % SLOTS_PER_DAY != 0:
                raise ValueError("demand series must cover whole 96-slot days")
            if np.any(series < 0) or not np.all(np.isfinite(series)):
                raise ValueError(f"demand series for {name!r} must be finite and >= 0")
        if self.day_dates is not None and len(self.day_dates) != length // SLOTS_PER_DAY:
            raise ValueError("day_dates length must match the number of days")

    @property
    def n_days(self) -> int:
        return next(iter(self.demand.values())).size // SLOTS_PER_DAY

    @property
    def n_slots(self) -> int:
        return next(iter(self.demand.values())).size

    def appliance(self, name: str) -> Appliance:
        for a in self.appliances:
            if a.name == name:
                return a
        raise KeyError(name)

    def total_series(self) -> np.ndarray:
        """Summed counterfactual demand over all appliances, cached."""
        if self._total is None:
            self._total = np.sum([self.demand[a.name] for a in self.appliances], axis=0)
        return self._total

    def day_series(self, name: str, day: int) -> np.ndarray:
        if not 0 <= day < self.n_days:
            raise IndexError(f"day {day} outside [0, {self.n_days})")
        lo = day * SLOTS_PER_DAY
        return self.demand[name][lo : lo + SLOTS_PER_DAY]


def canonical_household(
    household_id: str,
    demand: dict[str, np.ndarray],
    day_dates: tuple[date, ...] | None = None,
) -> Household:
    """Build a household over the canonical 6-appliance inventory.

    Missing appliances get zero-filled series; unknown names are rejected.
    """
    unknown = set(demand) - set(CANONICAL_APPLIANCES)
    if unknown:
        raise ValueError(f"unknown appliance names: {sorted(unknown)}")
    if not demand:
        raise ValueError("at least one demand series is required")
    n = len(next(iter(demand.values())))
    full = {
        name: np.asarray(demand.get(name, np.zeros(n)), dtype=float)
        for name in CANONICAL_APPLIANCES
    }
    appliances = tuple(
        Appliance(name, CLASS_BY_CANONICAL_NAME[name]) for name in CANONICAL_APPLIANCES
    )
    return Household(household_id, appliances, full, day_dates)


def total_demand(h: Household, t: SlotIndex) -> float:
    """Total counterfactual demand at one slot (the D of the action space)."""
    if t.flat >= h.n_slots:
        raise IndexError(f"slot {t} outside household range of {h.n_days} days")
    return float(h.total_series()[t.flat])


def classify_partition(
    h: Household,
) -> tuple[list[Appliance], list[Appliance], list[Appliance]]:
    """Partition the inventory into (time-shiftable, power-curtailable, non-shiftable)."""
    ts = [a for a in h.appliances if a.appliance_class is ApplianceClass.TIME_SHIFTABLE]
    pc = [a for a in h.appliances if a.appliance_class is ApplianceClass.POWER_CURTAILABLE]
    ns = [a for a in h.appliances if a.appliance_class is ApplianceClass.NON_SHIFTABLE]
    return ts, pc, ns
