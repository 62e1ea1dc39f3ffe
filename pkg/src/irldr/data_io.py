"""Household ingestion and generation.

Reads per-appliance consumption CSVs (timestamp column plus one numeric
column per appliance at 15-minute cadence), repairs small gaps, splits the
calendar into the train/test periods, and synthesizes schema-compatible
households for self-contained experiments.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .domain import (
    CANONICAL_APPLIANCES,
    NS_APPLIANCE,
    PC_APPLIANCE,
    SLOTS_PER_DAY,
    TS_APPLIANCES,
    Household,
    canonical_household,
)

SLOT_MINUTES = 24 * 60 // SLOTS_PER_DAY
MAX_INTERPOLATED_SLOTS = 4

MAPPABLE_ROLES = TS_APPLIANCES + (PC_APPLIANCE,)


class DataLoadError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass
class LoadReport:
    source: str
    interpolated_slots: int = 0
    repaired_gaps: int = 0
    clamped_negatives: int = 0
    dropped_days: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "source": self.source,
            "interpolated_slots": self.interpolated_slots,
            "repaired_gaps": self.repaired_gaps,
            "clamped_negatives": self.clamped_negatives,
            "dropped_days": self.dropped_days,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


@dataclass(frozen=True)
class SplitSpec:
    """Half-open [start, end) date ranges; default mirrors the April-November
    calendar with the 31-day July test period between the train ranges."""

    train_ranges: tuple[tuple[date, date], ...]
    test_ranges: tuple[tuple[date, date], ...]

    @classmethod
    def default(cls) -> "SplitSpec":
        return cls(
            train_ranges=(
                (date(2018, 4, 1), date(2018, 7, 2)),
                (date(2018, 8, 2), date(2018, 11, 1)),
            ),
            test_ranges=((date(2018, 7, 2), date(2018, 8, 2)),),
        )

    def all_dates(self, which: str) -> list[date]:
        ranges = self.train_ranges if which == "train" else self.test_ranges
        out: list[date] = []
        for start, end in ranges:
            d = start
            while d < end:
                out.append(d)
                d += timedelta(days=1)
        return out


def split(h: Household, spec: SplitSpec | None = None) -> tuple[list[int], list[int]]:
    """Day-index lists (train, test), disjoint and exhaustive over the
    covered range.  Raises if the household does not cover the spec."""
    spec = spec or SplitSpec.default()
    if h.day_dates is None:
        raise SplitError("household carries no calendar dates; cannot split")
    index = {d: i for i, d in enumerate(h.day_dates)}
    wanted = {"train": spec.all_dates("train"), "test": spec.all_dates("test")}
    missing = [d for group in wanted.values() for d in group if d not in index]
    if missing:
        shown = ", ".join(d.isoformat() for d in missing[:8])
        more = f" (+{len(missing) - 8} more)" if len(missing) > 8 else ""
        raise SplitError(f"household is missing {len(missing)} required dates: {shown}{more}")
    train = sorted(index[d] for d in wanted["train"])
    test = sorted(index[d] for d in wanted["test"])
    overlap = set(train) & set(test)
    if overlap:
        raise SplitError("split ranges overlap")
    return train, test


def _parse_timestamp(text: str, row: int) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataLoadError(f"row {row}: unparseable timestamp {text!r}") from exc


def load_household(
    path: str | Path,
    column_map: dict[str, str],
    household_id: str | None = None,
) -> tuple[Household, LoadReport]:
    """Load a per-appliance CSV.

    ``column_map`` needs a ``time_column`` entry plus ``columns`` mapping CSV
    column names to appliance roles (ev, washing_machine, dishwasher, dryer,
    ac).  Every unmapped numeric column is summed into the non-shiftable
    series.  Gaps up to 4 slots are linearly interpolated; days touched by
    longer gaps, or incomplete days, are dropped and reported.
    """
    path = Path(path)
    if not path.exists():
        raise DataLoadError(f"data file not found: {path}")
    time_column = column_map.get("time_column")
    if not time_column:
        raise DataLoadError("column_map must define 'time_column'")
    roles: dict[str, str] = column_map.get("columns", {})
    for key, role in roles.items():
        if role not in MAPPABLE_ROLES:
            raise DataLoadError(
                f"column_map entry {key!r} maps to unknown appliance class {role!r}; "
                f"expected one of {sorted(MAPPABLE_ROLES)}"
            )

    report = LoadReport(source=str(path))
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if time_column not in header:
            raise DataLoadError(f"timestamp column {time_column!r} not found in {path}")
        missing_cols = [c for c in roles if c not in header]
        if missing_cols:
            raise DataLoadError(f"mapped columns missing from file: {missing_cols}")
        value_cols = [c for c in header if c != time_column]

        timestamps: list[datetime] = []
        values: list[list[float]] = []
        for row_no, row in enumerate(reader, start=2):
            ts = _parse_timestamp(row[time_column], row_no)
            if timestamps and ts <= timestamps[-1]:
                raise DataLoadError(f"row {row_no}: timestamps not strictly increasing at {ts}")
            parsed = []
            for col in value_cols:
                raw = (row[col] or "").strip()
                if raw == "":
                    v = math.nan
                else:
                    try:
                        v = float(raw)
                    except ValueError as exc:
                        raise DataLoadError(
                            f"row {row_no}, column {col!r}: unparseable value {raw!r}"
                        ) from exc
                if not math.isnan(v) and v < 0:
                    report.clamped_negatives += 1
                    v = 0.0
                parsed.append(v)
            timestamps.append(ts)
            values.append(parsed)

    if not timestamps:
        raise DataLoadError(f"no data rows in {path}")

    # Re-grid onto the exact 15-minute lattice, interpolating short gaps.
    step = timedelta(minutes=SLOT_MINUTES)
    grid: dict[datetime, list[float]] = {}
    unrepaired: list[tuple[datetime, datetime]] = []
    for i, ts in enumerate(timestamps):
        if (ts.minute % SLOT_MINUTES) or ts.second or ts.microsecond:
            raise DataLoadError(f"timestamp {ts} is not on the 15-minute lattice")
        grid[ts] = values[i]
    t = timestamps[0]
    prev = timestamps[0]
    while t <= timestamps[-1]:
        if t not in grid:
            nxt = t
            while nxt not in grid:
                nxt += step
            gap_slots = int((nxt - prev) / step) - 1
            if gap_slots <= MAX_INTERPOLATED_SLOTS:
                a, b = grid[prev], grid[nxt]
                for k in range(1, gap_slots + 1):
                    frac = k / (gap_slots + 1)
                    grid[prev + k * step] = [
                        av + frac * (bv - av) for av, bv in zip(a, b)
                    ]
                report.repaired_gaps += 1
                report.interpolated_slots += gap_slots
            else:
                unrepaired.append((prev + step, nxt - step))
            t = nxt
            prev = nxt
        else:
            prev = t
            t += step

    dropped: set[date] = set()
    for gap_start, gap_end in unrepaired:
        d = gap_start.date()
        while d <= gap_end.date():
            dropped.add(d)
            d += timedelta(days=1)

    # Assemble whole days only.
    by_day: dict[date, dict[int, list[float]]] = {}
    for ts, row in grid.items():
        slot = (ts.hour * 60 + ts.minute) // SLOT_MINUTES
        by_day.setdefault(ts.date(), {})[slot] = row
    kept_days = []
    for d in sorted(by_day):
        if d in dropped:
            continue
        if len(by_day[d]) != SLOTS_PER_DAY:
            dropped.add(d)
            continue
        kept_days.append(d)
    report.dropped_days = sorted(d.isoformat() for d in dropped)
    if not kept_days:
        raise DataLoadError(f"no complete days left after gap handling in {path}")

    series: dict[str, np.ndarray] = {
        role: np.zeros(len(kept_days) * SLOTS_PER_DAY) for role in CANONICAL_APPLIANCES
    }
    col_index = {c: i for i, c in enumerate(value_cols)}
    for day_no, d in enumerate(kept_days):
        for slot in range(SLOTS_PER_DAY):
            row = by_day[d][slot]
            flat = day_no * SLOTS_PER_DAY + slot
            for col in value_cols:
                v = row[col_index[col]]
                if math.isnan(v):
                    v = 0.0
                target = roles.get(col, NS_APPLIANCE)
                series[target][flat] += v

    hid = household_id or path.stem
    household = canonical_household(hid, series, tuple(kept_days))
    return household, report


def write_household_csv(h: Household, path: str | Path, tz_naive_start: datetime | None = None) -> None:
    """Write the canonical CSV form (timestamp plus one column per appliance)."""
    if h.day_dates is None:
        raise ValueError("household needs day_dates to serialize timestamps")
    path = Path(path)
    names = [a.name for a in h.appliances]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *names])
        for day_no, d in enumerate(h.day_dates):
            for slot in range(SLOTS_PER_DAY):
                ts = datetime(d.year, d.month, d.day) + timedelta(minutes=SLOT_MINUTES * slot)
                flat = day_no * SLOTS_PER_DAY + slot
                writer.writerow(
                    [ts.isoformat(sep=" "), *(repr(float(h.demand[n][flat])) for n in names)]
                )


def identity_column_map() -> dict:
    """Column map matching write_household_csv output."""
    return {
        "time_column": "timestamp",
        "columns": {name: name for name in MAPPABLE_ROLES},
    }


_CACHE_VERSION = 1


def save_household_cache(h: Household, prefix: str | Path) -> None:
    """Binary cache: ``<prefix>.bin`` holds the per-appliance series as flat
    little-endian float64 in inventory order; ``<prefix>.json`` records the
    layout, inventory and calendar."""
    prefix = Path(prefix)
    blob = bytearray()
    arrays = []
    offset = 0
    for a in h.appliances:
        data = np.ascontiguousarray(h.demand[a.name], dtype="<f8").tobytes()
        arrays.append({"name": a.name, "class": a.appliance_class.value, "offset": offset,
                       "length": h.demand[a.name].size})
        blob.extend(data)
        offset += len(data)
    sidecar = {
        "format_version": _CACHE_VERSION,
        "dtype": "<f8",
        "household_id": h.household_id,
        "day_dates": [d.isoformat() for d in h.day_dates] if h.day_dates else None,
        "arrays": arrays,
    }
    prefix.with_suffix(".bin").write_bytes(bytes(blob))
    prefix.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_household_cache(prefix: str | Path) -> Household:
    from .domain import Appliance, ApplianceClass

    prefix = Path(prefix)
    sidecar = json.loads(prefix.with_suffix(".json").read_text())
    blob = prefix.with_suffix(".bin").read_bytes()
    demand = {}
    appliances = []
    for entry in sidecar["arrays"]:
        flat = np.frombuffer(blob, dtype="<f8", count=entry["length"], offset=entry["offset"])
        demand[entry["name"]] = flat.astype(float)
        appliances.append(Appliance(entry["name"], ApplianceClass(entry["class"])))
    dates = sidecar["day_dates"]
    day_dates = tuple(date.fromisoformat(d) for d in dates) if dates else None
    return Household(sidecar["household_id"], tuple(appliances), demand, day_dates)


# ---------------------------------------------------------------------------
# Synthetic generator

ARCHETYPES = {
    "full": set(CANONICAL_APPLIANCES),
    "no_ev": set(CANONICAL_APPLIANCES) - {"ev"},
    "no_dryer": set(CANONICAL_APPLIANCES) - {"dryer"},
    "ev_ac": {NS_APPLIANCE, PC_APPLIANCE, "ev"},
    "ac_only": {NS_APPLIANCE, PC_APPLIANCE},
    "ts_only": {NS_APPLIANCE, *TS_APPLIANCES},
}


def _diurnal_bump(center: float, width: float) -> np.ndarray:
    slots = np.arange(SLOTS_PER_DAY)
    return np.exp(-0.5 * ((slots - center) / width) ** 2)


def _place_run(day_series: np.ndarray, start: int, profile: np.ndarray) -> bool:
    """Write a run if it fits in the day and does not touch existing load."""
    end = start + profile.size
    if start < 1 or end >= SLOTS_PER_DAY:
        return False
    if np.any(day_series[start - 1 : end + 1] > 0):
        return False
    day_series[start:end] = profile
    return True


def synth_household(
    seed: int,
    archetype: str = "full",
    n_days: int = 214,
    start_date: date = date(2018, 4, 1),
    household_id: str | None = None,
) -> Household:
    """Generate a household with a diurnal non-shiftable load, a seasonally
    driven AC profile and randomized time-shiftable runs.  The default span
    (214 days from April 1st) covers the whole train/test calendar."""
    if archetype not in ARCHETYPES:
        raise ValueError(f"unknown archetype {archetype!r}; choose from {sorted(ARCHETYPES)}")
    inventory = ARCHETYPES[archetype]
    tag = zlib.crc32(archetype.encode())  # stable across runs, unlike hash()
    rng = np.random.default_rng(np.random.SeedSequence((seed, tag)))
    shape = (n_days, SLOTS_PER_DAY)

    base = np.zeros(shape)
    morning = _diurnal_bump(32, 5)
    evening = _diurnal_bump(78, 8)
    for d in range(n_days):
        level = 0.3 + 0.1 * rng.random()
        curve = level + 0.5 * morning + 0.85 * evening
        noise = rng.normal(0.0, 0.03, SLOTS_PER_DAY)
        base[d] = np.maximum(curve * (0.85 + 0.3 * rng.random()) + noise, 0.05)

    ac = np.zeros(shape)
    if PC_APPLIANCE in inventory:
        afternoon = _diurnal_bump(62, 11)
        for d in range(n_days):
            season = math.exp(-0.5 * ((d / max(n_days - 1, 1) - 0.45) / 0.22) ** 2)
            hot = season * (0.55 + 0.65 * rng.random())
            if hot < 0.25:  # mild day, AC stays off
                continue
            ac[d] = np.maximum(2.4 * hot * afternoon + rng.normal(0, 0.02, SLOTS_PER_DAY), 0.0)
            ac[d][ac[d] < 0.08] = 0.0

    ts = {name: np.zeros(shape) for name in TS_APPLIANCES}
    for d in range(n_days):
        if "ev" in inventory and rng.random() < 0.75:
            dur = int(rng.integers(8, 13))
            start = int(rng.integers(66, 84))
            power = 3.3 + rng.normal(0, 0.1)
            _place_run(ts["ev"][d], start, np.full(dur, max(power, 2.5)))
        washer_end = None
        if "washing_machine" in inventory and rng.random() < 0.55:
            start = int(rng.integers(30, 58))
            profile = np.array([0.6, 1.9, 0.5, 0.4, 0.3])[: int(rng.integers(4, 6))]
            if _place_run(ts["washing_machine"][d], start, profile):
                washer_end = start + profile.size
        if "dishwasher" in inventory and rng.random() < 0.6:
            start = int(rng.integers(74, 88))
            profile = np.array([1.7, 0.7, 0.2, 1.1])
            _place_run(ts["dishwasher"][d], start, profile)
        if "dryer" in inventory and washer_end is not None and rng.random() < 0.8:
            start = washer_end + int(rng.integers(2, 8))
            dur = int(rng.integers(3, 6))
            _place_run(ts["dryer"][d], start, np.full(dur, 2.4))

    demand = {NS_APPLIANCE: base.ravel(), PC_APPLIANCE: ac.ravel()}
    demand.update({name: ts[name].ravel() for name in TS_APPLIANCES})
    dates = tuple(start_date + timedelta(days=i) for i in range(n_days))
    hid = household_id or f"synth-{archetype}-{seed}"
    return canonical_household(hid, demand, dates)
