"""Experiment configuration: a JSON file with nested sections, validated up
front and resolved against defaults.  Every run writes the resolved snapshot
next to its artifacts."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from . import data_io
from .data_io import SplitSpec
from .domain import Household
from .environment import PriceModel
from .irl_sampled import IrlConfig
from .rewards import DiscomfortMode, RevenueMode, TrueReward

CONFIG_VERSION = 1

DEFAULTS: dict = {
    "config_version": CONFIG_VERSION,
    "seed": 0,
    "out_dir": "runs/out",
    "data": {
        "source": "synth",          # "synth" or "csv"
        "archetype": "full",
        "synth_seed": 1,
        "n_days": 214,
        "start_date": "2018-04-01",
        "path": None,                # csv source
        "column_map": None,
        "household_id": None,
    },
    "split": {
        "mode": "calendar",          # "calendar" or "days"
        "train_ranges": [["2018-04-01", "2018-07-02"], ["2018-08-02", "2018-11-01"]],
        "test_ranges": [["2018-07-02", "2018-08-02"]],
        "train_days": None,          # explicit day indices, mode == "days"
        "test_days": None,
    },
    "price": {"mode": "constant", "value": 0.1, "profile_path": None},
    "true_reward": {
        "revenue_mode": "reduction_only",
        "discomfort_mode": "quadratic",
        "w_ac": 1.0,
        "w_ts": [1.0, 1.0, 1.0, 1.0],
        "normalized_deviations": False,
    },
    "dqn": {
        "episodes": 1500,
        "batch_size": 32,
        "gamma": 0.9,
        "tau": 0.001,
        "epsilon_start": 1.0,
        "epsilon_decay": 0.999,
        "epsilon_floor": 0.05,
        "learning_rate": 0.001,
        "buffer_capacity": 10000,
    },
    "irl": {
        "max_iterations": 10,
        "margin_tol": 0.001,
        "iteration_episodes": 1500,
    },
    "bench_exact": {
        "grid_size": 5,
        "gamma": 0.9,
        "lambda_sweep": [0.1, 0.3, 1.0, 3.0],
        "r_max": 1.0,
    },
}

_ALLOWED_EPISODE_PRESETS = (1500, 2500, 3500)


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = _merge(DEFAULTS, raw)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    if cfg["config_version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {cfg['config_version']}")
    data = cfg["data"]
    if data["source"] not in ("synth", "csv"):
        raise ConfigError("data.source must be 'synth' or 'csv'")
    if data["source"] == "csv":
        if not data["path"]:
            raise ConfigError("data.path is required for a csv source")
        if not data["column_map"]:
            raise ConfigError("data.column_map is required for a csv source")
    elif data["archetype"] not in data_io.ARCHETYPES:
        raise ConfigError(
            f"data.archetype {data['archetype']!r} unknown; "
            f"choose from {sorted(data_io.ARCHETYPES)}"
        )
    if cfg["split"]["mode"] not in ("calendar", "days"):
        raise ConfigError("split.mode must be 'calendar' or 'days'")
    if cfg["split"]["mode"] == "days":
        if not cfg["split"]["train_days"] or not cfg["split"]["test_days"]:
            raise ConfigError("split.train_days and split.test_days required in 'days' mode")
    if cfg["price"]["mode"] not in ("constant", "profile"):
        raise ConfigError("price.mode must be 'constant' or 'profile'")
    if cfg["price"]["mode"] == "constant" and cfg["price"]["value"] < 0:
        raise ConfigError("price.value must be >= 0")
    tr = cfg["true_reward"]
    if tr["revenue_mode"] not in ("reduction_only", "bidirectional"):
        raise ConfigError("true_reward.revenue_mode invalid")
    if tr["discomfort_mode"] not in ("none", "absolute", "quadratic"):
        raise ConfigError("true_reward.discomfort_mode invalid")
    if len(tr["w_ts"]) != 4:
        raise ConfigError("true_reward.w_ts needs 4 weights")
    if cfg["dqn"]["episodes"] < 0:
        raise ConfigError("dqn.episodes must be >= 0")
    if cfg["irl"]["max_iterations"] < 0:
        raise ConfigError("irl.max_iterations must be >= 0")


def resolved_snapshot(cfg: dict, seed_override: int | None, out_override: str | None) -> dict:
    snap = copy.deepcopy(cfg)
    if seed_override is not None:
        snap["seed"] = seed_override
    if out_override is not None:
        snap["out_dir"] = out_override
    return snap


def build_household(cfg: dict) -> tuple[Household, data_io.LoadReport | None]:
    data = cfg["data"]
    if data["source"] == "synth":
        h = data_io.synth_household(
            seed=data["synth_seed"],
            archetype=data["archetype"],
            n_days=data["n_days"],
            start_date=date.fromisoformat(data["start_date"]),
            household_id=data["household_id"],
        )
        return h, None
    try:
        return data_io.load_household(data["path"], data["column_map"], data["household_id"])
    except data_io.DataLoadError:
        raise
    except OSError as exc:
        raise data_io.DataLoadError(f"cannot read {data['path']}: {exc}") from exc


def build_price(cfg: dict) -> PriceModel:
    price = cfg["price"]
    if price["mode"] == "constant":
        return PriceModel(constant=float(price["value"]))
    path = Path(price["profile_path"] or "")
    if not path.exists():
        raise ConfigError(f"price profile not found: {path}")
    values = np.loadtxt(path, delimiter=",", ndmin=1)
    return PriceModel(constant=None, profile=values)


def build_true_reward(cfg: dict) -> TrueReward:
    tr = cfg["true_reward"]
    return TrueReward(
        revenue_mode=RevenueMode[tr["revenue_mode"].upper()],
        discomfort_mode=DiscomfortMode[tr["discomfort_mode"].upper()],
        w_ac=float(tr["w_ac"]),
        w_ts=tuple(float(w) for w in tr["w_ts"]),
        normalized_deviations=bool(tr["normalized_deviations"]),
    )


def build_split(cfg: dict, household: Household) -> tuple[list[int], list[int]]:
    s = cfg["split"]
    if s["mode"] == "days":
        # Explicit day lists may overlap on purpose (single-day studies
        # train and evaluate on the same day).
        train = [int(d) for d in s["train_days"]]
        test = [int(d) for d in s["test_days"]]
        bad = [d for d in train + test if not 0 <= d < household.n_days]
        if bad:
            raise ConfigError(f"split day indices out of range: {bad}")
        return train, test
    spec = SplitSpec(
        train_ranges=tuple(
            (date.fromisoformat(a), date.fromisoformat(b)) for a, b in s["train_ranges"]
        ),
        test_ranges=tuple(
            (date.fromisoformat(a), date.fromisoformat(b)) for a, b in s["test_ranges"]
        ),
    )
    return data_io.split(household, spec)


def build_irl_config(cfg: dict) -> IrlConfig:
    dqn = cfg["dqn"]
    return IrlConfig(
        max_iterations=int(cfg["irl"]["max_iterations"]),
        margin_tol=float(cfg["irl"]["margin_tol"]),
        gamma=float(dqn["gamma"]),
        iteration_episodes=int(cfg["irl"]["iteration_episodes"]),
        seed=int(cfg["seed"]),
        batch_size=int(dqn["batch_size"]),
        tau=float(dqn["tau"]),
        epsilon_decay=float(dqn["epsilon_decay"]),
        epsilon_floor=float(dqn["epsilon_floor"]),
        learning_rate=float(dqn["learning_rate"]),
        buffer_capacity=int(dqn["buffer_capacity"]),
    )
