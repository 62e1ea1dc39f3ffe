"""Command-line front end.

Four workflows, all driven by one JSON config:

    irl-dr simulate-expert --config cfg.json [--seed N] [--out DIR]
    irl-dr learn-reward    --config cfg.json [--seed N] [--out DIR]
    irl-dr evaluate        --config cfg.json [--seed N] [--out DIR]
    irl-dr bench-exact     --config cfg.json [--seed N] [--out DIR]

Each stage writes its artifacts under ``<out_dir>/<stage>/`` together with a
resolved-config snapshot and a manifest of artifact hashes.  Exit codes:
0 success, 1 internal failure, 2 user/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import data_io, irl_exact, manifest, metrics, qnet, svgplot
from .agent import GreedyPolicy
from .config import ConfigError
from .data_io import DataLoadError, SplitError
from .domain import PC_APPLIANCE, SLOTS_PER_DAY, TS_APPLIANCES
from .environment import (
    EpisodeEngine,
    PriceModel,
    Trajectory,
    TsDecision,
    baseline_series,
    provision_series,
    run_episode,
)
from .irl_sampled import ExpertData, run_irl, simulate_expert
from .metrics import pearson_or_none

_USER_ERRORS = (ConfigError, DataLoadError, SplitError)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _stage_dir(cfg: dict, stage: str) -> Path:
    out = Path(cfg["out_dir"]) / stage
    out.mkdir(parents=True, exist_ok=True)
    return out


def _trajectory_rows(traj: Trajectory, appliance_names: list[str]) -> list[list]:
    rows = []
    for slot, step in enumerate(traj.steps):
        s = step.state
        row = [slot, s.pc_demand, s.ns_demand, *s.ts_delays, s.price, s.baseline, step.action]
        row.extend(step.dispatch.consumption[name] for name in appliance_names)
        row.append(step.dispatch.realized_total)
        row.extend(float(v) for v in step.features)
        row.append(step.reward)
        for name in TS_APPLIANCES:
            decision = step.dispatch.ts_decisions.get(name)
            row.append(decision.value if decision else "")
        rows.append(row)
    return rows


def _traj_header(appliance_names: list[str]) -> list[str]:
    return (
        ["slot", "pc_demand", "ns_demand"]
        + [f"delay_{n}" for n in TS_APPLIANCES]
        + ["price", "baseline", "action"]
        + [f"realized_{n}" for n in appliance_names]
        + ["realized_total"]
        + [f"phi_{i}" for i in range(6)]
        + ["reward"]
        + [f"decision_{n}" for n in TS_APPLIANCES]
    )


def _schedule_grid(traj: Trajectory) -> tuple[list[str], list[list[float]]]:
    """Fig-2 style encoding: per TS appliance 1 = request ignored this slot,
    0 = accepted (or idle), -1 = started without a prior request; the AC row
    is realized/requested in [0, 1] (1 when nothing was requested)."""
    labels = list(TS_APPLIANCES) + [PC_APPLIANCE]
    grid = []
    for name in TS_APPLIANCES:
        row = []
        for step in traj.steps:
            decision = step.dispatch.ts_decisions.get(name)
            if decision is TsDecision.DEFERRED:
                row.append(1.0)
            elif decision is TsDecision.FORCED_START:
                row.append(-1.0)
            else:
                row.append(0.0)
        grid.append(row)
    ac_row = []
    for step in traj.steps:
        demand = step.state.pc_demand
        ac_row.append(step.dispatch.pc_realized / demand if demand > 0 else 1.0)
    grid.append(ac_row)
    return labels, grid


def _load_expert(cfg: dict, household, price, train_days, baselines) -> ExpertData:
    expert_dir = Path(cfg["out_dir"]) / "expert"
    prefix = expert_dir / "expert_net"
    if not prefix.with_suffix(".bin").exists():
        raise ConfigError(
            f"expert artifacts not found at {prefix.with_suffix('.bin')}; "
            "run simulate-expert first"
        )
    net = qnet.load_mlp(prefix)
    normalizer = qnet.InputNormalizer.for_household(household, price.maximum)
    policy = GreedyPolicy(net, normalizer, n_actions=11)
    true_reward = config_mod.build_true_reward(cfg)
    engine = EpisodeEngine(household, true_reward, price, baselines)
    trajectories = {
        day: run_episode(household, day, policy, true_reward, engine=engine)
        for day in train_days
    }
    return ExpertData(trajectories=trajectories, policy=policy, spec=true_reward)


def cmd_simulate_expert(cfg: dict) -> int:
    out = _stage_dir(cfg, "expert")
    _write_json(out / "resolved_config.json", cfg)
    household, report = config_mod.build_household(cfg)
    if report is not None:
        (out / "load_report.json").write_text(report.to_json() + "\n")
    price = config_mod.build_price(cfg)
    true_reward = config_mod.build_true_reward(cfg)
    train_days, _ = config_mod.build_split(cfg, household)
    baselines = baseline_series(household)
    irl_cfg = config_mod.build_irl_config(cfg)

    expert, train_result = simulate_expert(
        household,
        train_days,
        true_reward,
        episodes=int(cfg["dqn"]["episodes"]),
        price=price,
        seed=int(cfg["seed"]),
        cfg=irl_cfg,
        baselines=baselines,
    )
    qnet.save_mlp(train_result.net, out / "expert_net")

    curve_rows = []
    running: list[float] = []
    for ep, (reward, eps) in enumerate(zip(train_result.episode_rewards, train_result.epsilons)):
        running.append(reward)
        mean100 = float(np.mean(running[-100:]))
        curve_rows.append([ep, eps, reward, mean100])
    _write_csv(out / "training_curve.csv", ["episode", "epsilon", "reward", "mean_reward_100"], curve_rows)

    traj_dir = out / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    names = [a.name for a in household.appliances]
    for day, traj in expert.trajectories.items():
        _write_csv(
            traj_dir / f"expert_day{day:03d}.csv", _traj_header(names), _trajectory_rows(traj, names)
        )
    _write_json(
        out / "expert_meta.json",
        {
            "trained": expert.trained,
            "episodes": int(cfg["dqn"]["episodes"]),
            "train_days": list(train_days),
            "household_id": household.household_id,
        },
    )
    manifest.write_manifest(out, "simulate-expert", cfg)
    print(f"expert trained on {len(train_days)} days; artifacts in {out}")
    return 0


def cmd_learn_reward(cfg: dict) -> int:
    out = _stage_dir(cfg, "irl")
    _write_json(out / "resolved_config.json", cfg)
    household, _ = config_mod.build_household(cfg)
    price = config_mod.build_price(cfg)
    train_days, _ = config_mod.build_split(cfg, household)
    baselines = baseline_series(household)
    expert = _load_expert(cfg, household, price, train_days, baselines)

    irl_cfg = config_mod.build_irl_config(cfg)
    result = run_irl(expert, household, train_days, irl_cfg, price, baselines)

    _write_json(out / "irl_result.json", result.to_payload())
    iter_dir = out / "iteration_nets"
    iter_dir.mkdir(exist_ok=True)
    for k, policy in enumerate(result.policies):
        qnet.save_mlp(policy.net, iter_dir / f"iter{k:02d}")
    if result.policies:
        qnet.save_mlp(result.policies[result.selected_iteration].net, out / "learned_net")
    manifest.write_manifest(out, "learn-reward", cfg)
    print(
        f"reward learned in {len(result.alpha_history)} iterations "
        f"({result.stop_reason.value}); alpha = {[round(a, 4) for a in result.alpha]}"
    )
    return 0


def cmd_evaluate(cfg: dict) -> int:
    out = _stage_dir(cfg, "eval")
    _write_json(out / "resolved_config.json", cfg)
    household, _ = config_mod.build_household(cfg)
    price = config_mod.build_price(cfg)
    true_reward = config_mod.build_true_reward(cfg)
    train_days, test_days = config_mod.build_split(cfg, household)
    baselines = baseline_series(household)

    expert_prefix = Path(cfg["out_dir"]) / "expert" / "expert_net"
    learned_prefix = Path(cfg["out_dir"]) / "irl" / "learned_net"
    for prefix, stage in ((expert_prefix, "simulate-expert"), (learned_prefix, "learn-reward")):
        if not prefix.with_suffix(".bin").exists():
            raise ConfigError(f"missing {prefix.with_suffix('.bin')}; run {stage} first")
    normalizer = qnet.InputNormalizer.for_household(household, price.maximum)
    expert_policy = GreedyPolicy(qnet.load_mlp(expert_prefix), normalizer, 11)
    learned_policy = GreedyPolicy(qnet.load_mlp(learned_prefix), normalizer, 11)

    # Both policies face the environment under the true reward.
    engine = EpisodeEngine(household, true_reward, price, baselines)
    per_day_rows = []
    provision_rows = []
    maes, mses, pearsons = [], [], []
    for day in test_days:
        t_exp = run_episode(household, day, expert_policy, true_reward, engine=engine)
        t_lrn = run_episode(household, day, learned_policy, true_reward, engine=engine)
        p_exp = provision_series(t_exp)
        p_lrn = provision_series(t_lrn)
        day_mae = metrics.mae(p_exp, p_lrn)
        day_mse = metrics.mse(p_exp, p_lrn)
        day_pearson = pearson_or_none(p_exp, p_lrn)
        maes.append(day_mae)
        mses.append(day_mse)
        if day_pearson is not None:
            pearsons.append(day_pearson)
        date_label = household.day_dates[day].isoformat() if household.day_dates else ""
        per_day_rows.append(
            [day, date_label, day_mae, day_mse, day_pearson if day_pearson is not None else "-"]
        )
        for slot in range(SLOTS_PER_DAY):
            provision_rows.append([day, slot, float(p_exp[slot]), float(p_lrn[slot])])
        for label, traj in (("expert", t_exp), ("learned", t_lrn)):
            names, grid = _schedule_grid(traj)
            _write_csv(
                out / f"schedule_{label}_day{day:03d}.csv",
                ["appliance"] + [f"s{c:02d}" for c in range(SLOTS_PER_DAY)],
                [[names[i], *grid[i]] for i in range(len(names))],
            )
            svgplot.heatmap(
                grid, names, out / f"schedule_{label}_day{day:03d}.svg",
                title=f"{label} schedule, day {day}",
            )
        svgplot.line_chart(
            {"expert": list(p_exp), "learned": list(p_lrn)},
            out / f"provision_day{day:03d}.svg",
            title=f"DR provision, day {day}",
        )

    _write_csv(
        out / "metrics_per_day.csv",
        ["day", "date", "mae", "mse", "pearson"],
        per_day_rows,
    )
    summary_rows = []
    for label, values in (("MAE", maes), ("MSE", mses)):
        agg = metrics.aggregate(values)
        summary_rows.append([label, agg["average"], agg["minimum"], agg["maximum"], agg["median"]])
    if pearsons:
        agg = metrics.aggregate(pearsons)
        # The average column stays blank when any day had an undefined
        # correlation, mirroring how such tables are reported.
        avg = agg["average"] if len(pearsons) == len(test_days) else "-"
        summary_rows.append(["Pearson", avg, agg["minimum"], agg["maximum"], agg["median"]])
    else:
        summary_rows.append(["Pearson", "-", "-", "-", "-"])
    _write_csv(
        out / "metrics_summary.csv",
        ["metric", "average", "minimum", "maximum", "median"],
        summary_rows,
    )
    _write_csv(out / "provision.csv", ["day", "slot", "expert", "learned"], provision_rows)

    # Per-iteration true-reward comparison over the test days.
    iter_dir = Path(cfg["out_dir"]) / "irl" / "iteration_nets"
    reward_rows = []
    if iter_dir.exists():
        expert_reward = float(
            np.mean(
                [
                    run_episode(household, d, expert_policy, true_reward, engine=engine)
                    .rewards()
                    .sum()
                    for d in test_days
                ]
            )
        )
        for k, prefix in enumerate(sorted(iter_dir.glob("iter*.bin"))):
            policy = GreedyPolicy(qnet.load_mlp(prefix.with_suffix("")), normalizer, 11)
            mean_reward = float(
                np.mean(
                    [
                        run_episode(household, d, policy, true_reward, engine=engine)
                        .rewards()
                        .sum()
                        for d in test_days
                    ]
                )
            )
            reward_rows.append([k, mean_reward, expert_reward])
        _write_csv(
            out / "reward_comparison.csv",
            ["iteration", "policy_true_reward", "expert_true_reward"],
            reward_rows,
        )
        if reward_rows:
            svgplot.line_chart(
                {
                    "policy": [r[1] for r in reward_rows],
                    "expert": [r[2] for r in reward_rows],
                },
                out / "reward_comparison.svg",
                title="True reward by iteration",
            )

    manifest.write_manifest(out, "evaluate", cfg)
    agg = metrics.aggregate(maes)
    print(
        f"evaluated {len(test_days)} test days: "
        f"MAE avg {agg['average']:.3f} / median {agg['median']:.3f}; artifacts in {out}"
    )
    return 0


def cmd_bench_exact(cfg: dict) -> int:
    out = _stage_dir(cfg, "bench")
    _write_json(out / "resolved_config.json", cfg)
    bench = cfg["bench_exact"]
    mdp, true_r = irl_exact.make_gridworld(
        size=int(bench["grid_size"]), gamma=float(bench["gamma"])
    )
    mdp.save(out / "gridworld_mdp.json")
    rows = []
    for lam in bench["lambda_sweep"]:
        recovered = irl_exact.recover_reward(
            mdp, irl_exact.ExactIrlConfig(l1_weight=float(lam), r_max=float(bench["r_max"]))
        )
        agreement = irl_exact.policy_agreement(mdp, recovered, true_r)
        rows.append([float(lam), agreement, float(np.abs(recovered).sum()),
                     float(np.abs(recovered).max())])
    _write_csv(out / "bench_exact.csv", ["lambda", "agreement", "r_l1_norm", "r_max_abs"], rows)
    _write_json(
        out / "bench_exact.json",
        {
            "grid_size": bench["grid_size"],
            "results": [
                {"lambda": r[0], "agreement": r[1], "r_l1_norm": r[2], "r_max_abs": r[3]}
                for r in rows
            ],
            "best_agreement": max(r[1] for r in rows),
        },
    )
    manifest.write_manifest(out, "bench-exact", cfg)
    best = max(r[1] for r in rows)
    print(f"gridworld recovery: best policy agreement {best:.1%} across {len(rows)} lambdas")
    return 0


_COMMANDS = {
    "simulate-expert": cmd_simulate_expert,
    "learn-reward": cmd_learn_reward,
    "evaluate": cmd_evaluate,
    "bench-exact": cmd_bench_exact,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irl-dr",
        description="Demand-response reward learning workflows",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_mod.load_config(args.config)
        cfg = config_mod.resolved_snapshot(cfg, args.seed, args.out)
        return _COMMANDS[args.command](cfg)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
