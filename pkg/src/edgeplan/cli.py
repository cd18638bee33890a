"""Command-line front end.

Three subcommands:

``edgeplan plan CONFIG``
    Run the planner on a scenario config and print the chosen leases.

``edgeplan sweep CONFIG --param budget --values 80,100,...``
    Re-plan across a parameter sweep and emit one CSV row per
    (value, method).  Set ``EDGEPLAN_WORKERS=K`` to spread sweep points
    over K processes.

``edgeplan validate CONFIG --x 14,14,5 --y 1.0``
    Simulate a concrete allocation and check it against the analytic
    predictions; prints one PASS/FAIL line per check.

Exit codes: 0 success, 1 a validation check failed, 2 bad usage or config.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .channel import station_upload_table
from .delay import DelayModel, discretize_sojourn
from .erlang import erlang_b
from .planner import PlannerConfig, plan
from .power import hard_power, soft_power
from .scenario import Allocation, ConfigError, Scenario, load_scenario
from .sim import SimConfig, simulate

__all__ = ["main"]

SWEEP_PARAMS = ("budget", "lambda_scale", "f_es", "epsilon")


def _planner_config(args) -> PlannerConfig:
    return PlannerConfig(
        y_steps=args.y_steps,
        lambda_steps=args.lambda_steps,
        accuracy=args.accuracy,
    )


def _add_planner_args(sub):
    sub.add_argument("--mode", choices=("soft", "hard"), default="soft")
    sub.add_argument("--y-steps", type=int, default=100, help="edge-share grid size")
    sub.add_argument(
        "--lambda-steps", type=int, default=100, help="edge-rate grid size (hard mode)"
    )
    sub.add_argument("--accuracy", choices=("standard", "high"), default="standard")


def _scaled(scenario: Scenario, param: str, value: float) -> Scenario:
    if param == "budget":
        return scenario.scaled(budget=value)
    if param == "lambda_scale":
        return scenario.scaled(lambda_scale=value)
    if param == "f_es":
        return scenario.scaled(f_es=value)
    if param == "epsilon":
        return scenario.scaled(eps=value)
    raise ConfigError(f"unknown sweep parameter {param!r}")


def _result_dict(scenario: Scenario, result) -> dict:
    return {
        "mode": result.mode,
        "power_W": result.predicted_power,
        "cost": result.cost,
        "budget": scenario.budget,
        "y": result.allocation.es_share,
        "channels": list(result.allocation.channels),
        "blocking": [round(b, 6) for b in result.blocking],
        "lambda_star": result.lambda_star,
        "lambda_achieved": result.lambda_achieved,
        "all_local": result.all_local,
        "breakdown": result.breakdown.as_dict(),
    }


def cmd_plan(args) -> int:
    scenario = load_scenario(args.config)
    result = plan(scenario, args.mode, _planner_config(args))
    info = _result_dict(scenario, result)
    if args.json:
        print(json.dumps(info, indent=2))
        return 0
    print(f"mode            {info['mode']}")
    print(f"power           {info['power_W']:.4f} W")
    print(f"cost            {info['cost']:.2f} / {scenario.budget:.2f}")
    print(f"edge share y    {info['y']:.3f}")
    print(f"channels        {info['channels']}")
    print(f"blocking        {info['blocking']}")
    print(f"edge rate       {info['lambda_achieved']:.3f} (cap {info['lambda_star']:.3f})")
    if result.all_local:
        print("plan            all-local (no leases)")
    return 0


def _sweep_rows(packed) -> list[list]:
    config_path, param, value, mode, planner_kw, tasks, seed = packed
    scenario = _scaled(load_scenario(config_path), param, value)
    cfg = PlannerConfig(**planner_kw)
    result = plan(scenario, mode, cfg)
    methods = [("gcasd" if mode == "soft" else "gcahd", result)]
    rows = []
    for method, res in methods:
        viol = ""
        used_seed = ""
        if tasks > 0 and not res.all_local:
            stats = simulate(
                scenario, res.allocation, mode=mode, config=SimConfig(tasks=tasks, seed=seed)
            )
            viol = f"{max(stats.violation_rate(j) for j in range(len(scenario.classes))):.6f}"
            used_seed = seed
        rows.append(
            [param, value, mode, method, f"{res.predicted_power:.6f}", f"{res.cost:.4f}",
             f"{res.allocation.es_share:.4f}", *res.allocation.channels, viol, used_seed]
        )
    # pure-local baseline for context
    rows.append(
        [param, value, mode, "all_local", f"{scenario.all_local_power():.6f}", "0.0",
         "0.0", *([0] * len(scenario.base_stations)), "", ""]
    )
    return rows


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.config)  # fail fast on bad configs
    values = [float(v) for v in args.values.split(",") if v != ""]
    if not values:
        raise ConfigError("--values must list at least one number")
    planner_kw = dict(
        y_steps=args.y_steps, lambda_steps=args.lambda_steps, accuracy=args.accuracy
    )
    packed = [
        (args.config, args.param, v, args.mode, planner_kw, args.validate_tasks, args.seed)
        for v in values
    ]
    workers = int(os.environ.get("EDGEPLAN_WORKERS", "1"))
    if workers > 1 and len(packed) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            all_rows = list(pool.map(_sweep_rows, packed))
    else:
        all_rows = [_sweep_rows(p) for p in packed]

    header = [
        "param", "value", "mode", "method", "power_W", "cost", "y",
        *(f"x_{n + 1}" for n in range(len(scenario.base_stations))),
        "violation_rate", "seed",
    ]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(header)
        for rows in all_rows:
            writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def _predict(scenario: Scenario, allocation: Allocation, mode: str):
    """Analytic power/blocking prediction for a concrete allocation."""
    uploads = [station_upload_table(bs, scenario.classes) for bs in scenario.base_stations]
    loads = [
        bs.arrival_rate * uploads[n].mean_slots * scenario.tau
        for n, bs in enumerate(scenario.base_stations)
    ]
    blocking = np.array(
        [erlang_b(x, a) for x, a in zip(allocation.channels, loads)]
    )
    if mode == "soft" or not any(allocation.channels):
        return blocking, soft_power(scenario, blocking, uploads)
    lam = sum(
        (1.0 - b) * bs.arrival_rate for b, bs in zip(blocking, scenario.base_stations)
    )
    delays = DelayModel(scenario, y=allocation.es_share, lam=lam)
    if delays.saturated:
        raise ConfigError(
            f"edge queue unstable: offered rate {lam:.3f} >= capacity "
            f"{scenario.es_rate_cap(allocation.es_share):.3f}"
        )
    sojourns = [
        discretize_sojourn(delays, j, max_slots=scenario.deadline_slots(j))
        for j in range(len(scenario.classes))
    ]
    return blocking, hard_power(scenario, blocking, uploads, sojourns, allocation.es_share)


def cmd_validate(args) -> int:
    scenario = load_scenario(args.config)
    channels = tuple(int(v) for v in args.x.split(","))
    allocation = Allocation(channels=channels, es_share=args.y)
    allocation.validate(scenario)
    seeds = [int(s) for s in args.seeds.split(",")]
    blocking, predicted = _predict(scenario, allocation, args.mode)

    stats = None
    for seed in seeds:
        one = simulate(
            scenario,
            allocation,
            mode=args.mode,
            config=SimConfig(tasks=args.tasks, seed=seed),
        )
        stats = one if stats is None else stats.merge(one)

    failures = 0

    def check(name: str, ok: bool, detail: str):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        if not ok:
            failures += 1

    rel = abs(stats.total_power - predicted.total) / max(predicted.total, 1e-12)
    check(
        "power",
        rel <= args.power_tol,
        f"simulated {stats.total_power:.4f} W vs predicted {predicted.total:.4f} W "
        f"(rel err {rel:.4f}, tol {args.power_tol})",
    )
    for n in range(len(scenario.base_stations)):
        expect = float(blocking[n])
        n_arr = int(stats.arrivals[n])
        sigma = max(np.sqrt(expect * (1 - expect) / max(n_arr, 1)), 1e-12)
        diff = abs(stats.blocking_rate(n) - expect)
        check(
            f"blocking bs{n + 1}",
            diff <= args.sigma * sigma,
            f"simulated {stats.blocking_rate(n):.4f} vs {expect:.4f} "
            f"({diff / sigma:.2f} sigma, allowed {args.sigma})",
        )
    if args.mode == "soft":
        for j, klass in enumerate(scenario.classes):
            n_off = int(stats.class_offloaded[j])
            if n_off == 0:
                check(f"violations class {j + 1}", True, "nothing offloaded")
                continue
            slack = args.sigma * np.sqrt(klass.eps * (1 - klass.eps) / n_off)
            rate = stats.violation_rate(j)
            check(
                f"violations class {j + 1}",
                rate <= klass.eps + slack,
                f"rate {rate:.5f} vs eps {klass.eps} + {slack:.5f}",
            )
    else:
        total = int(np.sum(stats.class_violations))
        check("violations", total == 0, f"{total} deadline misses in hard mode")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeplan",
        description="Plan and validate channel/edge-capacity leases for offloading.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="plan leases for a scenario config")
    p_plan.add_argument("config", help="scenario config (JSON)")
    _add_planner_args(p_plan)
    p_plan.add_argument("--json", action="store_true", help="machine-readable output")
    p_plan.set_defaults(func=cmd_plan)

    p_sweep = sub.add_parser("sweep", help="re-plan across a parameter sweep (CSV out)")
    p_sweep.add_argument("config")
    _add_planner_args(p_sweep)
    p_sweep.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p_sweep.add_argument(
        "--validate-tasks",
        type=int,
        default=0,
        help="simulate each plan with this many tasks to fill violation_rate",
    )
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="simulate an allocation vs predictions")
    p_val.add_argument("config")
    p_val.add_argument("--x", required=True, help="channels per station, e.g. 14,14,5")
    p_val.add_argument("--y", type=float, required=True, help="edge share in [0, 1]")
    p_val.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p_val.add_argument("--tasks", type=int, default=100_000)
    p_val.add_argument("--seeds", default="0", help="comma-separated seeds, pooled")
    p_val.add_argument("--power-tol", type=float, default=0.02)
    p_val.add_argument("--sigma", type=float, default=3.5)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
