#!/usr/bin/env python3
"""Compare the grid planners against brute-force search on small instances.

For each seed this draws a two-station scenario (the same family the
acceptance suite freezes), runs both planners, and scores the planned
allocation by simulation against the best allocation an exhaustive
DES-judged search can find.  Ratios near 1.0 mean the analytic pipeline
is giving away nothing; the acceptance bar is 1.10.
"""

import argparse
import csv
import sys
import time

from edgeplan.planner import PlannerConfig, plan
from edgeplan.sim import SimConfig, opt_exhaustive, simulate

sys.path.insert(0, "tests")
from test_acceptance import _reduced_scenario  # reuse the frozen generator


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="1,2,3,4,5,6,7,8,9,10",
                    help="comma-separated generator seeds")
    ap.add_argument("--tasks", type=int, default=20_000)
    ap.add_argument("--y-steps", type=int, default=20)
    ap.add_argument("--lambda-steps", type=int, default=20)
    ap.add_argument("--out", default="", help="optional CSV path")
    args = ap.parse_args(argv)

    grid = PlannerConfig(y_steps=args.y_steps, lambda_steps=args.lambda_steps)
    rows = []
    t0 = time.perf_counter()
    for seed in (int(s) for s in args.seeds.split(",")):
        sc = _reduced_scenario(seed)
        cfg = SimConfig(tasks=args.tasks, seed=seed)
        for mode in ("soft", "hard"):
            opt = opt_exhaustive(sc, mode, cfg)
            res = plan(sc, mode, grid)
            achieved = simulate(sc, res.allocation, mode, cfg).total_power
            rows.append({
                "seed": seed,
                "mode": mode,
                "opt_power_W": round(opt.power, 4),
                "opt_channels": "/".join(map(str, opt.allocation.channels)),
                "plan_power_W": round(achieved, 4),
                "plan_channels": "/".join(map(str, res.allocation.channels)),
                "ratio": round(achieved / opt.power, 4),
            })
            r = rows[-1]
            print(f"seed {seed} {mode}: opt {r['opt_power_W']} W @ {r['opt_channels']}"
                  f" | plan {r['plan_power_W']} W @ {r['plan_channels']}"
                  f" | ratio {r['ratio']}")
    worst = max(r["ratio"] for r in rows)
    print(f"worst ratio {worst} over {len(rows)} runs"
          f" [{time.perf_counter() - t0:.0f}s]")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.out}")
    return 0 if worst <= 1.10 else 1


if __name__ == "__main__":
    raise SystemExit(run())
