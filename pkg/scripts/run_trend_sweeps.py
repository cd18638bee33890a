#!/usr/bin/env python3
"""Run the three standard trend sweeps and drop one CSV per sweep.

Thin driver over the ``edgeplan sweep`` command so the CSVs match the
documented schema exactly.  With --validate-tasks each planned point is
also simulated and its measured violation rate lands in the CSV.
"""

import argparse
from pathlib import Path

from edgeplan.cli import main as edgeplan_main
from edgeplan.scenario import bundled_config_path

SWEEPS = {
    "budget": [str(b) for b in range(40, 201, 20)],
    "lambda_scale": ["0.6", "0.7", "0.8", "0.9", "1.0"],
    "f_es": [],  # filled per config: factors of the configured capacity
}
FES_FACTORS = [0.5, 0.75, 1.0, 1.5, 2.0]


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(bundled_config_path("set1")))
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--mode", choices=("soft", "hard"), default="soft")
    ap.add_argument("--y-steps", type=int, default=40)
    ap.add_argument("--lambda-steps", type=int, default=40)
    ap.add_argument("--validate-tasks", type=int, default=0,
                    help="simulated tasks per point (0 = analytic only)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    from edgeplan.scenario import load_scenario

    f_es = load_scenario(args.config).f_es
    SWEEPS["f_es"] = [str(f_es * f) for f in FES_FACTORS]

    for param, values in SWEEPS.items():
        out = out_dir / f"sweep_{param}_{args.mode}.csv"
        rc = edgeplan_main([
            "sweep", args.config,
            "--param", param,
            "--values", ",".join(values),
            "--mode", args.mode,
            "--y-steps", str(args.y_steps),
            "--lambda-steps", str(args.lambda_steps),
            "--validate-tasks", str(args.validate_tasks),
            "--seed", str(args.seed),
            "--out", str(out),
        ])
        if rc != 0:
            return rc
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
