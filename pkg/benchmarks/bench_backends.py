"""Compare the compiled contact kernel against the pure NumPy fallback.

Runs the same episode on both backends, checks the trajectories agree
byte-for-byte, and reports wall-clock times.  Usage:

    python benchmarks/bench_backends.py [--days 120] [--seeds 1,2,3] [--config town1k]
"""

from __future__ import annotations

import argparse
import time

from epitown import cli as cli_mod
from epitown import engine
from epitown.policies import heuristic_policy


def run_once(config, seed: int, backend: str) -> tuple[str, float]:
    t0 = time.perf_counter()
    res = engine.run(config, seed, heuristic_policy("gi", config.stage_table), backend=backend)
    dt = time.perf_counter() - t0
    return res.to_csv(), dt


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="town1k")
    ap.add_argument("--days", type=int, default=120)
    ap.add_argument("--seeds", default="1,2,3")
    args = ap.parse_args()

    config = cli_mod.build_config(args.config, {"horizon_days": args.days})
    seeds = [int(s) for s in args.seeds.split(",")]

    print(f"config={args.config} days={args.days} seeds={seeds}")
    print(f"{'seed':>6} {'compiled (s)':>14} {'python (s)':>12} {'speedup':>9}  match")
    total_c = total_p = 0.0
    all_match = True
    for seed in seeds:
        csv_c, dt_c = run_once(config, seed, "compiled")
        csv_p, dt_p = run_once(config, seed, "python")
        match = csv_c == csv_p
        all_match &= match
        total_c += dt_c
        total_p += dt_p
        print(f"{seed:>6} {dt_c:>14.3f} {dt_p:>12.3f} {dt_p / dt_c:>8.1f}x  {match}")
    print(
        f"{'total':>6} {total_c:>14.3f} {total_p:>12.3f} {total_p / total_c:>8.1f}x  {all_match}"
    )
    return 0 if all_match else 1


if __name__ == "__main__":
    raise SystemExit(main())
