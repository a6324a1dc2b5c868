#!/usr/bin/env python3
"""Benchmark batched environment stepping across batch widths.

Steps each environment family with uniform-random legal actions at several
batch widths and reports wall time, aggregate env-steps/second, and the
amortized per-env-step cost. Demonstrates how vectorization amortizes
per-call overhead.

Example:
    python3 scripts/run_throughput_bench.py --envs rocksample_11_11 battleship_10
"""

from __future__ import annotations

import argparse
import sys

from memgap import ObservabilityLevel
from memgap.vector import run_throughput


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--envs", nargs="+",
        default=["tmaze_10", "rocksample_11_11", "battleship_10", "maze_01"],
    )
    parser.add_argument("--sizes", nargs="+", type=int,
                        default=[1, 16, 64, 256])
    parser.add_argument("--steps", type=int, default=50_000,
                        help="env-step budget per batch width (default: 50000)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--csv", action="store_true",
                        help="emit CSV instead of an aligned table")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    rows = []
    for env_id in args.envs:
        reports = run_throughput(
            env_id, ObservabilityLevel.PARTIAL, args.sizes,
            env_steps=args.steps, seed=args.seed, workers=args.workers,
        )
        for rep in reports:
            env_steps = rep.total_steps * rep.num_envs
            rows.append((
                env_id, rep.num_envs, env_steps, rep.wall_seconds,
                rep.steps_per_second, rep.wall_seconds / env_steps * 1e6,
            ))
    if args.csv:
        print("env,num_envs,env_steps,wall_seconds,env_steps_per_second,us_per_env_step")
        for row in rows:
            print(f"{row[0]},{row[1]},{row[2]},{row[3]:.4f},{row[4]:.1f},{row[5]:.3f}")
    else:
        header = (f"{'env':<18}{'N':>5}{'env steps':>11}{'wall s':>9}"
                  f"{'steps/s':>12}{'us/env-step':>13}")
        print(header)
        print("-" * len(header))
        for row in rows:
            print(f"{row[0]:<18}{row[1]:>5}{row[2]:>11}{row[3]:>9.3f}"
                  f"{row[4]:>12,.0f}{row[5]:>13.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
