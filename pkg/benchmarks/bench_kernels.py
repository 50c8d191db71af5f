"""Time the compiled step kernel against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--steps 20000] [--repeat 3]

Each backend runs in a fresh interpreter because the backend is fixed at
import time by ``DPDSA_NUMBA``.
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from dpdsa import backend_name, run, sensor_config
steps, repeat = int(sys.argv[1]), int(sys.argv[2])
cfg = sensor_config(steps=steps, replications=1)
args = (cfg.problem, cfg.graph, cfg.noise, cfg.schedule)
t0 = time.perf_counter()
run(*args, steps=10, rng=0)
warm = time.perf_counter() - t0
times = []
for r in range(repeat):
    t0 = time.perf_counter()
    traj = run(*args, steps=steps, rng=r)
    times.append(time.perf_counter() - t0)
print(json.dumps({"backend": backend_name(), "warmup": warm, "best": min(times),
                  "final": traj.final.X.tolist()}))
"""


def measure(flag, steps, repeat):
    env = dict(os.environ, DPDSA_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", CHILD, str(steps), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    fast = measure("1", a.steps, a.repeat)
    slow = measure("0", a.steps, a.repeat)
    for r in (fast, slow):
        rate = a.steps / r["best"]
        print(f"{r['backend']:>6}: best {r['best']:.4f}s  ({rate:,.0f} steps/s, warm-up {r['warmup']:.2f}s)")
    diff = max(abs(x - y) for x, y in zip(fast["final"], slow["final"]))
    print(f"speed-up {slow['best'] / fast['best']:.1f}x, max final-state difference {diff:.2e}")


if __name__ == "__main__":
    main()
