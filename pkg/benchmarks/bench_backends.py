"""Compare the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_backends.py [--repeats N]

Times the four hot kernels on simulation-shaped inputs, plus one full
episode under each backend (episode timing runs in subprocesses so the
GPSWARM_BACKEND env flag can do the selection).
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from gpswarm.backends import np_ops

try:
    from gpswarm.backends import nb_ops
except ImportError:
    nb_ops = None


def timeit(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    grid = np.stack(
        np.meshgrid(np.linspace(-1, 1, 41), np.linspace(-1, 1, 41)), axis=-1
    ).reshape(-1, 2)
    queries = rng.uniform(-1, 1, (1024, 2))
    alphas = rng.standard_normal((64, 40, 40))
    betas = rng.standard_normal((64, 40))
    edges = []
    for i in range(64):
        for j in range(i + 1, 64):
            if np.linalg.norm(grid[i % 64] - grid[j % 64]) < 0.5:
                edges.append((i, j))
    edges = np.array(edges[:500], dtype=np.int64).reshape(-1, 2)
    weights = np.full(len(edges), 0.1)
    centers = rng.uniform(-1, 1, (6, 2))
    radii = rng.uniform(0.05, 0.12, 6)
    values = np.array([0.3, 0.3, 0.6, 0.6, 0.6, 1.0])
    targets = rng.uniform(-1, 1, (3, 2))
    amps = np.ones(3)

    cases = {
        "se_cross 1024x1681": lambda ops: ops.se_cross(queries, grid, 20.0, 20.0, 1.0),
        "consensus_sweep 64 agents": lambda ops: ops.consensus_sweep(
            alphas, betas, edges, weights
        ),
        "entity_map 32x32": lambda ops: ops.entity_map(
            32, 32, -1.0, -1.0, 2 / 32, 2 / 32, centers, radii, values
        ),
        "signal_many 1024": lambda ops: ops.signal_many(queries, targets, amps, 0.06),
    }

    print(f"{'kernel':<28} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, call in cases.items():
        t_np = timeit(lambda: call(np_ops), repeats)
        if nb_ops is None:
            print(f"{name:<28} {t_np*1e3:9.3f}ms {'n/a':>10} {'':>8}")
            continue
        call(nb_ops)  # trigger JIT outside the timed region
        t_nb = timeit(lambda: call(nb_ops), repeats)
        print(
            f"{name:<28} {t_np*1e3:9.3f}ms {t_nb*1e3:9.3f}ms {t_np/t_nb:7.2f}x"
        )


_EPISODE_SNIPPET = """
import time
import numpy as np
from gpswarm.env import EnvConfig, SwarmEnv, run_episode
from gpswarm.policies import RandomPolicy
cfg = EnvConfig()
env = SwarmEnv(cfg)
run_episode(env, RandomPolicy(0, cfg.a_max), seed=0)  # warm caches
t0 = time.perf_counter()
for ep in range(3):
    run_episode(env, RandomPolicy(ep, cfg.a_max), seed=ep)
print((time.perf_counter() - t0) / 3)
"""


def bench_episode():
    print(f"\n{'full episode (100 steps)':<28}", end=" ", flush=True)
    results = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, GPSWARM_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", _EPISODE_SNIPPET],
            capture_output=True,
            text=True,
            env=env,
        )
        if out.returncode != 0:
            results[backend] = None
            continue
        results[backend] = float(out.stdout.strip().splitlines()[-1])
    t_np, t_nb = results.get("numpy"), results.get("numba")
    if t_np and t_nb:
        print(f"{t_np*1e3:9.1f}ms {t_nb*1e3:9.1f}ms {t_np/t_nb:7.2f}x")
    elif t_np:
        print(f"{t_np*1e3:9.1f}ms {'n/a':>10}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    if nb_ops is None:
        print("numba unavailable: reporting numpy backend only")
    bench_kernels(args.repeats)
    bench_episode()


if __name__ == "__main__":
    main()
