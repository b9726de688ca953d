"""Time the numba kernels against the numpy fallback.

Each backend runs in its own interpreter because TOKENPRUNE_BACKEND is read at
import time. Compilation happens before timing starts.

    python3 benchmarks/bench_backends.py --steps 40 --repeat 3
"""

import argparse
import json
import os
import subprocess
import sys

_CHILD = r"""
import json, sys, time
import numpy as np
from tokenprune import _kernels as K
from tokenprune.pipeline import run_episode
from tokenprune.pruner import PrunerConfig
from tokenprune.toy_vla.episodes import EpisodeConfig, generate_episode
from tokenprune.toy_vla.model import ModelConfig, build_model, forward_full

steps, repeat = int(sys.argv[1]), int(sys.argv[2])
K.warmup()
cfg = ModelConfig()
model = build_model(cfg)
ep = generate_episode(EpisodeConfig(num_timesteps=steps, seed=1), cfg)
rng = np.random.default_rng(0)
a, b = rng.standard_normal((76, 64)), rng.standard_normal((64, 128))


def best(fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


out = {
    "backend": K.BACKEND,
    "matmul_76x64x128_us": best(lambda: [K.matmul(a, b) for _ in range(100)]) * 1e4,
    "forward_full_ms": best(lambda: [forward_full(model, s) for s in ep]) * 1e3 / steps,
    "episode_s": best(lambda: run_episode(model, ep, PrunerConfig())),
}
print(json.dumps(out))
"""


def run_backend(name, steps, repeat):
    env = dict(os.environ, TOKENPRUNE_BACKEND=name)
    proc = subprocess.run(
        [sys.executable, "-c", _CHILD, str(steps), str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--steps", type=int, default=20, help="timesteps in the benchmark episode")
    ap.add_argument("--repeat", type=int, default=3, help="best-of repetitions")
    args = ap.parse_args(argv)

    rows = [run_backend(b, args.steps, args.repeat) for b in ("numba", "numpy")]
    keys = [k for k in rows[0] if k != "backend"]
    print(f"{'metric':<22}" + "".join(f"{r['backend']:>12}" for r in rows) + f"{'ratio':>10}")
    for k in keys:
        nb, np_ = rows[0][k], rows[1][k]
        print(f"{k:<22}{nb:>12.3f}{np_:>12.3f}{np_ / nb:>9.1f}x")


if __name__ == "__main__":
    main()
