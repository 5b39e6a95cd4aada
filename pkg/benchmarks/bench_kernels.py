"""Numba vs numpy kernels, and a whole simulation with each backend.

    python benchmarks/bench_kernels.py [--repeat N] [--horizon T]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from pmkit import _kernels
from pmkit._accel import HAVE_NUMBA


def _time(fn, args, repeat):
    fn(*args)  # warm-up (and JIT compile)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat * 1e6


def _simplex_args():
    rng = np.random.default_rng(0)
    m, n = 12, 30
    A = rng.random((m, n))
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = 1.0
    T[m, :n] = -rng.random(n)
    basis = np.arange(n, n + m)
    return T, basis, n + m


def kernel_cases():
    rng = np.random.default_rng(1)
    d, N = 10, 3
    G = np.repeat(np.eye(d)[None] / 0.05, N, axis=0)
    B = rng.random((5, d))
    row_action = np.array([0, 0, 1, 2, 2])
    obs = rng.random((3, 5))
    winf = rng.random((3, N))
    counts = rng.integers(1, 100, N).astype(float)
    nu = rng.random(5)
    x = rng.random(d)
    u = rng.random(64)
    T, basis, ne = _simplex_args()
    return {
        "simplex": (lambda impl: (lambda: impl.simplex(T.copy(), basis.copy(), ne, 1e-11, 500)), ()),
        "sherman_morrison": (lambda impl: impl.sherman_morrison, (G[0], x)),
        "cbp_pair_stats": (lambda impl: impl.cbp_pair_stats, (obs, winf, nu, row_action, counts)),
        "contextual_stats": (lambda impl: impl.contextual_stats, (G, B, row_action, x)),
        "sample_z": (lambda impl: impl.sample_z, (0.0, 2.5, 5, 1e-7, 1.0, u)),
    }


SIM = (
    "import time; from pmkit.harness.runner import run_game; "
    "t0=time.perf_counter(); "
    "run_game({{'strategy':'{s}'}}, {env}, {T}, 0); "
    "print(time.perf_counter()-t0)"
)


def simulate(disable: bool, strategy: str, env: dict, horizon: int) -> float:
    envvars = dict(os.environ, PMKIT_DISABLE_NUMBA="1" if disable else "0")
    code = SIM.format(s=strategy, env=repr(env), T=horizon)
    subprocess.run([sys.executable, "-c", code], env=envvars, check=True, capture_output=True)  # warm cache
    out = subprocess.run([sys.executable, "-c", code], env=envvars, check=True, capture_output=True, text=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--horizon", type=int, default=5000)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable (or disabled); nothing to compare")
        return
    print(f"{'kernel':<18}{'numpy us':>11}{'numba us':>11}{'speedup':>9}")
    for name, (make, fargs) in kernel_cases().items():
        res = []
        for impl in (_kernels.numpy_impl, _kernels.numba_impl):
            fn = make(impl)
            res.append(_time(fn, fargs, args.repeat))
        print(f"{name:<18}{res[0]:>11.2f}{res[1]:>11.2f}{res[0] / res[1]:>9.2f}")
    print()
    print(f"{'simulation':<32}{'numpy s':>10}{'numba s':>10}")
    cases = [
        ("randcbp", {"env": "bernoulli", "game": "apple_tasting", "instance": "imbalanced"}),
        ("randcbpside", {"env": "linear", "game": "apple_tasting", "d": 10, "theta": "const:0.1"}),
    ]
    for s, env in cases:
        a = simulate(True, s, env, args.horizon)
        b = simulate(False, s, env, args.horizon)
        print(f"{s + ' T=' + str(args.horizon):<32}{a:>10.3f}{b:>10.3f}")


if __name__ == "__main__":
    main()
