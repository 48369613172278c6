"""Time the compiled kernels against the pure-numpy fallback.

Each mode runs in its own interpreter because the backend is chosen from
CCGEO_DISABLE_NUMBA at import time.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, math, time
import numpy as np
from ccgeo import kernels
from ccgeo._accel import JIT_ENABLED

def best(fn, repeat):
    fn()  # warm-up (includes compilation when jitted)
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)

repeat = int(__import__("sys").argv[1])
a = np.array([[0.3, -1.2, 0.1], [0.4, 0.2, 0.9], [-0.5, 0.0, 0.7]])
y0 = np.array([0.0, 1.0, 0.5])

def run_expm():
    for _ in range(2000):
        kernels.expm(a)

def run_integrate():
    kernels.eps_tau_integrate(1.0, 0.0, y0, -0.5, 1e-10, 1e-12, 1e-12, 1e-10, 100000)

def run_rhs():
    for i in range(20000):
        kernels.eps_tau_rhs(-0.1 - 1e-6 * i, 0.1, 1.0, 0.5, 1.0)

print(json.dumps({"jit": JIT_ENABLED,
                  "expm_x2000": best(run_expm, repeat),
                  "eps_tau_integrate": best(run_integrate, repeat),
                  "eps_tau_rhs_x20000": best(run_rhs, repeat)}))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ, CCGEO_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    jit = run(False, args.repeat)
    pure = run(True, args.repeat)
    print(f"{'kernel':<22} {'numba [s]':>12} {'numpy [s]':>12} {'speedup':>9}")
    for key in ("expm_x2000", "eps_tau_integrate", "eps_tau_rhs_x20000"):
        print(f"{key:<22} {jit[key]:>12.5f} {pure[key]:>12.5f} {pure[key] / jit[key]:>9.1f}")


if __name__ == "__main__":
    main()
