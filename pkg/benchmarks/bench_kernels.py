"""Compiled vs NumPy kernels.

Runs each workload in a child process twice: once with numba enabled and once
with GRIDFREE_DISABLE_NUMBA=1. Prints the best-of-N wall time per workload and
checks that both backends return the same numbers.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

FLAG = "GRIDFREE_DISABLE_NUMBA"


def _workloads():
    from gridfree import kernels
    from gridfree.discrete_cs import BpdnProblem, bpdn_solve
    from gridfree.harness import grid_t
    from gridfree.model import ArrayGeometry, SourceScene, sensing_matrix, synthesize

    rng = np.random.default_rng(0)
    c = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    omega = np.linspace(-np.pi, np.pi, 200_001)
    B = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    P = B @ B.conj().T
    omega_q = omega[::10].copy()

    g = ArrayGeometry.ula(21, 0.5)
    y = synthesize(g, SourceScene.from_degrees([-20.0, 17.0, 50.0], [1.0, 0.5, 0.8]))
    A = sensing_matrix(g, grid_t(0.5))
    bp = BpdnProblem(A, y.y, 0.05)

    return {
        "dual poly, M=64, 2e5 points": lambda: kernels.trig_poly_eval(c, omega),
        "quadratic form, M=64, 2e4 points": lambda: kernels.quadform_eval(P, omega_q),
        "BPDN, 21 x 361 grid": lambda: bpdn_solve(bp).x,
    }


def child(repeat):
    from gridfree._accel import backend

    out = {"backend": backend(), "results": {}}
    for name, fn in _workloads().items():
        value = fn()  # warm-up; includes compilation
        best = min(timeit.repeat(fn, number=1, repeat=repeat))
        out["results"][name] = {"seconds": best,
                                "checksum": [float(np.sum(np.abs(value))),
                                             float(np.abs(np.sum(value)))]}
    json.dump(out, sys.stdout)


def _run(disable, repeat):
    env = dict(os.environ)
    env.pop(FLAG, None)
    if disable:
        env[FLAG] = "1"
    cmd = [sys.executable, __file__, "--child", "--repeat", str(repeat)]
    return json.loads(subprocess.run(cmd, env=env, capture_output=True, text=True,
                                     check=True).stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the results here")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args()
    if a.child:
        child(a.repeat)
        return 0

    fast, slow = _run(False, a.repeat), _run(True, a.repeat)
    print(f"{'workload':<36}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}  agree")
    ok = True
    for name, f in fast["results"].items():
        s = slow["results"][name]
        agree = np.allclose(f["checksum"], s["checksum"], rtol=1e-6)
        ok &= bool(agree)
        print(f"{name:<36}{f['seconds']:>11.4f}s{s['seconds']:>11.4f}s"
              f"{s['seconds'] / f['seconds']:>9.1f}x  {'yes' if agree else 'NO'}")
    if a.json:
        with open(a.json, "w") as fh:
            json.dump({"fast": fast, "fallback": slow}, fh, indent=2, sort_keys=True)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
