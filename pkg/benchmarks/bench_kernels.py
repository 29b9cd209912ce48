"""Time the hot kernels under numba and under plain numpy.

Each backend runs in its own interpreter because the switch is read at
import time. Usage::

    python benchmarks/bench_kernels.py [--reps 2000]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from crplan import _kernels as K
from crplan._accel import backend
from crplan.kinematics import ManipulatorParams

reps = int(sys.argv[1])
p = ManipulatorParams()
ls, lg1, lg2 = p.lengths
rng = np.random.default_rng(0)
qs = rng.uniform([0, 0, 0, 0], [np.pi, 2 * np.pi, np.pi, 2 * np.pi], size=(reps, 4))
obs = np.array([[10.0, 40.0, 30.0, 30.0], [40.0, -40.0, 50.0, 30.0]])

cases = {
    "chain_points": lambda q: K.chain_points(q, ls, lg1, lg2),
    "point_and_jacobian": lambda q: K.point_and_jacobian(q, 3, lg2, ls, lg1, lg2),
    "min_distance": lambda q: K.min_distance(q, ls, lg1, lg2, p.theta_eps, p.body_radius, obs),
    "edge_clear": lambda q: K.edge_clear(q, q + 0.2, 0.05, ls, lg1, lg2, p.theta_eps, p.body_radius, obs),
}
out = {"backend": backend()}
for name, fn in cases.items():
    fn(qs[0])  # compile
    t0 = time.perf_counter()
    for q in qs:
        fn(q)
    out[name] = (time.perf_counter() - t0) / reps * 1e6
print(json.dumps(out))
"""


def run(disable: bool, reps: int) -> dict:
    env = dict(os.environ, CRPLAN_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(reps)], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=2000)
    args = ap.parse_args(argv)
    fast = run(False, args.reps)
    slow = run(True, args.reps)
    print(f"{'kernel':<20}{'numba [us]':>12}{'numpy [us]':>12}{'speedup':>10}")
    for name in fast:
        if name == "backend":
            continue
        print(f"{name:<20}{fast[name]:>12.2f}{slow[name]:>12.2f}{slow[name] / fast[name]:>9.1f}x")
    if fast["backend"] != "numba":
        print("note: numba unavailable, both columns use numpy")


if __name__ == "__main__":
    main()
