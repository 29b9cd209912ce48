"""The numpy fallback and the numba kernels compute the same numbers."""
import json
import os
import subprocess
import sys

import numpy as np

from crplan import _accel

PROBE = r"""
import json
import numpy as np
from crplan import _kernels as K
from crplan._accel import backend
from crplan.cli import run_scenario
from crplan.kinematics import ManipulatorParams
from crplan.scenario import bundled_scenario_path, load_scenario

p = ManipulatorParams()
ls, lg1, lg2 = p.lengths
rng = np.random.default_rng(0)
obs = np.array([[10.0, 40.0, 30.0, 30.0], [40.0, -40.0, 50.0, 30.0]])
out = {"backend": backend(), "points": [], "jac": [], "clear": []}
for _ in range(20):
    q = rng.uniform([0, 0, 0, 0], [np.pi, 2 * np.pi, np.pi, 2 * np.pi])
    out["points"].append(K.chain_points(q, ls, lg1, lg2).tolist())
    out["jac"].append(K.point_and_jacobian(q, 2, 0.4, ls, lg1, lg2)[1].tolist())
    out["clear"].append(float(K.min_distance(q, ls, lg1, lg2, p.theta_eps, p.body_radius, obs)[0]))
traj = run_scenario(load_scenario(bundled_scenario_path("fixed_circle"))).trajectory
out["circle"] = traj.configs.tolist()
print(json.dumps(out))
"""


def probe(disable: bool) -> dict:
    env = dict(os.environ, CRPLAN_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def test_backends_agree():
    slow = probe(True)
    fast = probe(False)
    assert slow["backend"] == "numpy"
    assert fast["backend"] == ("numba" if _accel.numba is not None else "numpy")
    for key in ("points", "jac", "clear"):
        np.testing.assert_allclose(fast[key], slow[key], rtol=1e-12, atol=1e-10)
    # a whole run stays together to well within tracking tolerance
    np.testing.assert_allclose(fast["circle"], slow["circle"], atol=1e-8)


def test_switch_values(monkeypatch):
    assert _accel.backend() in ("numba", "numpy")
    def f(x):
        return x

    monkeypatch.setattr(_accel, "ENABLED", False)
    assert _accel.njit(f) is f
    assert _accel.njit(cache=False)(f) is f
