import dataclasses
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from crplan.cli import (
    EXIT_INPUT_ERROR,
    EXIT_OK,
    EXIT_PLANNER_FAILURE,
    benchmark,
    circle_path,
    csv_header,
    emit_csv,
    format_table,
    main,
    read_csv,
    run_scenario,
)
from crplan.kinematics import end_effector
from crplan.scenario import FixedCircle, bundled_scenario_path, load_scenario, parse_scenario

FIXED = str(bundled_scenario_path("fixed_circle"))
ENV1 = str(bundled_scenario_path("env1"))
ENV2 = str(bundled_scenario_path("env2"))


def test_circle_path_geometry(params):
    src = FixedCircle(np.array([0.0, 0, 101]), 51.0, 150)
    start = end_effector([math.pi / 9, 0, math.pi / 9, 0], params)
    pts = circle_path(src, start)
    assert len(pts) == 150
    np.testing.assert_allclose(np.linalg.norm(pts[:, :2], axis=1), 51.0)
    np.testing.assert_allclose(pts[:, 2], 101.0)
    assert np.linalg.norm(pts[0] - start) < 1e-3
    np.testing.assert_allclose(pts[0], pts[-1], atol=1e-12)
    # counterclockwise about +z
    assert np.cross(pts[0], pts[1])[2] > 0
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    np.testing.assert_allclose(steps, steps[0])


def test_circle_path_degenerate_start():
    with pytest.raises(ValueError):
        circle_path(FixedCircle(np.zeros(3), 5.0, 10), [0.0, 0.0, 7.0])


def test_fixed_circle_run_reports():
    s = load_scenario(FIXED)
    avoid = run_scenario(s)
    plain = run_scenario(s.with_planner("no_avoidance"))
    assert avoid.outcome.succeeded and avoid.trajectory.min_clearances.min() > 0
    assert not plain.outcome.succeeded and plain.outcome.failure_reason == "collision"
    assert plain.trajectory.min_clearances.min() <= 0
    for r in (avoid, plain):
        assert all(v >= 0 for v in r.timings.values())
        assert len(r.trajectory.steps) == len(r.path) == r.extras["n_points"]


def test_env_runs_and_csv(tmp_path):
    report = run_scenario(load_scenario(ENV2))
    assert report.outcome.succeeded
    out = emit_csv(report, tmp_path / "env2.csv")
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 30
    header = lines[0].split(",")
    assert header == csv_header(2) and len(header) == 17 + 1
    rows = read_csv(out)
    for row, rec in zip(rows, report.trajectory.steps):
        got = [row[k] for k in ("theta1", "delta1", "theta2", "delta2")]
        np.testing.assert_array_equal(got, rec.config)
        np.testing.assert_array_equal([row["ee_x"], row["ee_y"], row["ee_z"]], rec.ee_actual)
        np.testing.assert_array_equal([row["clearance_obs1_mm"], row["clearance_obs2_mm"]], rec.clearances)
        assert row["tracking_error_mm"] == rec.tracking_error
        assert row["closest_link"] == rec.closest_link.label
        assert row["avoidance_active"] == rec.avoidance_active
        assert (row["g_h"], row["g_v"]) == (rec.g_h, rec.g_v)


def test_csv_round_trip_at_nine_digits(tmp_path):
    report = run_scenario(load_scenario(ENV1))
    rows = read_csv(emit_csv(report, tmp_path / "a.csv"))
    for row, rec in zip(rows, report.trajectory.steps):
        for key, val in zip(("theta1", "delta1", "theta2", "delta2"), rec.config):
            assert float(f"{row[key]:.9g}") == float(f"{val:.9g}")
    assert len(csv_header(1)) == 17


def test_pipeline_is_deterministic(tmp_path):
    s = load_scenario(ENV1).with_seed(5)
    a = emit_csv(run_scenario(s), tmp_path / "a.csv").read_text()
    b = emit_csv(run_scenario(s), tmp_path / "b.csv").read_text()
    assert a == b


def test_single_point_scenario(params):
    start = end_effector([math.pi / 3, math.pi, 2 * math.pi / 5, math.pi / 3], params)
    text = f"""
q_init: [pi/3, pi, 2*pi/5, pi/3]
path:
  type: srrt
  goal: [{float(start[0])!r}, {float(start[1])!r}, {float(start[2])!r}]
  space: {{min: [-90, -90, 0], max: [90, 90, 90]}}
gains: {{r: 38, r_max: 35, r_min: 32, k: 6}}
"""
    report = run_scenario(parse_scenario(text))
    assert len(report.trajectory.steps) == 1 and report.outcome.succeeded


def test_no_path_maps_to_iterations_exhausted():
    s = load_scenario(ENV2)
    src = dataclasses.replace(s.path_source, max_iters=2)
    report = run_scenario(dataclasses.replace(s, path_source=src))
    assert report.outcome.failure_reason == "iterations_exhausted"
    assert len(report.trajectory.steps) == 1


def test_baseline_planners_via_runner():
    s = load_scenario(ENV1)
    rn = run_scenario(s.with_planner("random_nullspace"))
    assert rn.outcome.failure_reason in ("none", "stalled")
    cs = run_scenario(s.with_planner("cspace_rrt_star"))
    assert cs.outcome.succeeded and cs.timings["path_planning"] == 0.0
    assert cs.trajectory.tracking_errors[-1] < 5.0


def test_benchmark_single_rep_has_zero_variance():
    rows = benchmark([load_scenario(ENV1)], 1)
    assert len(rows) == 1
    r = rows[0]
    assert r.path_var == 0.0 and r.motion_var == 0.0 and r.total_var == 0.0
    assert r.successes == 1
    assert "env1" in format_table(rows)


def test_benchmark_rejects_zero_reps():
    with pytest.raises(ValueError):
        benchmark([load_scenario(ENV1)], 0)


def test_main_exit_codes(tmp_path, capsys):
    assert main(["validate", FIXED]) == EXIT_OK
    assert main(["run", FIXED, "--out", str(tmp_path / "f.csv")]) == EXIT_OK
    assert (tmp_path / "f.csv").exists()
    assert main(["run", FIXED, "--planner", "no_avoidance"]) == EXIT_PLANNER_FAILURE
    bad = tmp_path / "bad.scenario"
    bad.write_text("q_init: [0, 0, 0, 0]\n")
    assert main(["validate", str(bad)]) == EXIT_INPUT_ERROR
    assert main(["run", str(tmp_path / "missing.scenario")]) == EXIT_INPUT_ERROR
    err = capsys.readouterr().err
    assert "path" in err


def test_main_bench_writes_table_and_json(tmp_path):
    out = tmp_path / "bench.txt"
    assert main(["bench", ENV1, "--reps", "2", "--out", str(out), "--planners", "avoidance,no_avoidance"]) == EXIT_OK
    assert "avoidance" in out.read_text()
    data = json.loads(out.with_suffix(".json").read_text())
    assert {d["planner"] for d in data} == {"avoidance", "no_avoidance"}
    assert all(d["repetitions"] == 2 for d in data)
    assert main(["bench", ENV1, "--reps", "1", "--planners", "warp"]) == EXIT_INPUT_ERROR


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "crplan.cli", "validate", ENV2], capture_output=True, text=True)
    assert res.returncode == 0 and "ok" in res.stdout


def test_fixed_circle_closest_link_moves_distal():
    traj = run_scenario(load_scenario(FIXED)).trajectory
    active = [s.closest_link.label for s in traj.steps if s.avoidance_active]
    assert active and set(active) <= {"C2", "R2"}
    assert "R2" in active
    labels = [s.closest_link.label for s in traj.steps]
    assert labels.index("C2") > labels.index("R1")
