"""Scenario runner, CSV export, benchmark statistics and the ``crplan`` command."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._accel import backend
from .baselines import BaselineOutcome, cspace_rrt_star, random_nullspace_planner
from .iik import SingularTaskError, StepRecord, Trajectory, _record, plan_motion
from .kinematics import canonical_config, end_effector
from .proximity import obstacle_array
from .scenario import PLANNERS, FixedCircle, Scenario, ScenarioError, SRRTSource, load_scenario
from .srrt import NoPathFound, s_rrt_star

EXIT_OK = 0
EXIT_PLANNER_FAILURE = 1
EXIT_INPUT_ERROR = 2

CSV_SIG_DIGITS = 17


@dataclass
class RunReport:
    scenario: str
    planner: str
    rng_seed: int
    trajectory: Trajectory
    outcome: BaselineOutcome
    timings: dict  # path_planning, motion_planning [s]
    path: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def total_time(self) -> float:
        return self.timings["path_planning"] + self.timings["motion_planning"]


def circle_path(source: FixedCircle, start_point) -> np.ndarray:
    """``n_points`` samples of the circle from the point nearest ``start_point``, once counterclockwise.

    The first and last samples coincide (a closed loop).
    """
    c = np.asarray(source.center, float)
    n = np.asarray(source.normal, float)
    off = np.asarray(start_point, float) - c
    off = off - np.dot(off, n) * n
    norm = np.linalg.norm(off)
    if norm < 1e-9:
        raise ValueError("start point projects onto the circle center; the circle start is undefined")
    e1 = off / norm
    e2 = np.cross(n, e1)
    t = np.linspace(0.0, 2.0 * math.pi, source.n_points)
    return c + source.radius * (np.outer(np.cos(t), e1) + np.outer(np.sin(t), e2))


def _initial_only(q, point, obs, params, path) -> Trajectory:
    return Trajectory([_record(q, point, obs, params)], np.asarray(path, float).reshape(-1, 3))


def _motion_outcome(traj: Trajectory, elapsed: float) -> BaselineOutcome:
    reason = "collision" if traj.collided else "none"
    return BaselineOutcome(reason == "none", len(traj.steps) - 1, elapsed, reason)


def _configs_trajectory(configs, goal, obs, params) -> Trajectory:
    """Wrap a configuration path as a Trajectory; the expected point is the goal on the last step."""
    steps = []
    for i, q in enumerate(configs):
        expected = goal if i == len(configs) - 1 else end_effector(q, params)
        steps.append(_record(q, expected, obs, params))
    return Trajectory(steps, np.array([s.ee_actual for s in steps]))


def run_scenario(s: Scenario) -> RunReport:
    """Build the end-effector path, run the scenario's planner and time both phases."""
    params = s.manipulator
    obs = obstacle_array(s.obstacles)
    q0 = canonical_config(s.q_init)
    ee0 = end_effector(q0, params)
    src = s.path_source
    extras: dict = {}

    if s.planner == "cspace_rrt_star":
        goal = src.goal if isinstance(src, SRRTSource) else circle_path(src, ee0)[-1]
        t0 = time.perf_counter()
        configs, outcome = cspace_rrt_star(q0, goal, obs, params, s.baseline.max_iters, s.rng_seed)
        elapsed = time.perf_counter() - t0
        traj = _configs_trajectory(configs, goal, obs, params) if configs else _initial_only(q0, ee0, obs, params, ee0)
        traj.failure_reason = outcome.failure_reason
        return RunReport(s.name, s.planner, s.rng_seed, traj, outcome,
                         {"path_planning": 0.0, "motion_planning": elapsed}, traj.path, extras)

    t0 = time.perf_counter()
    if isinstance(src, FixedCircle):
        path = circle_path(src, ee0)
        extras["n_points"] = src.n_points
    else:
        start = ee0 if src.start is None else src.start
        try:
            res = s_rrt_star(start, src.goal, obs, src.space, src.max_iters, s.rng_seed, src.n_samples,
                             params.body_radius + src.path_margin)
        except NoPathFound:
            elapsed = time.perf_counter() - t0
            outcome = BaselineOutcome(False, 0, elapsed, "iterations_exhausted")
            traj = _initial_only(q0, start, obs, params, start)
            traj.failure_reason = outcome.failure_reason
            return RunReport(s.name, s.planner, s.rng_seed, traj, outcome,
                             {"path_planning": elapsed, "motion_planning": 0.0}, traj.path, extras)
        path = res.smooth
        if np.all(path == path[0]):
            # start and goal coincide: nothing to track
            path = path[:1]
        extras.update(raw_path=res.raw, pruned_path=res.pruned)
    path_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        if s.planner == "random_nullspace":
            traj, outcome = random_nullspace_planner(path, q0, obs, params, s.rng_seed,
                                                     s.baseline.stall_limit, s.baseline.mu_max)
        else:
            traj = plan_motion(path, q0, obs, s.gains, params, avoidance=(s.planner == "avoidance"))
            outcome = _motion_outcome(traj, time.perf_counter() - t0)
    except SingularTaskError as exc:
        traj = _initial_only(q0, path[0], obs, params, path)
        traj.failure_reason = "stalled"
        traj.notes["error"] = str(exc)
        outcome = BaselineOutcome(False, 0, time.perf_counter() - t0, "stalled")
    motion_time = time.perf_counter() - t0
    return RunReport(s.name, s.planner, s.rng_seed, traj, outcome,
                     {"path_planning": path_time, "motion_planning": motion_time}, path, extras)


# --- CSV -------------------------------------------------------------------------

def csv_header(n_obstacles: int) -> list[str]:
    return (["step", "theta1", "delta1", "theta2", "delta2", "ee_x", "ee_y", "ee_z", "exp_x", "exp_y", "exp_z",
             "tracking_error_mm"] + [f"clearance_obs{i + 1}_mm" for i in range(n_obstacles)]
            + ["closest_link", "g_h", "g_v", "avoidance_active"])


def _fmt(x: float) -> str:
    return format(float(x), f".{CSV_SIG_DIGITS}g")


def csv_row(i: int, rec: StepRecord, n_obstacles: int) -> list[str]:
    clear = list(rec.clearances) if rec.clearances.size else [math.nan] * n_obstacles
    return ([str(i)] + [_fmt(v) for v in rec.config] + [_fmt(v) for v in rec.ee_actual]
            + [_fmt(v) for v in rec.ee_expected] + [_fmt(rec.tracking_error)] + [_fmt(v) for v in clear]
            + [rec.closest_link.label if rec.closest_link is not None else "",
               _fmt(rec.g_h), _fmt(rec.g_v), "1" if rec.avoidance_active else "0"])


def emit_csv(report: RunReport, out_path) -> Path:
    """Write one row per step (the initial configuration is step 0)."""
    out_path = Path(out_path)
    n_obs = report.trajectory.steps[0].clearances.size
    with out_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(n_obs))
        for i, rec in enumerate(report.trajectory.steps):
            w.writerow(csv_row(i, rec, n_obs))
    return out_path


def read_csv(path) -> list[dict]:
    """Parse a file written by :func:`emit_csv` back into typed rows."""
    rows = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            typed = {}
            for k, v in row.items():
                if k == "step":
                    typed[k] = int(v)
                elif k == "closest_link":
                    typed[k] = v
                elif k == "avoidance_active":
                    typed[k] = v == "1"
                else:
                    typed[k] = float(v)
            rows.append(typed)
    return rows


# --- benchmark -------------------------------------------------------------------

@dataclass
class BenchRow:
    scenario: str
    planner: str
    repetitions: int
    successes: int
    path_mean: float
    path_var: float
    motion_mean: float
    motion_var: float
    total_mean: float
    total_var: float
    worst_step_ratio: float  # max over runs of (max step time / median step time)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def step_time_ratio(traj: Trajectory) -> float:
    t = traj.step_times
    if t.size == 0:
        return math.nan
    med = float(np.median(t))
    return float(t.max() / med) if med > 0 else math.inf


def benchmark(scenarios: Sequence[Scenario], repetitions: int, seeds: Sequence[int] | None = None,
              planners: Sequence[str] | None = None, warmup: bool = True) -> list[BenchRow]:
    """Mean and variance (population, so one repetition gives 0) of the phase timings.

    Each (scenario, planner) pair runs ``repetitions`` times with seeds
    ``seeds`` (default: the scenario seed plus 0, 1, ...). One untimed run
    precedes the timed ones so that JIT compilation is not measured.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if seeds is not None and len(seeds) < repetitions:
        raise ValueError("need at least one seed per repetition")
    rows = []
    for s in scenarios:
        for planner in (planners or [s.planner]):
            base = s.with_planner(planner)
            if warmup:
                run_scenario(base)
            runs = [run_scenario(base.with_seed(seeds[k] if seeds is not None else s.rng_seed + k))
                    for k in range(repetitions)]
            p = np.array([r.timings["path_planning"] for r in runs])
            m = np.array([r.timings["motion_planning"] for r in runs])
            tot = p + m
            ratios = [step_time_ratio(r.trajectory) for r in runs if r.trajectory.step_times.size]
            rows.append(BenchRow(s.name, planner, repetitions, sum(r.outcome.succeeded for r in runs),
                                 float(p.mean()), float(p.var()), float(m.mean()), float(m.var()),
                                 float(tot.mean()), float(tot.var()),
                                 float(max(ratios)) if ratios else math.nan))
    return rows


def format_table(rows: Sequence[BenchRow]) -> str:
    head = ["scenario", "planner", "reps", "ok", "path mean [s]", "path var [s^2]", "motion mean [s]",
            "motion var [s^2]", "total mean [s]", "total var [s^2]", "max/median step"]
    body = [[r.scenario, r.planner, str(r.repetitions), str(r.successes), f"{r.path_mean:.6f}",
             f"{r.path_var:.3e}", f"{r.motion_mean:.6f}", f"{r.motion_var:.3e}", f"{r.total_mean:.6f}",
             f"{r.total_var:.3e}", f"{r.worst_step_ratio:.2f}"] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


# --- command line ----------------------------------------------------------------

def _summary(report: RunReport) -> str:
    traj = report.trajectory
    clear = traj.min_clearances
    lines = [
        f"scenario {report.scenario}  planner {report.planner}  seed {report.rng_seed}  backend {backend()}",
        f"outcome {report.outcome.failure_reason}  steps {report.outcome.steps_taken}",
        f"min clearance {clear.min():.4f} mm" if clear.size and np.isfinite(clear.min()) else "min clearance n/a",
        f"final tracking error {traj.tracking_errors[-1]:.4f} mm",
        f"path planning {report.timings['path_planning']:.4f} s  motion planning {report.timings['motion_planning']:.4f} s",
    ]
    return "\n".join(lines)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crplan", description="Continuum-rigid manipulator motion planning scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("scenario")
    run.add_argument("--out", help="per-step CSV output")
    run.add_argument("--seed", type=int)
    run.add_argument("--planner", choices=PLANNERS, help="override the scenario's planner")
    bench = sub.add_parser("bench", help="repeat scenarios and summarize timings")
    bench.add_argument("scenarios", nargs="+")
    bench.add_argument("--reps", type=int, required=True)
    bench.add_argument("--out", help="table output; a .json twin is written next to it")
    bench.add_argument("--planners", help="comma-separated planners (default: each scenario's own)")
    bench.add_argument("--seed", type=int, help="first seed (default: each scenario's rng_seed)")
    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("scenario")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            s = load_scenario(args.scenario)
            print(f"{args.scenario}: ok ({s.name}, planner {s.planner}, {len(s.obstacles)} obstacle(s))")
            return EXIT_OK
        if args.command == "run":
            s = load_scenario(args.scenario)
            if args.seed is not None:
                s = s.with_seed(args.seed)
            if args.planner:
                s = s.with_planner(args.planner)
            report = run_scenario(s)
            print(_summary(report))
            if args.out:
                emit_csv(report, args.out)
            return EXIT_OK if report.outcome.succeeded else EXIT_PLANNER_FAILURE
        # bench
        if args.reps < 1:
            raise ScenarioError("--reps must be >= 1")
        scenarios = [load_scenario(p) for p in args.scenarios]
        planners = [p.strip() for p in args.planners.split(",")] if args.planners else None
        for p in planners or ():
            if p not in PLANNERS:
                raise ScenarioError(f"unknown planner {p!r}; expected one of {', '.join(PLANNERS)}")
        seeds = list(range(args.seed, args.seed + args.reps)) if args.seed is not None else None
        rows = benchmark(scenarios, args.reps, seeds, planners)
        table = format_table(rows)
        print(table)
        if args.out:
            out = Path(args.out)
            out.write_text(table + "\n")
            out.with_suffix(".json").write_text(json.dumps([r.as_dict() for r in rows], indent=2))
        return EXIT_OK
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
