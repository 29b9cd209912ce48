"""Comparison planners: random null-space IIK and configuration-space RRT*."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .iik import StepRecord, Trajectory, _record, _tracking_step, corrected_task_velocity, limit_step
from .jacobian import (
    WeightState,
    end_effector_jacobian,
    joint_limit_gradient,
    joint_limit_weights,
    null_space_projector,
    pseudo_inverse,
)
from .kinematics import ManipulatorParams, _q, canonical_config, end_effector
from .proximity import collision_check_config, obstacle_array
from .srrt import Tree

FAILURE_REASONS = ("none", "stalled", "collision", "iterations_exhausted")

MU_MAX = 0.05
STALL_LIMIT = 100

# C-space RRT* constants
EDGE_RESOLUTION = 0.05  # rad per coordinate between checked configurations
CSPACE_STEER = 0.3  # rad, wrapped Euclidean
CSPACE_GOAL_BIAS = 0.02
CSPACE_GOAL_TOL = 5.0  # mm
CSPACE_REWIRE_CAP = 0.6  # rad
CSPACE_BOUNDS = np.array([[0.0, math.pi], [0.0, 2.0 * math.pi], [0.0, math.pi], [0.0, 2.0 * math.pi]])


@dataclass(frozen=True)
class BaselineOutcome:
    succeeded: bool
    steps_taken: int
    wall_time: float
    failure_reason: str = "none"

    def __post_init__(self):
        if self.failure_reason not in FAILURE_REASONS:
            raise ValueError(f"unknown failure reason {self.failure_reason!r}")
        if self.succeeded != (self.failure_reason == "none"):
            raise ValueError("succeeded must hold exactly when failure_reason is 'none'")


def _obs(obstacles) -> np.ndarray:
    if isinstance(obstacles, np.ndarray):
        return np.ascontiguousarray(obstacles, dtype=np.float64).reshape(-1, 4)
    return obstacle_array(list(obstacles or ()))


def random_nullspace_planner(path, q_init, obstacles, params: ManipulatorParams, rng_seed=None,
                             stall_limit: int = STALL_LIMIT, mu_max: float = MU_MAX,
                             correct_drift: bool = True, start_tolerance: float = 1.0):
    """Weighted IIK whose null-space vector is a small random draw.

    Each step draws mu uniformly in [-mu_max, mu_max]^4 and keeps the first
    draw whose configuration is collision-free; after ``stall_limit`` colliding
    draws the run stops as ``stalled``. Returns ``(Trajectory, BaselineOutcome)``.
    """
    t_start = time.perf_counter()
    if stall_limit < 1:
        raise ValueError("stall_limit must be >= 1")
    if mu_max < 0:
        raise ValueError("mu_max must be >= 0")
    path = np.asarray(path, dtype=float).reshape(-1, 3)
    if path.shape[0] == 0:
        raise ValueError("path must contain at least one point")
    obs = _obs(obstacles)
    q = canonical_config(q_init)
    if np.linalg.norm(end_effector(q, params) - path[0]) > start_tolerance:
        raise ValueError("initial configuration does not place the end-effector on the path start")

    rng = np.random.default_rng(rng_seed)
    limits = params.weighting_limits
    state = WeightState.initial(q, limits)
    steps: list[StepRecord] = [_record(q, path[0], obs, params)]
    reason = "none" if collision_check_config(q, params, obs) else "collision"
    for i in range(path.shape[0] - 1):
        if reason != "none":
            break
        t0 = time.thread_time()
        pdot_e = path[i + 1] - path[i]
        pdot_f = corrected_task_velocity(path[i], end_effector(q, params), pdot_e) if correct_drift else pdot_e
        tr = _tracking_step(q, pdot_f, params, joint_limit_weights(q, state, limits))
        proj = null_space_projector(tr.jac, params.pinv_tol)
        q_new = None
        for _ in range(stall_limit):
            mu = rng.uniform(-mu_max, mu_max, 4)
            cand = canonical_config(q + limit_step(tr.dq + proj @ mu))
            if collision_check_config(cand, params, obs):
                q_new = cand
                break
        if q_new is None:
            reason = "stalled"
            break
        elapsed = time.thread_time() - t0
        state = WeightState(q, joint_limit_gradient(q, limits))
        q = q_new
        steps.append(_record(q, path[i + 1], obs, params, step_time=elapsed))
    traj = Trajectory(steps, path, failure_reason=reason)
    outcome = BaselineOutcome(reason == "none", len(steps) - 1, time.perf_counter() - t_start, reason)
    return traj, outcome


def _sample_config(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(CSPACE_BOUNDS[:, 0], CSPACE_BOUNDS[:, 1])


def _wrapped_dist(tree_pos: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = q - tree_pos
    d[:, 1::2] = (d[:, 1::2] + math.pi) % (2.0 * math.pi) - math.pi
    return np.linalg.norm(d, axis=1)


def _goal_step(q, goal, params: ManipulatorParams, step: float) -> np.ndarray:
    """Pseudo-inverse step from ``q`` toward the workspace goal, at most ``step`` long."""
    err = goal - end_effector(q, params)
    dq = pseudo_inverse(end_effector_jacobian(q, params), params.pinv_tol) @ err
    n = np.linalg.norm(dq)
    if n > step:
        dq *= step / n
    return canonical_config(q + dq)


def _rewire_radius(n: int, cap: float = CSPACE_REWIRE_CAP, dim: int = 4) -> float:
    span = CSPACE_BOUNDS[:, 1] - CSPACE_BOUNDS[:, 0]
    unit_ball = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    gamma = 2.0 * (1.0 + 1.0 / dim) ** (1.0 / dim) * (float(np.prod(span)) / unit_ball) ** (1.0 / dim)
    n = max(n, 2)
    return min(gamma * (math.log(n) / n) ** (1.0 / dim), cap)


def cspace_rrt_star(q_init, goal_position, obstacles, params: ManipulatorParams, max_iters: int,
                    rng_seed=None, step: float = CSPACE_STEER, goal_bias: float = CSPACE_GOAL_BIAS,
                    goal_tolerance: float = CSPACE_GOAL_TOL, resolution: float = EDGE_RESOLUTION):
    """RRT* directly over (theta1, delta1, theta2, delta2).

    Wrist angles are periodic. Edges are checked every ``resolution`` rad per
    coordinate. With probability ``goal_bias`` the tree node whose
    end-effector is nearest the goal is extended by a pseudo-inverse step
    toward it; otherwise a uniform configuration is sampled. The search stops
    at the first node whose end-effector lies within ``goal_tolerance``.
    Returns ``(configs, BaselineOutcome)``; configs is empty on failure.
    """
    t_start = time.perf_counter()
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    obs = _obs(obstacles)
    goal = np.asarray(goal_position, dtype=float)
    if goal.shape != (3,):
        raise ValueError("goal_position must be a 3-vector")
    q0 = np.ascontiguousarray(canonical_config(_q(q_init)))
    if not collision_check_config(q0, params, obs):
        raise ValueError("initial configuration is in collision")
    ls, lg1, lg2 = params.lengths
    eps, body = params.theta_eps, params.body_radius

    def done(configs, reason, iters):
        return configs, BaselineOutcome(reason == "none", iters, time.perf_counter() - t_start, reason)

    if np.linalg.norm(end_effector(q0, params) - goal) < goal_tolerance:
        return done([q0], "none", 0)

    rng = np.random.default_rng(rng_seed)
    tree = Tree(q0, max_iters + 1, dim=4)
    ee = np.zeros((max_iters + 1, 3))
    ee[0] = end_effector(q0, params)
    for it in range(1, max_iters + 1):
        n = tree.n
        if rng.random() < goal_bias:
            nearest = int(np.argmin(np.linalg.norm(ee[:n] - goal, axis=1)))
            q_new = _goal_step(tree.pos[nearest], goal, params, step)
            dn = _wrapped_dist(tree.pos[:n], q_new)
        else:
            target = _sample_config(rng)
            dn = _wrapped_dist(tree.pos[:n], target)
            nearest = int(np.argmin(dn))
            if dn[nearest] < 1e-12:
                continue
            d = K.wrapped_delta(tree.pos[nearest], target)
            frac = min(1.0, step / dn[nearest])
            q_new = canonical_config(tree.pos[nearest] + frac * d)
            dn = _wrapped_dist(tree.pos[:n], q_new)
        q_new = np.ascontiguousarray(q_new)
        if not K.edge_clear(np.ascontiguousarray(tree.pos[nearest]), q_new, resolution, ls, lg1, lg2, eps, body, obs):
            continue

        radius = max(_rewire_radius(n), step)
        near = np.flatnonzero(dn <= radius)
        best, best_cost = nearest, tree.cost[nearest] + dn[nearest]
        for j in near[np.argsort(tree.cost[near] + dn[near])]:
            c = tree.cost[j] + dn[j]
            if c >= best_cost:
                break
            if K.edge_clear(np.ascontiguousarray(tree.pos[j]), q_new, resolution, ls, lg1, lg2, eps, body, obs):
                best, best_cost = int(j), c
                break
        new = tree.add(q_new, best, best_cost)
        ee[new] = end_effector(q_new, params)
        for j in near:
            if j == best:
                continue
            c = best_cost + dn[j]
            if c < tree.cost[j] and K.edge_clear(q_new, np.ascontiguousarray(tree.pos[j]), resolution,
                                                 ls, lg1, lg2, eps, body, obs):
                tree.reparent(int(j), new, c)

        if np.linalg.norm(ee[new] - goal) < goal_tolerance:
            return done(list(tree.branch(new)), "none", it)
    return done([], "iterations_exhausted", max_iters)
