"""Inverse instantaneous kinematics with null-space obstacle avoidance.

Each step maps an end-effector displacement to a joint displacement through
the joint-limit weighted pseudo-inverse. When the point of the body closest
to an obstacle would move toward it, a second term is added inside the null
space of the end-effector Jacobian that pushes that point away without
disturbing the end-effector to first order.
"""
from __future__ import annotations

import gc
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .jacobian import (
    SINGULAR_ABS_TOL,
    PointDescriptor,
    WeightState,
    damped_pseudo_inverse,
    end_effector_jacobian,
    joint_limit_gradient,
    joint_limit_weights,
    null_space_projector,
    point_jacobian,
    svd_inverse,
    weighted,
)
from .kinematics import Link, ManipulatorParams, canonical_config, end_effector
from .proximity import ProximityResult, manipulator_min_distance, obstacle_array

# fraction of the last rigid link treated as "the end-effector" for the activation rule
EE_ZONE = 0.95
# smallest singular value [mm/rad] of J W^-1/2 below which the step switches to damped least squares
DLS_FLOOR = 1.0
# damping floor [mm/rad] for the avoidance sub-problem J_Co (I - J^+ J); null-space directions
# that barely move the closest point (a wrist spin next to a straight segment) are suppressed
AVOID_FLOOR = 20.0
# per-coordinate cap [rad] on the whole joint step; the drift correction recovers the shortfall
MAX_JOINT_STEP = 0.3


class SingularTaskError(RuntimeError):
    """The weighted end-effector Jacobian has lost all rank."""


class CoincidentPointsError(ValueError):
    pass


@dataclass(frozen=True)
class AvoidanceGains:
    r: float
    r_max: float
    r_min: float
    k: float

    def __post_init__(self):
        if not (self.r > self.r_max > self.r_min > 0):
            raise ValueError("gains must satisfy r > r_max > r_min > 0")
        if not self.k > 0:
            raise ValueError("escape speed k must be > 0")


def gain_h(d: float, gains: AvoidanceGains) -> float:
    """Activation gain: 1 inside r_max, 0 beyond r, cosine blend between."""
    if d <= gains.r_max:
        return 1.0
    if d >= gains.r:
        return 0.0
    return 0.5 + 0.5 * math.cos(math.pi * (d - gains.r_max) / (gains.r - gains.r_max))


def gain_v(d: float, gains: AvoidanceGains) -> float:
    """Escape-speed gain: 1 inside r_min, 0 beyond r_max, quadratic between."""
    if d <= gains.r_min:
        return 1.0
    if d >= gains.r_max:
        return 0.0
    return ((d - gains.r_max) / (gains.r_max - gains.r_min)) ** 2


def corrected_task_velocity(p_expected_old, p_actual_old, pdot_e) -> np.ndarray:
    """Commanded displacement plus the drift accumulated so far."""
    return np.asarray(pdot_e, float) + np.asarray(p_expected_old, float) - np.asarray(p_actual_old, float)


def escape_velocity(closest_point, obstacle_center, k: float) -> np.ndarray:
    """Velocity of magnitude k pointing from the obstacle center through the closest point."""
    to_center = np.asarray(obstacle_center, float) - np.asarray(closest_point, float)
    n = np.linalg.norm(to_center)
    if n < 1e-12:
        raise CoincidentPointsError("closest point coincides with the obstacle center")
    return -k * to_center / n


def at_end_effector(prox: ProximityResult, params: ManipulatorParams) -> bool:
    return prox.link == Link.RIGID2 and prox.local_coord > EE_ZONE * params.rigid_lengths[1]


@dataclass
class _Tracking:
    dq: np.ndarray
    jac: np.ndarray
    jwe_pinv: np.ndarray
    w_inv_sqrt: np.ndarray
    null_dir: np.ndarray | None = None


def _tracking_step(q_old, pdot_f, params: ManipulatorParams, weights) -> _Tracking:
    jac = end_effector_jacobian(q_old, params)
    w = np.eye(4) if weights is None else weights
    jwe, w_inv_sqrt = weighted(jac, w)
    u, s, vt = np.linalg.svd(jwe, full_matrices=True)
    if s[0] < SINGULAR_ABS_TOL:
        raise SingularTaskError("weighted end-effector Jacobian is rank 0")
    # DLS only kicks in below the floor, otherwise this is the plain pseudo-inverse
    jwe_pinv = svd_inverse(u, s, vt[:3], DLS_FLOOR, params.pinv_tol)
    dq = w_inv_sqrt @ jwe_pinv @ np.asarray(pdot_f, float)
    null_dir = None
    if s[-1] > params.pinv_tol * s[0]:
        # full rank: null(J) is spanned by W^-1/2 times the null vector of J W^-1/2
        n = w_inv_sqrt @ vt[3]
        null_dir = n / np.linalg.norm(n)
    return _Tracking(dq, jac, jwe_pinv, w_inv_sqrt, null_dir)


def _avoidance_term(q_old, pdot_e, prox: ProximityResult, obstacle_center, gains: AvoidanceGains,
                    params: ManipulatorParams, tr: _Tracking, j_co=None):
    d = prox.clearance
    gh = gain_h(d, gains)
    gv = gain_v(d, gains)
    if gh == 0.0:
        return np.zeros(4), gh, gv
    if j_co is None:
        j_co = point_jacobian(q_old, PointDescriptor(prox.link, prox.local_coord), params)
    j_wco = j_co @ tr.w_inv_sqrt
    pdot_o = escape_velocity(prox.closest_point, obstacle_center, gains.k)
    rhs = gv * pdot_o - j_wco @ tr.jwe_pinv @ np.asarray(pdot_e, float)
    n = tr.null_dir
    if n is not None:
        # P = n n^T, so J_co P = b n^T is rank one and its damped inverse is n b^T / (|b|^2 + damping^2)
        b = j_co @ n
        sigma = float(np.linalg.norm(b))
        damping = max(0.0, AVOID_FLOOR - sigma)
        term = n * (gh * float(b @ rhs) / (sigma * sigma + damping * damping)) if sigma > 0.0 else np.zeros(4)
    else:
        proj = null_space_projector(tr.jac, params.pinv_tol)
        sub = damped_pseudo_inverse(j_co @ proj, AVOID_FLOOR, params.pinv_tol)
        term = gh * proj @ sub @ rhs
    return term, gh, gv


def limit_step(dq, cap: float | None = None) -> np.ndarray:
    """Scale ``dq`` uniformly so that no coordinate exceeds ``cap`` (default MAX_JOINT_STEP)."""
    cap = MAX_JOINT_STEP if cap is None else cap
    peak = float(np.max(np.abs(dq)))
    return dq * (cap / peak) if peak > cap else dq


def iik_step_basic(q_old, pdot_f, params: ManipulatorParams, weights=None) -> np.ndarray:
    """One weighted pseudo-inverse step with no null-space motion."""
    q_old = np.asarray(q_old, float)
    tr = _tracking_step(q_old, pdot_f, params, weights)
    return canonical_config(q_old + tr.dq)


def iik_step_avoid(q_old, pdot_f, pdot_e, prox: ProximityResult, obstacles, gains: AvoidanceGains,
                   params: ManipulatorParams, weights=None) -> np.ndarray:
    """Tracking step plus the null-space escape term for the closest obstacle."""
    q_old = np.asarray(q_old, float)
    obs = obstacles if isinstance(obstacles, np.ndarray) else obstacle_array(obstacles)
    tr = _tracking_step(q_old, pdot_f, params, weights)
    term, _, _ = _avoidance_term(q_old, pdot_e, prox, obs[prox.obstacle_index, :3], gains, params, tr)
    return canonical_config(q_old + tr.dq + term)


@dataclass
class StepRecord:
    config: np.ndarray
    ee_actual: np.ndarray
    ee_expected: np.ndarray
    tracking_error: float
    clearances: np.ndarray
    closest_link: Link | None
    g_h: float = 0.0
    g_v: float = 0.0
    avoidance_active: bool = False
    # |J_e @ avoidance term| of the step that produced this record
    nullspace_residual: float = 0.0
    step_time: float = 0.0  # CPU seconds of the planning thread, so preemption is not counted


@dataclass
class Trajectory:
    steps: list[StepRecord]
    path: np.ndarray
    failure_reason: str = "none"
    notes: dict = field(default_factory=dict)

    @property
    def configs(self) -> np.ndarray:
        return np.array([s.config for s in self.steps])

    @property
    def tracking_errors(self) -> np.ndarray:
        return np.array([s.tracking_error for s in self.steps])

    @property
    def min_clearances(self) -> np.ndarray:
        """Per-step minimum clearance over all obstacles (inf without obstacles)."""
        return np.array([s.clearances.min() if s.clearances.size else np.inf for s in self.steps])

    @property
    def collided(self) -> bool:
        return bool(np.any(self.min_clearances <= 0.0))

    @property
    def step_times(self) -> np.ndarray:
        return np.array([s.step_time for s in self.steps[1:]])


def _record(q, expected, obs, params, **extra) -> StepRecord:
    ee = end_effector(q, params)
    if obs.shape[0]:
        prox = manipulator_min_distance(q, params, obs)
        clearances, link = prox.obstacle_clearances.copy(), prox.link
    else:
        clearances, link = np.zeros(0), None
    expected = np.asarray(expected, float)
    return StepRecord(np.asarray(q, float).copy(), ee, expected.copy(), float(np.linalg.norm(ee - expected)),
                      clearances, link, **extra)


def _prime(q, state, obs, params: ManipulatorParams, weighting: bool) -> None:
    """Run the step kernels once, untimed, so the first timed step starts with warm caches."""
    w = joint_limit_weights(q, state, params.weighting_limits) if weighting else None
    _tracking_step(q, np.zeros(3), params, w)
    if obs.shape[0]:
        prox = manipulator_min_distance(q, params, obs)
        point_jacobian(q, PointDescriptor(prox.link, prox.local_coord), params)


@contextmanager
def gc_paused():
    """Suspend the cyclic garbage collector for the duration of a control loop."""
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def plan_motion(path, q_init, obstacles, gains: AvoidanceGains | None, params: ManipulatorParams,
                avoidance: bool = True, correct_drift: bool = True, weighting: bool = True,
                start_tolerance: float = 1.0) -> Trajectory:
    """Follow ``path`` with the end-effector starting from ``q_init``.

    With ``avoidance=False`` the null-space vector is zero throughout. Steps
    that end in collision are recorded, not aborted; check
    :attr:`Trajectory.collided`.
    """
    path = np.asarray(path, dtype=float).reshape(-1, 3)
    if path.shape[0] == 0:
        raise ValueError("path must contain at least one point")
    obs = obstacles if isinstance(obstacles, np.ndarray) else obstacle_array(obstacles)
    if avoidance and obs.shape[0] and gains is None:
        raise ValueError("avoidance needs gains")
    q = canonical_config(q_init)
    if np.linalg.norm(end_effector(q, params) - path[0]) > start_tolerance:
        raise ValueError("initial configuration does not place the end-effector on the path start")

    limits = params.weighting_limits
    state = WeightState.initial(q, limits)
    steps = [_record(q, path[0], obs, params)]
    # a collector pass mid-loop costs several steps' worth of time
    _prime(q, state, obs, params, weighting)
    with gc_paused():
        for i in range(path.shape[0] - 1):
            t0 = time.thread_time()
            pdot_e = path[i + 1] - path[i]
            p_actual = end_effector(q, params)
            pdot_f = corrected_task_velocity(path[i], p_actual, pdot_e) if correct_drift else pdot_e
            w = joint_limit_weights(q, state, limits) if weighting else None
            tr = _tracking_step(q, pdot_f, params, w)
            dq = tr.dq
            gh = gv = 0.0
            active = False
            residual = 0.0
            if avoidance and obs.shape[0]:
                prox = manipulator_min_distance(q, params, obs)
                gh = gain_h(prox.clearance, gains)
                gv = gain_v(prox.clearance, gains)
                if gh > 0.0 and not at_end_effector(prox, params):
                    center = obs[prox.obstacle_index, :3]
                    j_co = point_jacobian(q, PointDescriptor(prox.link, prox.local_coord), params)
                    if np.dot(j_co @ dq, center - prox.closest_point) > 0.0:
                        term, gh, gv = _avoidance_term(q, pdot_e, prox, center, gains, params, tr, j_co)
                        dq = dq + term
                        active = True
            q_new = canonical_config(q + limit_step(dq))
            elapsed = time.thread_time() - t0
            if active:
                residual = float(np.linalg.norm(tr.jac @ term))
            # W at the next step compares against the gradient at the configuration left behind
            state = WeightState(q, joint_limit_gradient(q, limits))
            q = q_new
            steps.append(_record(q, path[i + 1], obs, params, g_h=gh, g_v=gv, avoidance_active=active,
                                 nullspace_residual=residual, step_time=elapsed))
    traj = Trajectory(steps, path)
    if traj.collided:
        traj.failure_reason = "collision"
    return traj
