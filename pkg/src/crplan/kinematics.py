"""Constant-curvature forward kinematics of the two-continuum, two-rigid chain.

The chain is continuum 1, rigid 1, continuum 2, rigid 2. Each continuum
segment of length ``L_s`` bends by ``theta`` in a plane rotated by the wrist
angle ``delta`` about the local z axis; rigid links extend along the local z
axis. All lengths are in millimetres, all angles in radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from . import _kernels as K

TWO_PI = 2.0 * math.pi


class Link(IntEnum):
    CONTINUUM1 = 0
    RIGID1 = 1
    CONTINUUM2 = 2
    RIGID2 = 3

    @property
    def label(self) -> str:
        return ("C1", "R1", "C2", "R2")[self]

    @property
    def is_continuum(self) -> bool:
        return self in (Link.CONTINUUM1, Link.CONTINUUM2)


class Config(NamedTuple):
    """Joint configuration ``(theta1, delta1, theta2, delta2)``."""

    theta1: float
    delta1: float
    theta2: float
    delta2: float

    def canonical(self) -> "Config":
        return Config(*canonical_config(self))


def canonical_config(q) -> np.ndarray:
    """Bring a configuration into theta in [0, pi], delta in [0, 2 pi).

    A negative bend is the same shape as the positive bend in the opposite
    plane, so (theta, delta) with theta < 0 maps exactly to
    (-theta, delta + pi). Bends beyond pi are clamped.
    """
    q = np.array(q, dtype=float)
    for i in (0, 2):
        if q[i] < 0.0:
            q[i] = -q[i]
            q[i + 1] += math.pi
        q[i] = min(q[i], math.pi)
        q[i + 1] = q[i + 1] % TWO_PI
    return q


DEFAULT_JOINT_LIMITS = ((0.0, math.pi), (0.0, TWO_PI), (0.0, math.pi), (0.0, TWO_PI))


@dataclass(frozen=True)
class ManipulatorParams:
    """Geometry and numerical tolerances of the manipulator.

    The default lengths place FK(pi/9, 0, pi/9, 0) at (51, 0, 101) to within
    1e-3 mm and, among all such lengths, put FK(pi/3, pi, 2pi/5, pi/3)
    closest to (-50, 44, 71) (0.42 mm off).
    """

    spring_length: float = 23.982
    rigid_lengths: tuple[float, float] = (28.595, 39.121)
    body_radius: float = 3.0
    theta_eps: float = 1e-6
    joint_limits: tuple[tuple[float, float], ...] = DEFAULT_JOINT_LIMITS
    pinv_tol: float = 1e-8
    analytic_jacobian: bool = True

    def __post_init__(self):
        if not self.spring_length > 0:
            raise ValueError("spring_length must be > 0")
        if len(self.rigid_lengths) != 2 or not all(v > 0 for v in self.rigid_lengths):
            raise ValueError("rigid_lengths must be two positive lengths")
        if not self.body_radius >= 0:
            raise ValueError("body_radius must be >= 0")
        if not 0 < self.theta_eps < 1e-2:
            raise ValueError("theta_eps must satisfy 0 < theta_eps << 1")
        if len(self.joint_limits) != 4 or any(lo >= hi for lo, hi in self.joint_limits):
            raise ValueError("joint_limits must be four [lo, hi] pairs with lo < hi")
        if not self.pinv_tol > 0:
            raise ValueError("pinv_tol must be > 0")
        object.__setattr__(self, "rigid_lengths", tuple(float(v) for v in self.rigid_lengths))
        object.__setattr__(self, "joint_limits", tuple((float(lo), float(hi)) for lo, hi in self.joint_limits))

    @property
    def lengths(self) -> tuple[float, float, float]:
        return self.spring_length, self.rigid_lengths[0], self.rigid_lengths[1]

    @property
    def weighting_limits(self) -> tuple[tuple[float, float], ...]:
        """Limits seen by the joint-limit weighting.

        A bend of zero is the straight pose, not a stop: (theta, delta) and
        (-theta, delta + pi) are the same shape, so a bend range [0, hi] is
        weighted as [-hi, hi] and only the approach to the bend limit is
        penalized.
        """
        lim = list(self.joint_limits)
        for i in (0, 2):
            lo, hi = lim[i]
            if lo == 0.0:
                lim[i] = (-hi, hi)
        return tuple(lim)

    def link_length(self, link: Link) -> float:
        """Range of the local coordinate on ``link`` (1 for continuum links)."""
        return 1.0 if Link(link).is_continuum else self.rigid_lengths[(int(link) - 1) // 2]


@dataclass
class FrameChain:
    joint_points: np.ndarray  # (5, 3): P_r0, P_s1, P_r1, P_s2, P_r2
    segment_rotations: np.ndarray  # (2, 3, 3)
    arc_centers: list  # per continuum segment, None when straight
    arc_normals: np.ndarray  # (2, 3)
    arc_radii: list

    @property
    def end_effector(self) -> np.ndarray:
        return self.joint_points[4]


def _q(q) -> np.ndarray:
    arr = np.asarray(q, dtype=np.float64)
    if arr.shape != (4,):
        raise ValueError(f"configuration must have 4 entries, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def segment_rotation(theta: float, delta: float) -> np.ndarray:
    """``Rz(delta) Ry(theta) Rz(-delta)``, the rotation across one continuum segment."""
    return K.segment_rotation(float(theta), float(delta))


def spring_endpoint_local(theta: float, params: ManipulatorParams) -> np.ndarray:
    """Tip of a bent spring in its own bending plane."""
    if theta < params.theta_eps:
        return np.array([0.0, 0.0, params.spring_length])
    lam = params.spring_length / theta
    return lam * np.array([1.0 - math.cos(theta), 0.0, math.sin(theta)])


def forward_kinematics(q, params: ManipulatorParams) -> FrameChain:
    qa = _q(q)
    ls, lg1, lg2 = params.lengths
    pts, centers, normals = K.chain_frames(qa, ls, lg1, lg2)
    rots = np.stack([segment_rotation(qa[0], qa[1]), segment_rotation(qa[2], qa[3])])
    arc_centers = []
    radii = []
    for i, theta in enumerate((qa[0], qa[2])):
        if theta < params.theta_eps:
            arc_centers.append(None)
            radii.append(math.inf)
        else:
            arc_centers.append(centers[i].copy())
            radii.append(ls / theta)
    return FrameChain(pts, rots, arc_centers, normals, radii)


def end_effector(q, params: ManipulatorParams) -> np.ndarray:
    ls, lg1, lg2 = params.lengths
    return K.chain_points(_q(q), ls, lg1, lg2)[4]


def point_on_link(q, link: Link, local: float, params: ManipulatorParams) -> np.ndarray:
    """Centerline point on ``link`` at arc fraction (continuum) or distance (rigid)."""
    ls, lg1, lg2 = params.lengths
    p, _ = K.point_and_jacobian(_q(q), int(link), float(local), ls, lg1, lg2)
    return p


def point_on_continuum(q, segment_index: int, beta: float, params: ManipulatorParams) -> np.ndarray:
    if segment_index not in (1, 2):
        raise ValueError("segment_index must be 1 or 2")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return point_on_link(q, Link(2 * (segment_index - 1)), beta, params)


def point_on_rigid(q, segment_index: int, length: float, params: ManipulatorParams) -> np.ndarray:
    if segment_index not in (1, 2):
        raise ValueError("segment_index must be 1 or 2")
    if not 0.0 <= length <= params.rigid_lengths[segment_index - 1]:
        raise ValueError("length must lie within the rigid link")
    return point_on_link(q, Link(2 * segment_index - 1), length, params)
