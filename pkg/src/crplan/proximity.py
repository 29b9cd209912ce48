"""Closest points between sphere obstacles and the manipulator centerline."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .kinematics import Link, ManipulatorParams, _q

ARC_TAGS = {
    K.TAG_ON_ARC: "on-arc",
    K.TAG_START: "start",
    K.TAG_END: "end",
    K.TAG_DEGENERATE: "degenerate",
}


class DegenerateProjectionError(ValueError):
    """The query point projects onto the circle center; every circle point is equidistant."""


@dataclass(frozen=True)
class SphereObstacle:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 3:
            raise ValueError("obstacle center must have 3 coordinates")
        if not self.radius > 0:
            raise ValueError("obstacle radius must be > 0")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))


def obstacle_array(obstacles: Sequence[SphereObstacle]) -> np.ndarray:
    """Pack obstacles into the (m, 4) layout used by the kernels."""
    arr = np.zeros((len(obstacles), 4))
    for i, ob in enumerate(obstacles):
        arr[i, :3] = ob.center
        arr[i, 3] = ob.radius
    return arr


@dataclass(frozen=True)
class ArcSegment:
    center: np.ndarray
    normal: np.ndarray
    radius: float
    start: np.ndarray
    end: np.ndarray
    bend_angle: float

    @classmethod
    def of_segment(cls, q, index: int, params: ManipulatorParams) -> "ArcSegment":
        """Arc of continuum segment ``index`` (1 or 2) at configuration ``q``."""
        qa = _q(q)
        theta = qa[2 * (index - 1)]
        if theta < params.theta_eps:
            raise ValueError("segment is straight; it has no arc")
        pts, centers, normals = K.chain_frames(qa, *params.lengths)
        i = index - 1
        return cls(centers[i].copy(), normals[i].copy(), params.spring_length / theta,
                   pts[2 * i].copy(), pts[2 * i + 1].copy(), float(theta))


@dataclass(frozen=True)
class ProximityResult:
    closest_point: np.ndarray
    clearance: float
    link: Link
    local_coord: float
    obstacle_index: int
    obstacle_clearances: np.ndarray
    obstacle_links: tuple[Link, ...] = ()


def _vec(p) -> np.ndarray:
    return np.ascontiguousarray(p, dtype=np.float64)


def closest_point_on_circle(arc: ArcSegment, p) -> np.ndarray:
    c, ok = K.closest_on_circle(_vec(arc.center), _vec(arc.normal), float(arc.radius), _vec(p))
    if not ok:
        raise DegenerateProjectionError("point projects onto the circle center")
    return c


def closest_point_on_arc(arc: ArcSegment, p) -> tuple[np.ndarray, str]:
    """Closest arc point and which case of the rule produced it."""
    c, tag, _ = K.closest_on_arc(_vec(arc.center), _vec(arc.normal), float(arc.radius),
                                 _vec(arc.start), _vec(arc.end), float(arc.bend_angle), _vec(p))
    return c, ARC_TAGS[tag]


def closest_point_on_segment(s, e, p) -> tuple[np.ndarray, float]:
    """Closest point on segment s-e and alpha in [0, 1]; a degenerate segment returns s."""
    return K.closest_on_segment(_vec(s), _vec(e), _vec(p))


def manipulator_min_distance(q, params: ManipulatorParams, obstacles) -> ProximityResult:
    """Minimum clearance over all links and obstacles.

    ``obstacles`` may be a sequence of :class:`SphereObstacle` or an (m, 4) array.
    """
    obs = obstacles if isinstance(obstacles, np.ndarray) else obstacle_array(obstacles)
    if obs.shape[0] == 0:
        raise ValueError("at least one obstacle is required")
    ls, lg1, lg2 = params.lengths
    clear, point, link, local, idx, per_obs, per_link = K.min_distance(
        _q(q), ls, lg1, lg2, params.theta_eps, params.body_radius, obs)
    return ProximityResult(point, float(clear), Link(link), float(local), int(idx), per_obs,
                           tuple(Link(int(v)) for v in per_link))


def collision_check_config(q, params: ManipulatorParams, obstacles) -> bool:
    """True iff the configuration is collision-free (every clearance strictly positive)."""
    obs = obstacles if isinstance(obstacles, np.ndarray) else obstacle_array(obstacles)
    if obs.shape[0] == 0:
        return True
    ls, lg1, lg2 = params.lengths
    return bool(K.config_clear(_q(q), ls, lg1, lg2, params.theta_eps, params.body_radius, obs))
