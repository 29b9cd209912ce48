"""Jacobians, pseudo-inverses and joint-limit weighting for the IIK solver."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .kinematics import Link, ManipulatorParams, _q

FD_STEP = 1e-6
# singular values of the effective-task Jacobian below this are treated as lost
SINGULAR_ABS_TOL = 1e-9


@dataclass(frozen=True)
class PointDescriptor:
    """A centerline point: arc fraction on continuum links, distance on rigid links."""

    link: Link
    local: float

    def __post_init__(self):
        object.__setattr__(self, "link", Link(self.link))

    def validate(self, params: ManipulatorParams) -> None:
        hi = params.link_length(self.link)
        if not 0.0 <= self.local <= hi:
            raise ValueError(f"local coordinate {self.local} outside [0, {hi}] on {self.link.label}")


def end_effector_descriptor(params: ManipulatorParams) -> PointDescriptor:
    return PointDescriptor(Link.RIGID2, params.rigid_lengths[1])


def finite_difference_jacobian(func, q, step: float = FD_STEP) -> np.ndarray:
    """Central differences of a point-valued function of the configuration."""
    q = np.array(q, dtype=float)
    cols = []
    for i in range(q.size):
        dq = np.zeros_like(q)
        dq[i] = step
        cols.append((func(q + dq) - func(q - dq)) / (2.0 * step))
    return np.stack(cols, axis=1)


def point_jacobian(q, pd: PointDescriptor, params: ManipulatorParams) -> np.ndarray:
    """3x4 Jacobian of the centerline point ``pd``."""
    qa = _q(q)
    ls, lg1, lg2 = params.lengths
    if params.analytic_jacobian:
        _, jac = K.point_and_jacobian(qa, int(pd.link), float(pd.local), ls, lg1, lg2)
        return jac
    link, local = int(pd.link), float(pd.local)
    return finite_difference_jacobian(lambda x: K.point_and_jacobian(x, link, local, ls, lg1, lg2)[0], qa)


def end_effector_jacobian(q, params: ManipulatorParams) -> np.ndarray:
    return point_jacobian(q, end_effector_descriptor(params), params)


def svd_inverse(u, s, vt, sigma_floor: float = 0.0, tol: float = 1e-8) -> np.ndarray:
    """Inverse assembled from a thin SVD, damped by ``max(0, sigma_floor - sigma_min)``."""
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((vt.shape[1], u.shape[0]))
    keep = s > tol * s[0]
    damping = max(0.0, sigma_floor - s[keep].min())
    inv = np.zeros_like(s)
    inv[keep] = s[keep] / (s[keep] ** 2 + damping**2)
    return (vt.T * inv) @ u.T


def pseudo_inverse(m: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Moore-Penrose inverse; singular values below ``tol * sigma_max`` are dropped."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return svd_inverse(u, s, vt, 0.0, tol)


def damped_pseudo_inverse(m: np.ndarray, sigma_floor: float, tol: float = 1e-8) -> np.ndarray:
    """Damped least-squares inverse with damping ``max(0, sigma_floor - sigma_min)``.

    Equals :func:`pseudo_inverse` whenever the smallest retained singular
    value is at least ``sigma_floor``.
    """
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return svd_inverse(u, s, vt, sigma_floor, tol)


def null_space_projector(jac: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """``I - J^+ J``, the orthogonal projector onto null(J)."""
    jac = np.asarray(jac, dtype=float)
    _, s, vt = np.linalg.svd(jac, full_matrices=True)
    rank = int(np.count_nonzero(s > tol * s[0])) if s.size and s[0] > 0.0 else 0
    basis = vt[rank:]
    return basis.T @ basis


def joint_limit_gradient(q, limits) -> np.ndarray:
    """|dH/dq| of the joint-limit criterion H = sum (hi-lo)^2 / (4 (hi-q)(q-lo)).

    Only bend angles contribute; wrist angles are periodic and get zero.
    """
    q = np.asarray(q, dtype=float)
    grad = np.zeros(4)
    for i in (0, 2):
        lo, hi = limits[i]
        span = hi - lo
        # keep the gradient finite exactly at a limit
        x = min(max(q[i], lo + 1e-12 * span), hi - 1e-12 * span)
        grad[i] = abs(span**2 * (2.0 * x - hi - lo) / (4.0 * (hi - x) ** 2 * (x - lo) ** 2))
    return grad


@dataclass(frozen=True)
class WeightState:
    previous_config: np.ndarray
    limit_gradient: np.ndarray

    @classmethod
    def initial(cls, q, limits) -> "WeightState":
        q = np.array(q, dtype=float)
        return cls(q, joint_limit_gradient(q, limits))


def joint_limit_weights(q, state: WeightState, limits) -> np.ndarray:
    """Diagonal weight matrix: 1 + |dH/dq_i| while coordinate i approaches a limit, else 1."""
    grad = joint_limit_gradient(q, limits)
    w = np.where(grad - state.limit_gradient > 0.0, 1.0 + grad, 1.0)
    return np.diag(w)


def weighted(jac: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(J W^-1/2, W^-1/2)`` for a diagonal weight matrix."""
    d = 1.0 / np.sqrt(np.diag(w))
    return jac * d, np.diag(d)


def smallest_singular_value(m: np.ndarray) -> float:
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[-1]) if s.size else math.nan
