"""Hot numeric kernels: chain geometry, point Jacobians, closest-point queries.

Everything here takes plain floats and float64 arrays so it compiles under
numba. Link ids: 0 = continuum 1, 1 = rigid 1, 2 = continuum 2, 3 = rigid 2.
"""
import math

import numpy as np

from ._accel import njit

# below this bend angle the arc functions switch to their Taylor series
SERIES_THETA = 1e-3

TAG_ON_ARC = 0
TAG_START = 1
TAG_END = 2
TAG_DEGENERATE = 3

ON_ARC_TOL = 1e-9
DEGENERATE_TOL = 1e-12


@njit
def rot_z(a):
    c = math.cos(a)
    s = math.sin(a)
    out = np.zeros((3, 3))
    out[0, 0] = c
    out[0, 1] = -s
    out[1, 0] = s
    out[1, 1] = c
    out[2, 2] = 1.0
    return out


@njit
def rot_y(a):
    c = math.cos(a)
    s = math.sin(a)
    out = np.zeros((3, 3))
    out[0, 0] = c
    out[0, 2] = s
    out[1, 1] = 1.0
    out[2, 0] = -s
    out[2, 2] = c
    return out


@njit
def drot_y(a):
    c = math.cos(a)
    s = math.sin(a)
    out = np.zeros((3, 3))
    out[0, 0] = -s
    out[0, 2] = c
    out[2, 0] = -c
    out[2, 2] = -s
    return out


@njit
def skew_z():
    out = np.zeros((3, 3))
    out[0, 1] = -1.0
    out[1, 0] = 1.0
    return out


@njit
def segment_rotation(theta, delta):
    a = rot_z(delta)
    return a @ rot_y(theta) @ a.T


@njit
def arc_terms(theta, beta):
    """f = (1 - cos bt)/t, g = sin(bt)/t and their theta-derivatives."""
    if abs(theta) < SERIES_THETA:
        t = theta
        b2 = beta * beta
        b3 = b2 * beta
        b4 = b2 * b2
        b5 = b4 * beta
        b6 = b4 * b2
        b7 = b6 * beta
        t2 = t * t
        t3 = t2 * t
        t4 = t2 * t2
        t5 = t4 * t
        t6 = t3 * t3
        f = b2 * t / 2.0 - b4 * t3 / 24.0 + b6 * t5 / 720.0
        g = beta - b3 * t2 / 6.0 + b5 * t4 / 120.0 - b7 * t6 / 5040.0
        df = b2 / 2.0 - b4 * t2 / 8.0 + b6 * t4 / 144.0
        dg = -b3 * t / 3.0 + b5 * t3 / 30.0 - b7 * t5 / 840.0
        return f, g, df, dg
    x = beta * theta
    half = math.sin(0.5 * x)
    omc = 2.0 * half * half
    sx = math.sin(x)
    cx = math.cos(x)
    f = omc / theta
    g = sx / theta
    df = (x * sx - omc) / (theta * theta)
    dg = (x * cx - sx) / (theta * theta)
    return f, g, df, dg


@njit
def chain_points(q, ls, lg1, lg2):
    """Joint points P_r0, P_s1, P_r1, P_s2, P_r2 as a (5, 3) array."""
    a1 = rot_z(q[1])
    a2 = rot_z(q[3])
    r1 = a1 @ rot_y(q[0]) @ a1.T
    r2 = a2 @ rot_y(q[2]) @ a2.T
    f1, g1, _, _ = arc_terms(q[0], 1.0)
    f2, g2, _, _ = arc_terms(q[2], 1.0)
    u1 = np.array([ls * f1, 0.0, ls * g1])
    u2 = np.array([ls * f2, 0.0, ls * g2])
    pts = np.zeros((5, 3))
    pts[1] = a1 @ u1
    pts[2] = pts[1] + r1[:, 2] * lg1
    pts[3] = pts[2] + r1 @ (a2 @ u2)
    r12 = r1 @ r2
    pts[4] = pts[3] + r12[:, 2] * lg2
    return pts


@njit
def point_and_jacobian(q, link, s, ls, lg1, lg2):
    """Position and 3x4 Jacobian of a centerline point.

    ``s`` is the arc fraction beta on continuum links and the distance from
    the link start on rigid links.
    """
    t1 = q[0]
    d1 = q[1]
    t2 = q[2]
    d2 = q[3]
    k = skew_z()
    jac = np.zeros((3, 4))
    a1 = rot_z(d1)
    r1 = a1 @ rot_y(t1) @ a1.T
    dr1_dt = a1 @ drot_y(t1) @ a1.T
    dr1_dd = k @ r1 - r1 @ k

    beta1 = s if link == 0 else 1.0
    f1, g1, df1, dg1 = arc_terms(t1, beta1)
    u1 = np.array([ls * f1, 0.0, ls * g1])
    du1 = np.array([ls * df1, 0.0, ls * dg1])
    ps1 = a1 @ u1
    j_t1 = a1 @ du1
    j_d1 = k @ ps1
    if link == 0:
        jac[:, 0] = j_t1
        jac[:, 1] = j_d1
        return ps1, jac

    if link == 1:
        p = ps1 + r1[:, 2] * s
        jac[:, 0] = j_t1 + dr1_dt[:, 2] * s
        jac[:, 1] = j_d1 + dr1_dd[:, 2] * s
        return p, jac

    pr1 = ps1 + r1[:, 2] * lg1
    j_t1 = j_t1 + dr1_dt[:, 2] * lg1
    j_d1 = j_d1 + dr1_dd[:, 2] * lg1

    a2 = rot_z(d2)
    beta2 = s if link == 2 else 1.0
    f2, g2, df2, dg2 = arc_terms(t2, beta2)
    u2 = np.array([ls * f2, 0.0, ls * g2])
    du2 = np.array([ls * df2, 0.0, ls * dg2])
    v2 = a2 @ u2
    ps2 = pr1 + r1 @ v2
    j_t1 = j_t1 + dr1_dt @ v2
    j_d1 = j_d1 + dr1_dd @ v2
    j_t2 = r1 @ (a2 @ du2)
    j_d2 = r1 @ (k @ v2)
    if link == 2:
        jac[:, 0] = j_t1
        jac[:, 1] = j_d1
        jac[:, 2] = j_t2
        jac[:, 3] = j_d2
        return ps2, jac

    r2 = a2 @ rot_y(t2) @ a2.T
    dr2_dt = a2 @ drot_y(t2) @ a2.T
    dr2_dd = k @ r2 - r2 @ k
    z2 = r2[:, 2] * s
    p = ps2 + r1 @ z2
    jac[:, 0] = j_t1 + dr1_dt @ z2
    jac[:, 1] = j_d1 + dr1_dd @ z2
    jac[:, 2] = j_t2 + r1 @ (dr2_dt[:, 2] * s)
    jac[:, 3] = j_d2 + r1 @ (dr2_dd[:, 2] * s)
    return p, jac


@njit
def chain_frames(q, ls, lg1, lg2):
    """Joint points plus arc centers and plane normals of both continuum segments.

    A center is NaN when its segment is exactly straight.
    """
    pts = chain_points(q, ls, lg1, lg2)
    a1 = rot_z(q[1])
    r1 = a1 @ rot_y(q[0]) @ a1.T
    pre2 = r1 @ rot_z(q[3])
    centers = np.full((2, 3), np.nan)
    normals = np.zeros((2, 3))
    normals[0] = a1[:, 1]
    normals[1] = pre2[:, 1]
    if q[0] > 0.0:
        centers[0] = pts[0] + a1[:, 0] * (ls / q[0])
    if q[2] > 0.0:
        centers[1] = pts[2] + pre2[:, 0] * (ls / q[2])
    return pts, centers, normals


@njit
def _norm3(v):
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@njit
def _angle(a, b):
    cx = a[1] * b[2] - a[2] * b[1]
    cy = a[2] * b[0] - a[0] * b[2]
    cz = a[0] * b[1] - a[1] * b[0]
    return math.atan2(math.sqrt(cx * cx + cy * cy + cz * cz), a[0] * b[0] + a[1] * b[1] + a[2] * b[2])


@njit
def closest_on_circle(center, normal, lam, p):
    """Closest circle point, or ``ok=False`` when P projects onto the center."""
    op = p - center
    od = op - np.dot(normal, op) * normal
    n = _norm3(od)
    if n < DEGENERATE_TOL:
        return center.copy(), False
    return center + lam * od / n, True


@njit
def closest_on_arc(center, normal, lam, start, end, theta, p):
    """Four-case closest-point rule on a circular arc.

    Returns (point, tag, beta) with beta the arc fraction of the point.
    """
    cs, ok = closest_on_circle(center, normal, lam, p)
    if not ok:
        return start.copy(), TAG_DEGENERATE, 0.0
    a = start - center
    b = end - center
    c = cs - center
    theta_s = _angle(a, c)
    theta_e = _angle(b, c)
    # the sum test is ambiguous for a semicircle; the signed sweep angle is not
    tangent = np.cross(normal, a)
    sweep = math.atan2(np.dot(c, tangent) / lam, np.dot(c, a) / lam)
    if sweep < -ON_ARC_TOL:
        sweep += 2.0 * math.pi
    if abs(theta_s + theta_e - theta) <= ON_ARC_TOL and sweep <= theta + ON_ARC_TOL:
        beta = min(max(theta_s / theta, 0.0), 1.0)
        return cs, TAG_ON_ARC, beta
    if _norm3(p - start) <= _norm3(p - end):
        return start.copy(), TAG_START, 0.0
    return end.copy(), TAG_END, 1.0


@njit
def closest_on_segment(s, e, p):
    """Closest point on segment s-e and its clamped fraction alpha."""
    se = e - s
    n2 = np.dot(se, se)
    if n2 < DEGENERATE_TOL * DEGENERATE_TOL:
        return s.copy(), 0.0
    alpha = np.dot(p - s, se) / n2
    if alpha <= 0.0:
        return s.copy(), 0.0
    if alpha >= 1.0:
        return e.copy(), 1.0
    return s + alpha * se, alpha


@njit
def link_closest(pts, centers, normals, q, link, ls, lg1, lg2, eps, p):
    """Closest centerline point of one link to P: (point, local coordinate)."""
    if link == 1 or link == 3:
        c, alpha = closest_on_segment(pts[link], pts[link + 1], p)
        length = lg1 if link == 1 else lg2
        return c, alpha * length
    theta = q[0] if link == 0 else q[2]
    if theta < eps:
        return closest_on_segment(pts[link], pts[link + 1], p)
    i = link // 2
    c, _, beta = closest_on_arc(centers[i], normals[i], ls / theta, pts[link], pts[link + 1], theta, p)
    return c, beta


@njit
def min_distance(q, ls, lg1, lg2, eps, body_radius, obstacles):
    """Global minimum clearance between the chain and sphere obstacles.

    ``obstacles`` is (m, 4): center xyz and radius. Returns
    (clearance, point, link, local, obstacle index, per-obstacle clearances,
    per-obstacle closest link). Ties go to the more distal link.
    """
    m = obstacles.shape[0]
    per_obs = np.full(m, np.inf)
    per_link = np.zeros(m, dtype=np.int64)
    best = np.inf
    best_point = np.zeros(3)
    best_link = -1
    best_local = 0.0
    best_obs = -1
    pts, centers, normals = chain_frames(q, ls, lg1, lg2)
    for j in range(m):
        p = obstacles[j, :3]
        rad = obstacles[j, 3]
        for link in range(4):
            c, local = link_closest(pts, centers, normals, q, link, ls, lg1, lg2, eps, p)
            clear = _norm3(p - c) - rad - body_radius
            if clear <= per_obs[j]:
                per_obs[j] = clear
                per_link[j] = link
            if clear <= best:
                best = clear
                best_point = c
                best_link = link
                best_local = local
                best_obs = j
    return best, best_point, best_link, best_local, best_obs, per_obs, per_link


@njit
def config_clear(q, ls, lg1, lg2, eps, body_radius, obstacles):
    """True iff every link clears every obstacle (strictly positive clearance)."""
    m = obstacles.shape[0]
    pts, centers, normals = chain_frames(q, ls, lg1, lg2)
    for j in range(m):
        p = obstacles[j, :3]
        rad = obstacles[j, 3]
        for link in range(4):
            c, _ = link_closest(pts, centers, normals, q, link, ls, lg1, lg2, eps, p)
            if _norm3(p - c) - rad - body_radius <= 0.0:
                return False
    return True


@njit
def segment_clear(a, b, obstacles, clearance):
    """True iff segment a-b stays farther than radius + clearance from every center."""
    for j in range(obstacles.shape[0]):
        p = obstacles[j, :3]
        c, _ = closest_on_segment(a, b, p)
        if _norm3(p - c) <= obstacles[j, 3] + clearance:
            return False
    return True


@njit
def wrapped_delta(a, b):
    """b - a with the wrist coordinates (1 and 3) taken the short way around."""
    d = b - a
    for i in (1, 3):
        d[i] = (d[i] + math.pi) % (2.0 * math.pi) - math.pi
    return d


@njit
def edge_clear(qa, qb, resolution, ls, lg1, lg2, eps, body_radius, obstacles):
    """Collision-check the straight C-space edge qa-qb at ``resolution`` rad per coordinate.

    The endpoint qb is checked; qa is assumed already checked.
    """
    d = wrapped_delta(qa, qb)
    peak = 0.0
    for i in range(4):
        peak = max(peak, abs(d[i]))
    n = max(1, int(math.ceil(peak / resolution)))
    q = np.empty(4)
    for k in range(1, n + 1):
        t = k / n
        for i in range(4):
            q[i] = qa[i] + t * d[i]
        for i in (1, 3):
            q[i] = q[i] % (2.0 * math.pi)
        if not config_clear(q, ls, lg1, lg2, eps, body_radius, obstacles):
            return False
    return True
