"""Shared fixtures and independent oracles.

The oracles deliberately avoid the package's closed-form kinematics: the
chain is rebuilt from 4x4 homogeneous transforms of many short straight
micro-links, and closest points come from dense sampling.
"""
import math
from types import SimpleNamespace

import numpy as np
import pytest

from crplan.kinematics import ManipulatorParams


@pytest.fixture
def params():
    return ManipulatorParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def homogeneous(r=None, t=None):
    h = np.eye(4)
    if r is not None:
        h[:3, :3] = r
    if t is not None:
        h[:3, 3] = t
    return h


def random_config(rng, theta_lo=0.0):
    return rng.uniform([theta_lo, 0.0, theta_lo, 0.0], [math.pi, 2 * math.pi, math.pi, 2 * math.pi])


def microlink_chain(q, params, n_links=10_000):
    """Centerline of the chain from composed micro-link transforms.

    Returns ``(points, joints)``: all sampled centerline points in order and
    the five joint points (base, spring 1 end, rigid 1 end, spring 2 end,
    rigid 2 end). Each micro-link is a half bend, a straight step, and a
    half bend, so the polyline converges to the arc quadratically.
    """
    ls, lg1, lg2 = params.lengths
    frame = np.eye(4)
    pts = [frame[:3, 3].copy()]
    joints = [frame[:3, 3].copy()]
    for theta, delta, lg in ((q[0], q[1], lg1), (q[2], q[3], lg2)):
        half = homogeneous(rot_z(delta) @ rot_y(theta / (2 * n_links)) @ rot_z(-delta))
        step = homogeneous(t=[0.0, 0.0, ls / n_links])
        link = half @ step @ half
        seg = np.empty((n_links, 3))
        for i in range(n_links):
            frame = frame @ link
            seg[i] = frame[:3, 3]
        pts.append(seg)
        joints.append(frame[:3, 3].copy())
        tip = frame @ homogeneous(t=[0.0, 0.0, lg])
        alpha = np.linspace(0.0, 1.0, n_links)[1:, None]
        pts.append(frame[:3, 3] + alpha * (tip[:3, 3] - frame[:3, 3]))
        frame = tip
        joints.append(frame[:3, 3].copy())
    return np.vstack([np.atleast_2d(p) for p in pts]), np.array(joints)


def sampled_clearance(q, params, center, radius, n_links=100_000):
    """Brute-force clearance over densely sampled centerline points."""
    pts, _ = microlink_chain(q, params, n_links)
    d = np.linalg.norm(pts - np.asarray(center, float), axis=1)
    i = int(np.argmin(d))
    return d[i] - radius - params.body_radius, pts[i]


def random_arc(rng):
    """Random circular arc with an explicit in-plane basis (u toward the start, v = normal x u)."""
    center = rng.uniform(-50, 50, 3)
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    u = np.cross(normal, rng.normal(size=3))
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    radius = rng.uniform(5.0, 200.0)
    theta = rng.uniform(0.05, math.pi)

    def at(phi):
        phi = np.asarray(phi, float)[..., None]
        return center + radius * (np.cos(phi) * u + np.sin(phi) * v)

    return SimpleNamespace(center=center, normal=normal, radius=radius, start=at(0.0), end=at(theta),
                           theta=theta, u=u, v=v, at=at)


def sampled_arc_distance(arc, p, n=100_000):
    """Minimum distance from p to n evenly spaced points of the arc.

    |O + r(cos f u + sin f v) - p|^2 expands to r^2 + |O - p|^2 + 2r(a cos f + b sin f),
    so the samples never need to be materialized as 3-vectors.
    """
    w = arc.center - np.asarray(p, float)
    a, b = np.dot(arc.u, w), np.dot(arc.v, w)
    phi = np.linspace(0.0, arc.theta, n)
    d2 = arc.radius**2 + np.dot(w, w) + 2 * arc.radius * (a * np.cos(phi) + b * np.sin(phi))
    return math.sqrt(max(float(d2.min()), 0.0))


def sampled_segment_distance(s, e, p, n=100_000):
    """Minimum distance from p to n evenly spaced points of segment s-e."""
    s, e, p = (np.asarray(x, float) for x in (s, e, p))
    d, w = e - s, s - p
    t = np.linspace(0.0, 1.0, n)
    d2 = np.dot(d, d) * t * t + 2 * np.dot(d, w) * t + np.dot(w, w)
    return math.sqrt(max(float(d2.min()), 0.0))


# --- acceptance summary -----------------------------------------------------------

_criteria: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py::test_criterion" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = dict(report.user_properties).get("detail", "")
    _criteria.append((name, "PASS" if report.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, detail in sorted(_criteria):
        terminalreporter.write_line(f"{verdict}  {name}  {detail}")
