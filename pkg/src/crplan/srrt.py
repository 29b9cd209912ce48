"""Workspace S-RRT*: RRT* search, greedy pruning and B-spline smoothing.

Obstacles are (m, 4) arrays of sphere centers and radii; ``clearance`` is
added to every radius (the manipulator body radius when planning for the
end-effector point).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from . import _kernels as K

GOAL_BIAS = 0.05
STEER_LENGTH = 10.0
GOAL_RADIUS = 5.0
REWIRE_CAP = 30.0


class NoPathFound(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(lo >= hi):
            raise ValueError("search space needs 3D bounds with min < max componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)


def _obs(obstacles) -> np.ndarray:
    if obstacles is None:
        return np.zeros((0, 4))
    return np.ascontiguousarray(obstacles, dtype=np.float64).reshape(-1, 4)


def point_free(p, obstacles, clearance: float = 0.0) -> bool:
    obs = _obs(obstacles)
    if obs.shape[0] == 0:
        return True
    d = np.linalg.norm(obs[:, :3] - np.asarray(p, float), axis=1)
    return bool(np.all(d > obs[:, 3] + clearance))


def segment_collision_free(a, b, obstacles, clearance: float = 0.0) -> bool:
    """Exact test that segment a-b keeps more than radius + clearance from every center."""
    obs = _obs(obstacles)
    if obs.shape[0] == 0:
        return True
    return bool(K.segment_clear(np.ascontiguousarray(a, dtype=np.float64),
                                np.ascontiguousarray(b, dtype=np.float64), obs, float(clearance)))


def path_collision_free(points, obstacles, clearance: float = 0.0) -> bool:
    points = np.asarray(points, float)
    return all(segment_collision_free(points[i], points[i + 1], obstacles, clearance)
               for i in range(len(points) - 1))


def path_length(points) -> float:
    points = np.asarray(points, float)
    if len(points) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


def rewire_radius(n: int, volume: float, dim: int = 3, cap: float = REWIRE_CAP) -> float:
    """Shrinking-ball radius gamma (log n / n)^(1/d), capped."""
    unit_ball = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    gamma = 2.0 * (1.0 + 1.0 / dim) ** (1.0 / dim) * (volume / unit_ball) ** (1.0 / dim)
    n = max(n, 2)
    return min(gamma * (math.log(n) / n) ** (1.0 / dim), cap)


class Tree:
    """Array-backed RRT* tree with cost propagation on rewiring."""

    def __init__(self, root, capacity: int, dim: int = 3):
        self.pos = np.zeros((capacity, dim))
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.cost = np.zeros(capacity)
        self.children: list[list[int]] = [[] for _ in range(capacity)]
        self.pos[0] = root
        self.n = 1

    def add(self, p, parent: int, cost: float) -> int:
        i = self.n
        self.pos[i] = p
        self.parent[i] = parent
        self.cost[i] = cost
        self.children[parent].append(i)
        self.n += 1
        return i

    def reparent(self, i: int, new_parent: int, new_cost: float) -> None:
        old = self.parent[i]
        self.children[old].remove(i)
        self.children[new_parent].append(i)
        self.parent[i] = new_parent
        delta = new_cost - self.cost[i]
        stack = [i]
        while stack:
            j = stack.pop()
            self.cost[j] += delta
            stack.extend(self.children[j])

    def branch(self, i: int) -> np.ndarray:
        idx = []
        while i >= 0:
            idx.append(i)
            i = self.parent[i]
        return self.pos[idx[::-1]].copy()


def rrt_star(start, goal, obstacles, space: SearchSpace, max_iters: int, rng_seed=None,
             clearance: float = 0.0, step: float = STEER_LENGTH, goal_bias: float = GOAL_BIAS,
             goal_radius: float = GOAL_RADIUS, radius_cap: float = REWIRE_CAP) -> np.ndarray:
    """RRT* from ``start`` until a node lands within ``goal_radius`` of ``goal``.

    Returns the tree branch start -> goal as an (n, 3) array. Raises
    :class:`NoPathFound` when ``max_iters`` samples do not reach the goal.
    """
    start = np.asarray(start, float)
    goal = np.asarray(goal, float)
    obs = _obs(obstacles)
    for name, p in (("start", start), ("goal", goal)):
        if not space.contains(p):
            raise ValueError(f"{name} lies outside the search space")
        if not point_free(p, obs, clearance):
            raise ValueError(f"{name} is in collision")
    if np.allclose(start, goal):
        return start[None, :].copy()

    rng = np.random.default_rng(rng_seed)
    tree = Tree(start, max_iters + 2)
    volume = space.volume
    for _ in range(max_iters):
        target = goal if rng.random() < goal_bias else space.sample(rng)
        d2 = np.einsum("ij,ij->i", tree.pos[:tree.n] - target, tree.pos[:tree.n] - target)
        nearest = int(np.argmin(d2))
        dist = math.sqrt(d2[nearest])
        if dist < 1e-9:
            continue
        x_new = target if dist <= step else tree.pos[nearest] + (target - tree.pos[nearest]) * (step / dist)
        if not point_free(x_new, obs, clearance):
            continue
        if not segment_collision_free(tree.pos[nearest], x_new, obs, clearance):
            continue

        radius = max(rewire_radius(tree.n, volume, cap=radius_cap), step)
        dn = np.linalg.norm(tree.pos[:tree.n] - x_new, axis=1)
        near = np.flatnonzero(dn <= radius)
        best = nearest
        best_cost = tree.cost[nearest] + dn[nearest]
        for j in near[np.argsort(tree.cost[near] + dn[near])]:
            c = tree.cost[j] + dn[j]
            if c >= best_cost:
                break
            if segment_collision_free(tree.pos[j], x_new, obs, clearance):
                best, best_cost = int(j), c
                break
        new = tree.add(x_new, best, best_cost)
        for j in near:
            if j == best:
                continue
            c = best_cost + dn[j]
            if c < tree.cost[j] and segment_collision_free(x_new, tree.pos[j], obs, clearance):
                tree.reparent(int(j), new, c)

        if np.linalg.norm(x_new - goal) <= goal_radius and segment_collision_free(x_new, goal, obs, clearance):
            dg = np.linalg.norm(tree.pos[:tree.n] - goal, axis=1)
            cand = np.flatnonzero(dg <= radius)
            order = cand[np.argsort(tree.cost[cand] + dg[cand])]
            parent = new
            for j in order:
                if segment_collision_free(tree.pos[j], goal, obs, clearance):
                    parent = int(j)
                    break
            g = tree.add(goal, parent, tree.cost[parent] + dg[parent])
            return tree.branch(g)
    raise NoPathFound(f"goal not reached after {max_iters} iterations")


def prune_path(path, obstacles, clearance: float = 0.0) -> np.ndarray:
    """Forward-greedy shortcutting: from each anchor jump to the farthest visible waypoint."""
    path = np.asarray(path, float)
    if len(path) <= 2:
        return path.copy()
    out = [path[0]]
    anchor = 0
    last = len(path) - 1
    while anchor < last:
        nxt = anchor + 1
        for j in range(last, anchor + 1, -1):
            if segment_collision_free(path[anchor], path[j], obstacles, clearance):
                nxt = j
                break
        out.append(path[nxt])
        anchor = nxt
    return np.array(out)


def clamped_bspline(control, n_samples: int, degree: int = 3, arc_length: bool = True,
                    resolution: int = 2000) -> np.ndarray:
    """Sample a clamped B-spline with uniform interior knots.

    With ``arc_length`` the samples are equally spaced along the curve
    (via a dense length table), otherwise equally spaced in the parameter.
    """
    control = np.asarray(control, float)
    n = len(control)
    k = min(degree, n - 1)
    interior = np.linspace(0.0, 1.0, n - k + 1)[1:-1]
    knots = np.concatenate([np.zeros(k + 1), interior, np.ones(k + 1)])
    spline = BSpline(knots, control, k)
    u = np.linspace(0.0, 1.0, n_samples)
    if arc_length:
        uu = np.linspace(0.0, 1.0, max(resolution, 4 * n_samples))
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(spline(uu), axis=0), axis=1))])
        if s[-1] > 0:
            u = np.interp(np.linspace(0.0, s[-1], n_samples), s, uu)
    pts = spline(u)
    pts[0] = control[0]
    pts[-1] = control[-1]
    return pts


def densify(points) -> np.ndarray:
    """Insert the midpoint of every edge."""
    points = np.asarray(points, float)
    mids = 0.5 * (points[:-1] + points[1:])
    out = np.empty((2 * len(points) - 1, points.shape[1]))
    out[0::2] = points
    out[1::2] = mids
    return out


def resample_polyline(points, n_samples: int) -> np.ndarray:
    """``n_samples`` points along the polyline, keeping every vertex."""
    points = np.asarray(points, float)
    nv = len(points)
    if n_samples < nv:
        raise ValueError("cannot keep all vertices with fewer samples than vertices")
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    extra = n_samples - nv
    # largest-remainder split of the extra samples over the edges by length
    share = seg / seg.sum() * extra if seg.sum() > 0 else np.zeros_like(seg)
    counts = np.floor(share).astype(int)
    for i in np.argsort(-(share - counts))[: extra - counts.sum()]:
        counts[i] += 1
    out = [points[0]]
    for i, c in enumerate(counts):
        for t in np.arange(1, c + 1) / (c + 1):
            out.append(points[i] + t * (points[i + 1] - points[i]))
        out.append(points[i + 1])
    return np.array(out)


def bspline_smooth(waypoints, n_samples: int, obstacles=None, clearance: float = 0.0,
                   max_refinements: int = 8) -> np.ndarray:
    """Smooth a waypoint polyline into ``n_samples`` points.

    The waypoints are the control polygon of a clamped cubic B-spline. If a
    chord between consecutive samples collides, the control polygon is
    densified along the polyline (pulling the spline toward it) and the
    spline is retried; the last resort is the polyline itself.
    """
    waypoints = np.asarray(waypoints, float)
    if len(waypoints) < 2:
        raise ValueError("need at least 2 waypoints")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    control = waypoints
    for _ in range(max_refinements + 1):
        pts = clamped_bspline(control, n_samples)
        if path_collision_free(pts, obstacles, clearance):
            return pts
        control = densify(control)
    return resample_polyline(waypoints, n_samples)


@dataclass
class SRRTResult:
    raw: np.ndarray
    pruned: np.ndarray
    smooth: np.ndarray


def s_rrt_star(start, goal, obstacles, space: SearchSpace, max_iters: int, rng_seed=None,
               n_samples: int = 30, clearance: float = 0.0) -> SRRTResult:
    """RRT*, then pruning, then B-spline smoothing."""
    raw = rrt_star(start, goal, obstacles, space, max_iters, rng_seed, clearance=clearance)
    if len(raw) == 1:
        return SRRTResult(raw, raw.copy(), np.repeat(raw, n_samples, axis=0))
    pruned = prune_path(raw, obstacles, clearance)
    smooth = bspline_smooth(pruned, n_samples, obstacles, clearance)
    return SRRTResult(raw, pruned, smooth)
