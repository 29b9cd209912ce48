import math

import numpy as np
import pytest

from crplan.kinematics import (
    Config,
    Link,
    ManipulatorParams,
    canonical_config,
    end_effector,
    forward_kinematics,
    point_on_continuum,
    point_on_link,
    point_on_rigid,
    segment_rotation,
    spring_endpoint_local,
)

from conftest import microlink_chain, random_config, rot_y, rot_z


def test_segment_rotation_straight_is_identity():
    for delta in (0.0, 1.0, 4.0):
        np.testing.assert_allclose(segment_rotation(0.0, delta), np.eye(3), atol=1e-15)


def test_segment_rotation_about_y():
    r = segment_rotation(math.pi / 2, 0.0)
    np.testing.assert_allclose(r, [[0, 0, 1], [0, 1, 0], [-1, 0, 0]], atol=1e-15)


def test_segment_rotation_matches_axis_product():
    expected = rot_z(math.pi / 4) @ rot_y(math.pi / 3) @ rot_z(-math.pi / 4)
    np.testing.assert_allclose(segment_rotation(math.pi / 3, math.pi / 4), expected, atol=1e-14)


def test_rotations_are_proper(rng):
    for _ in range(200):
        theta, delta = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
        r = segment_rotation(theta, delta)
        assert np.linalg.norm(r.T @ r - np.eye(3)) < 1e-12
        assert abs(np.linalg.det(r) - 1.0) < 1e-12


@pytest.mark.parametrize("theta, expected", [
    (math.pi, (20 / math.pi, 0.0, 0.0)),
    (math.pi / 2, (20 / math.pi, 0.0, 20 / math.pi)),
    (0.0, (0.0, 0.0, 10.0)),
    (1e-9, (0.0, 0.0, 10.0)),
])
def test_spring_endpoint(theta, expected):
    p = ManipulatorParams(spring_length=10.0)
    np.testing.assert_allclose(spring_endpoint_local(theta, p), expected, atol=1e-12)


def test_straight_chain(params):
    ls, lg1, lg2 = params.lengths
    np.testing.assert_allclose(end_effector([0, 0, 0, 0], params), [0, 0, 2 * ls + lg1 + lg2], atol=1e-12)


def test_half_turn_reverses_chain(params):
    ls, lg1, lg2 = params.lengths
    fc = forward_kinematics([math.pi, 0, 0, 0], params)
    np.testing.assert_allclose(fc.joint_points[0], 0.0)
    np.testing.assert_allclose(fc.joint_points[1], [2 * ls / math.pi, 0, 0], atol=1e-12)
    rest = np.diff(fc.joint_points[1:], axis=0)
    np.testing.assert_allclose(rest[:, :2], 0.0, atol=1e-12)
    assert np.all(rest[:, 2] < 0)
    np.testing.assert_allclose(fc.end_effector[2], -(lg1 + ls + lg2), atol=1e-12)


def test_matches_microlink_oracle(params, rng):
    for _ in range(5):
        q = random_config(rng)
        _, joints = microlink_chain(q, params, n_links=10_000)
        fc = forward_kinematics(q, params)
        np.testing.assert_allclose(fc.joint_points, joints, atol=1e-4)


def test_calibration_targets(params):
    # circle-start pose and the Env 1 start pose
    np.testing.assert_allclose(end_effector([math.pi / 9, 0, math.pi / 9, 0], params), [51, 0, 101], atol=1e-3)
    q = [math.pi / 3, math.pi, 2 * math.pi / 5, math.pi / 3]
    assert np.linalg.norm(end_effector(q, params) - [-50, 44, 71]) < 0.5


def test_arc_centers_equidistant(params, rng):
    for _ in range(50):
        q = random_config(rng, theta_lo=0.01)
        fc = forward_kinematics(q, params)
        for i in range(2):
            o = fc.arc_centers[i]
            lam = params.spring_length / q[2 * i]
            assert abs(np.linalg.norm(o - fc.joint_points[2 * i]) - lam) < 1e-9 * max(1.0, lam)
            assert abs(np.linalg.norm(o - fc.joint_points[2 * i + 1]) - lam) < 1e-9 * max(1.0, lam)


def test_straight_segment_has_no_center(params):
    fc = forward_kinematics([0.0, 1.0, 0.5, 0.0], params)
    assert fc.arc_centers[0] is None and math.isinf(fc.arc_radii[0])
    assert fc.arc_centers[1] is not None


def test_point_on_continuum_endpoints(params, rng):
    for _ in range(20):
        q = random_config(rng)
        fc = forward_kinematics(q, params)
        for seg in (1, 2):
            np.testing.assert_allclose(point_on_continuum(q, seg, 1.0, params), fc.joint_points[2 * seg - 1],
                                       atol=1e-12)
            np.testing.assert_allclose(point_on_continuum(q, seg, 0.0, params), fc.joint_points[2 * seg - 2],
                                       atol=1e-12)


def test_point_on_continuum_midpoint_on_arc(params, rng):
    for _ in range(50):
        q = random_config(rng, theta_lo=0.01)
        fc = forward_kinematics(q, params)
        for seg in (1, 2):
            p = point_on_continuum(q, seg, 0.5, params)
            lam = params.spring_length / q[2 * seg - 2]
            assert abs(np.linalg.norm(p - fc.arc_centers[seg - 1]) - lam) < 1e-9 * max(1.0, lam)


def test_point_on_rigid(params, rng):
    q = random_config(rng)
    fc = forward_kinematics(q, params)
    for seg in (1, 2):
        lg = params.rigid_lengths[seg - 1]
        s, e = fc.joint_points[2 * seg - 1], fc.joint_points[2 * seg]
        np.testing.assert_allclose(point_on_rigid(q, seg, 0.0, params), s, atol=1e-12)
        np.testing.assert_allclose(point_on_rigid(q, seg, lg, params), e, atol=1e-12)
        np.testing.assert_allclose(point_on_rigid(q, seg, lg / 2, params), (s + e) / 2, atol=1e-12)


def test_point_range_checks(params):
    with pytest.raises(ValueError):
        point_on_continuum([0.1, 0, 0.1, 0], 1, 1.5, params)
    with pytest.raises(ValueError):
        point_on_rigid([0.1, 0, 0.1, 0], 2, params.rigid_lengths[1] + 1, params)
    with pytest.raises(ValueError):
        point_on_continuum([0.1, 0, 0.1, 0], 3, 0.5, params)


@pytest.mark.parametrize("theta", [1e-6, 1e-3, 0.5, math.pi])
def test_arc_length_consistency(params, theta):
    q = [theta, 0.7, 0.0, 0.0]
    beta = np.linspace(0, 1, 1000)
    pts = np.array([point_on_continuum(q, 1, b, params) for b in beta])
    length = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    assert abs(length - params.spring_length) / params.spring_length < 1e-4


def test_continuity_at_straight_threshold(params):
    eps = params.theta_eps
    a = end_effector([eps, 0.3, eps, 1.1], params)
    b = end_effector([0, 0.3, 0, 1.1], params)
    assert np.linalg.norm(a - b) < 1e-3


def test_segment_planarity(params, rng):
    for _ in range(20):
        q = random_config(rng, theta_lo=0.01)
        fc = forward_kinematics(q, params)
        for seg in (1, 2):
            n = fc.arc_normals[seg - 1]
            start = fc.joint_points[2 * seg - 2]
            for b in np.linspace(0, 1, 11):
                p = point_on_continuum(q, seg, b, params)
                assert abs(np.dot(p - start, n)) < 1e-9


def test_canonical_reflection_is_same_shape(params, rng):
    for _ in range(50):
        q = random_config(rng)
        flipped = np.array([-q[0], q[1] - math.pi, q[2], q[3]])
        c = canonical_config(flipped)
        assert 0 <= c[0] <= math.pi and 0 <= c[1] < 2 * math.pi
        np.testing.assert_allclose(end_effector(c, params), end_effector(q, params), atol=1e-9)
        # the reflected coordinates already describe the same chain
        np.testing.assert_allclose(end_effector(flipped, params), end_effector(q, params), atol=1e-9)


def test_canonical_clamps_and_wraps():
    c = canonical_config([4.0, -0.5, 0.2, 7.0])
    assert c[0] == math.pi
    assert 0 <= c[1] < 2 * math.pi and abs(c[1] - (2 * math.pi - 0.5)) < 1e-12
    assert abs(c[3] - (7.0 - 2 * math.pi)) < 1e-12
    assert Config(4.0, -0.5, 0.2, 7.0).canonical() == Config(*c)


def test_params_validation():
    with pytest.raises(ValueError):
        ManipulatorParams(spring_length=0)
    with pytest.raises(ValueError):
        ManipulatorParams(body_radius=-1)
    with pytest.raises(ValueError):
        ManipulatorParams(theta_eps=0.1)
    with pytest.raises(ValueError):
        ManipulatorParams(joint_limits=((0, 1),) * 3)


def test_weighting_limits_mirror_bend_range():
    lim = ManipulatorParams().weighting_limits
    assert lim[0] == (-math.pi, math.pi) and lim[2] == (-math.pi, math.pi)
    assert lim[1] == (0.0, 2 * math.pi)
    custom = ManipulatorParams(joint_limits=((0.2, 3.0), (0, 6), (0, 2), (0, 6)))
    assert custom.weighting_limits[0] == (0.2, 3.0) and custom.weighting_limits[2] == (-2.0, 2.0)


def test_link_lengths(params):
    assert params.link_length(Link.CONTINUUM1) == 1.0
    assert params.link_length(Link.RIGID2) == params.rigid_lengths[1]
    np.testing.assert_allclose(point_on_link([0, 0, 0, 0], Link.RIGID1, 0.0, params), [0, 0, params.spring_length])
