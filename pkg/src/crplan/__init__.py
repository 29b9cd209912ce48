"""Motion planning for a continuum-rigid manipulator.

Workspace S-RRT* paths for the end-effector, tracked by joint-limit weighted
inverse instantaneous kinematics with null-space obstacle avoidance.
"""
from ._accel import backend
from .baselines import BaselineOutcome, cspace_rrt_star, random_nullspace_planner
from .cli import RunReport, benchmark, emit_csv, run_scenario
from .iik import (
    AvoidanceGains,
    SingularTaskError,
    StepRecord,
    Trajectory,
    gain_h,
    gain_v,
    iik_step_avoid,
    iik_step_basic,
    plan_motion,
)
from .jacobian import (
    PointDescriptor,
    WeightState,
    damped_pseudo_inverse,
    end_effector_jacobian,
    joint_limit_weights,
    null_space_projector,
    point_jacobian,
    pseudo_inverse,
)
from .kinematics import Config, Link, ManipulatorParams, canonical_config, end_effector, forward_kinematics
from .proximity import (
    SphereObstacle,
    closest_point_on_arc,
    closest_point_on_segment,
    collision_check_config,
    manipulator_min_distance,
)
from .scenario import Scenario, ScenarioError, bundled_scenario_path, load_scenario, parse_scenario
from .srrt import NoPathFound, SearchSpace, s_rrt_star

__version__ = "0.1.0"
