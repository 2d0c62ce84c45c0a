"""Collision-free circular formations for constant-speed unicycle swarms."""

from .cbf import PairView, SafetyConfig, build_pair_view, h_dot, psi, u_safe_pair, virtual_radius
from .coordination import (LedgerEntry, OvertakeStage, aggregate_safe, is_overtaking, overtake_set,
                           robot_input, stage_transition)
from .geometry import ClassKFn, class_k_eval, rotate_E, wrap_angle
from .path import FieldGains, ImplicitPath, gvf, heading_ref, path_error, path_normal, path_tangent
from .sim import RunResult, Scenario, monitor_report, run_scenario, speed_sample, step_unicycle
from .state import RobotState

__version__ = "0.1.0"
