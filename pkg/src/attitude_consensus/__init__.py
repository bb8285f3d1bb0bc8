"""Attitude consensus and tracking for networks of rigid bodies on SO(3)."""
from .controllers import ControllerGains, control_obj1, control_obj2, control_obj3
from .graph import CommGraph, GraphError
from .simulator import (
    InertiaTensor,
    ReferenceTrajectory,
    ScenarioConfig,
    SimulationError,
    TrajectoryLog,
    check_initial_set,
    run_scenario,
)

__all__ = [
    "CommGraph",
    "ControllerGains",
    "GraphError",
    "InertiaTensor",
    "ReferenceTrajectory",
    "ScenarioConfig",
    "SimulationError",
    "TrajectoryLog",
    "check_initial_set",
    "control_obj1",
    "control_obj2",
    "control_obj3",
    "run_scenario",
]

__version__ = "0.1.0"
