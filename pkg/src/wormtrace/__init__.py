"""Scanning-worm simulation with distributed trace-back of the propagation path."""

from .config import ExperimentConfig, experiment_config, load_config
from .engine import Event, EventKind, Scheduler, SchedulingError
from .evaluation import PathMetrics, compare_paths, export_dot
from .experiment import RunReport, run_experiment, run_suite, test_plan_configs
from .network import HostAddress, TopologyConfig, build_network
from .traceback import (
    Candidate,
    MonitorAgent,
    PropagationGraph,
    Reply,
    assemble_graph,
    select_parent_extended,
    select_parent_origins,
    traceback_from_log,
)
from .worms import PRESETS, WormConfig

__version__ = "0.1.0"

__all__ = [
    "Candidate", "Event", "EventKind", "ExperimentConfig", "HostAddress", "MonitorAgent", "PRESETS",
    "PathMetrics", "PropagationGraph", "Reply", "RunReport", "Scheduler", "SchedulingError",
    "TopologyConfig", "WormConfig", "assemble_graph", "build_network", "compare_paths",
    "experiment_config", "export_dot", "load_config", "run_experiment", "run_suite",
    "select_parent_extended", "select_parent_origins", "test_plan_configs", "traceback_from_log",
]
