"""
SME Manifolds - trajectory simulation, Lie-rank analysis and invariant checks for
continuously monitored quantum systems.
"""

__version__ = "0.1.0"
__author__ = "Your Name"
__license__ = "MIT"

from .exceptions import IntegrationFailure, InvalidArgumentError, ResourceLimitError, SmeManifoldsError
from .models import MeasurementChannel, Drive, ScenarioModel, TrajectoryRecord, ScenarioConfig
from .sme import simulate, run_trajectory, lindblad_propagate, filter_apply, ensemble_mean
from .lierank import LieAlgebraReport, manifold_dimension, confinement_diagnostic
from .scenarios import BuiltScenario, build_scenario, figure_panels
from .checks import CheckReport, InvariantChecker
from .orchestrator import RunOrchestrator
from .config import ConfigManager

__all__ = [
    "SmeManifoldsError",
    "InvalidArgumentError",
    "IntegrationFailure",
    "ResourceLimitError",
    "MeasurementChannel",
    "Drive",
    "ScenarioModel",
    "TrajectoryRecord",
    "ScenarioConfig",
    "simulate",
    "run_trajectory",
    "lindblad_propagate",
    "filter_apply",
    "ensemble_mean",
    "LieAlgebraReport",
    "manifold_dimension",
    "confinement_diagnostic",
    "BuiltScenario",
    "build_scenario",
    "figure_panels",
    "CheckReport",
    "InvariantChecker",
    "RunOrchestrator",
    "ConfigManager",
]
