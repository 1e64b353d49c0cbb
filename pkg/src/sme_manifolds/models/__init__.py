"""
Data models for scenarios, trajectories and run configuration.
"""

from .scenario import (
    MeasurementChannel,
    Drive,
    ScenarioModel,
    TrajectoryRecord,
    compensated_cumsum,
    matrix_to_list,
    matrix_from_list,
)
from .run_config import (
    ScenarioConfig,
    RankSettings,
    CheckSettings,
    SCENARIO_KINDS,
    CHECK_KINDS,
)

__all__ = [
    "MeasurementChannel",
    "Drive",
    "ScenarioModel",
    "TrajectoryRecord",
    "compensated_cumsum",
    "matrix_to_list",
    "matrix_from_list",
    "ScenarioConfig",
    "RankSettings",
    "CheckSettings",
    "SCENARIO_KINDS",
    "CHECK_KINDS",
]
