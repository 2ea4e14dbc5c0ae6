"""Distributed conceptual rainfall-runoff modelling with signature-based calibration."""

from hydrocal.grid import (
    Catchment,
    D8Raster,
    DrainagePlan,
    build_drainage_plan,
    delineate_catchment,
    topo_order,
)
from hydrocal.model import (
    BOUNDS,
    PARAM_NAMES,
    STATE_NAMES,
    Forcing,
    ParameterField,
    SimulationResult,
    StateField,
    mass_balance,
    run,
    step_cell,
)

__version__ = "0.1.0"

__all__ = [
    "BOUNDS",
    "Catchment",
    "D8Raster",
    "DrainagePlan",
    "Forcing",
    "PARAM_NAMES",
    "ParameterField",
    "STATE_NAMES",
    "SimulationResult",
    "StateField",
    "build_drainage_plan",
    "delineate_catchment",
    "mass_balance",
    "run",
    "step_cell",
    "topo_order",
]
