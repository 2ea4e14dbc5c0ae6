"""Calibration: cost assembly and the SBS, VDA and NSGA strategies."""

from hydrocal.calibrate.cost import CostBreakdown, CostConfig, Observation, evaluate_cost
from hydrocal.calibrate.nsga import nsga_optimize
from hydrocal.calibrate.pareto import ParetoSet, pareto_filter, saw_select
from hydrocal.calibrate.problem import CalibrationProblem
from hydrocal.calibrate.sbs import SearchSpace, calibrate_uniform, sbs_optimize
from hydrocal.calibrate.strategies import objective_function, run_calibration, smoo_optimize
from hydrocal.calibrate.vda import lbfgsb, vda_optimize

__all__ = [
    "CalibrationProblem",
    "CostBreakdown",
    "CostConfig",
    "Observation",
    "ParetoSet",
    "SearchSpace",
    "calibrate_uniform",
    "evaluate_cost",
    "lbfgsb",
    "nsga_optimize",
    "objective_function",
    "pareto_filter",
    "run_calibration",
    "saw_select",
    "sbs_optimize",
    "smoo_optimize",
    "vda_optimize",
]
