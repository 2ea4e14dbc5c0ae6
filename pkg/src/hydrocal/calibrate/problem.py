"""Binds a drainage plan, forcing and gauge observations into cost functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hydrocal import adjoint
from hydrocal.calibrate.cost import CostConfig, Observation, evaluate_cost
from hydrocal.grid import Catchment, DrainagePlan
from hydrocal.model import (
    LOWER,
    MM_KM2_PER_H_TO_M3S,
    UPPER,
    Forcing,
    ParameterField,
    StateField,
    _simulate,
    prepare,
)


@dataclass
class CalibrationProblem:
    plan: DrainagePlan
    forcing: Forcing
    gauge: Catchment
    obs: Observation
    config: CostConfig
    h0: StateField | None = None

    def __post_init__(self):
        self._pos = int(self.plan.position()[self.plan.flat(self.gauge.outlet)])
        self._down = self.plan.downstream_positions()
        self.n_evals = 0

    def with_config(self, config: CostConfig) -> "CalibrationProblem":
        return CalibrationProblem(self.plan, self.forcing, self.gauge, self.obs, config, self.h0)

    def uniform(self, theta_bar) -> ParameterField:
        return ParameterField.uniform(self.plan.shape, theta_bar)

    def simulate(self, theta: ParameterField, forcing: Forcing | None = None) -> np.ndarray:
        """Gauge discharge (m3/s)."""
        params, state, rain, pet = prepare(self.plan, theta, self.h0, forcing or self.forcing)
        q = _simulate(params, state, rain, pet, self._down, self.plan.cell_area, 0)[0]
        self.n_evals += 1
        return q[:, self._pos] * MM_KM2_PER_H_TO_M3S

    def breakdown(self, theta: ParameterField, mode="uniform", smooth=False):
        sim = self.simulate(theta)
        return evaluate_cost(self.config, theta, sim, self.obs, mode=mode, smooth=smooth, active=self.plan.active)

    def cost(self, theta: ParameterField, mode="uniform", smooth=False) -> float:
        return self.breakdown(theta, mode, smooth).total

    def uniform_cost(self, theta_bar) -> float:
        """Exact cost of a spatially uniform parameter vector."""
        return self.cost(self.uniform(theta_bar), mode="uniform")

    def value_and_grad(self, theta: ParameterField, mode="distributed"):
        b, g = adjoint.gradient(self.plan, theta, self.h0, self.forcing, self.config, self.obs, self.gauge, mode=mode)
        self.n_evals += 1
        return b, g


def to_unit(values: np.ndarray) -> np.ndarray:
    """Bound-normalised control (parameters on axis 0)."""
    shape = (6,) + (1,) * (values.ndim - 1)
    return (values - LOWER.reshape(shape)) / (UPPER - LOWER).reshape(shape)


def from_unit(u: np.ndarray) -> np.ndarray:
    shape = (6,) + (1,) * (u.ndim - 1)
    return LOWER.reshape(shape) + u * (UPPER - LOWER).reshape(shape)
