"""Step-by-step (SBS) coordinate search for spatially uniform parameters.

Coordinates are searched in a transformed space: ``log10`` for the
capacities and time constant, ``ml / 10`` for the exchange coefficient.
Each coordinate is tried at ``+step`` then ``-step`` (clipped to the
bounds); an improving move is kept. Cycles repeat until none improves,
then the step halves, from 0.64 down to ``min_step``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hydrocal.model import LOWER, UPPER

LOG_PARAMS = np.array([True, True, True, True, False, True])
LINEAR_SCALE = 10.0


@dataclass
class SearchSpace:
    lower: np.ndarray
    upper: np.ndarray
    log_scale: np.ndarray
    linear_scale: float = LINEAR_SCALE

    @classmethod
    def model(cls):
        return cls(LOWER.copy(), UPPER.copy(), LOG_PARAMS.copy())

    @classmethod
    def linear(cls, lower, upper, scale=1.0):
        lower = np.asarray(lower, dtype=float)
        return cls(lower, np.asarray(upper, dtype=float), np.zeros(lower.size, dtype=bool), scale)

    def to_z(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self.log_scale, np.log10(np.where(self.log_scale, x, 1.0)), x / self.linear_scale)

    def from_z(self, z):
        z = np.asarray(z, dtype=float)
        x = np.where(self.log_scale, 10.0**z, z * self.linear_scale)
        return np.clip(x, self.lower, self.upper)

    @property
    def z_bounds(self):
        return self.to_z(self.lower), self.to_z(self.upper)

    def midpoint(self):
        lo, hi = self.z_bounds
        return self.from_z(0.5 * (lo + hi))


@dataclass
class SBSResult:
    x: np.ndarray
    fun: float
    n_evals: int
    history: list = field(default_factory=list)  # (n_evals, best J, step)


def sbs_optimize(fun, space: SearchSpace | None = None, x0=None, step0=0.64, min_step=0.01, max_cycles=1000,
                 callback=None) -> SBSResult:
    space = space or SearchSpace.model()
    lo, hi = space.z_bounds
    x = space.midpoint() if x0 is None else np.clip(np.asarray(x0, dtype=float), space.lower, space.upper)
    z = space.to_z(x)
    best = float(fun(space.from_z(z)))
    n_evals = 1
    history = [(n_evals, best, step0)]
    step = step0
    while step >= min_step * (1.0 - 1e-9):
        for _ in range(max_cycles):
            improved = False
            for j in range(z.size):
                for sign in (1.0, -1.0):
                    trial = z.copy()
                    trial[j] = np.clip(z[j] + sign * step, lo[j], hi[j])
                    if trial[j] == z[j]:
                        continue
                    val = float(fun(space.from_z(trial)))
                    n_evals += 1
                    if val < best:
                        z, best, improved = trial, val, True
                        history.append((n_evals, best, step))
                        if callback is not None:
                            callback(space.from_z(z), best)
                        break
            if not improved:
                break
        step /= 2.0
    return SBSResult(space.from_z(z), best, n_evals, history)


def calibrate_uniform(problem, x0=None, **kwargs) -> SBSResult:
    """SBS on a :class:`~hydrocal.calibrate.problem.CalibrationProblem`."""
    return sbs_optimize(problem.uniform_cost, SearchSpace.model(), x0, **kwargs)
