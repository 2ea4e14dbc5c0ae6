"""CSOO / SSOO / SMOO drivers on top of the optimisers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from hydrocal.calibrate.cost import CostConfig
from hydrocal.calibrate.nsga import GENERATIONS, POP_SIZE, nsga_optimize
from hydrocal.calibrate.pareto import ParetoSet, saw_select
from hydrocal.calibrate.sbs import SearchSpace, calibrate_uniform
from hydrocal.calibrate.vda import vda_optimize
from hydrocal.signatures import CONTINUOUS, EVENT


def objective_config(base: CostConfig, names) -> CostConfig:
    """A config whose breakdown exposes every named objective as a term."""
    cont = {n: 1.0 for n in names if n in CONTINUOUS}
    flood = {n: 1.0 for n in names if n in EVENT}
    return replace(base, continuous=cont, flood=flood, delta_d=1.0, delta_c=float(bool(cont)),
                   delta_f=float(bool(flood)), alpha_reg=0.0, background=None)


def objective_vector(breakdown, names) -> np.ndarray:
    out = []
    for n in names:
        if n == "j_d":
            out.append(breakdown.j_d)
        elif n in CONTINUOUS:
            out.append(breakdown.signature_terms[("c", n)])
        else:
            out.append(breakdown.signature_terms[("f", n)])
    return np.array(out)


def objective_function(problem, names):
    """``theta_bar -> (j_1, ..., j_m)`` with one simulation per call."""
    names = tuple(names)
    prob = problem.with_config(objective_config(problem.config, names))

    def f(theta_bar):
        return objective_vector(prob.breakdown(prob.uniform(theta_bar)), names)

    return f


@dataclass
class SMOOResult:
    pareto: ParetoSet
    selected: int
    names: tuple

    @property
    def theta(self) -> np.ndarray:
        return self.pareto.thetas[self.selected]


def smoo_optimize(problem, names=("j_d", "Epf"), pop_size=POP_SIZE, generations=GENERATIONS, seed=0,
                  constrained: int = 0) -> SMOOResult:
    names = tuple(names)
    front = nsga_optimize(objective_function(problem, names), SearchSpace.model(), pop_size, generations, seed)
    return SMOOResult(front, saw_select(front, constrained), names)


@dataclass
class CalibrationReport:
    strategy: str
    theta: object  # ParameterField
    breakdown: object
    iterations: int
    stop_reason: str
    log: list = field(default_factory=list)
    uniform: np.ndarray | None = None
    smoo: SMOOResult | None = None

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "iterations": int(self.iterations),
            "stop_reason": self.stop_reason,
            "cost": self.breakdown.as_dict(),
            "theta_uniform": None if self.uniform is None else [float(v) for v in self.uniform],
        }


def run_calibration(problem, strategy="sbs", theta_init=None, sbs_kwargs=None, vda_kwargs=None, nsga_kwargs=None):
    """CSOO/SSOO (``sbs`` uniform, ``vda`` distributed after SBS) or SMOO (``nsga``)."""
    sbs_kwargs = sbs_kwargs or {}
    if strategy == "nsga":
        kw = dict(nsga_kwargs or {})
        res = smoo_optimize(problem, **kw)
        theta = problem.uniform(res.theta)
        b = problem.breakdown(theta)
        log = [{"iter": g, "J": float(np.nan), "j_d": float(h[0]), "j_c": float(np.nan), "j_f": float(np.nan),
                "J_reg": 0.0, "grad_norm": float(np.nan)} for g, h in enumerate(res.pareto.history)]
        return CalibrationReport("nsga", theta, b, res.pareto.generations, "generation budget reached", log,
                                 res.theta, res)
    sbs = calibrate_uniform(problem, theta_init, **sbs_kwargs)
    theta = problem.uniform(sbs.x)
    if strategy == "sbs":
        log = [{"iter": i, "J": j, "j_d": np.nan, "j_c": np.nan, "j_f": np.nan, "J_reg": 0.0, "grad_norm": np.nan}
               for i, (_, j, _) in enumerate(sbs.history)]
        return CalibrationReport("sbs", theta, problem.breakdown(theta), len(sbs.history) - 1,
                                 "step below minimum", log, sbs.x)
    if strategy == "vda":
        v = vda_optimize(problem, theta, **(vda_kwargs or {}))
        return CalibrationReport("vda", v.theta, v.breakdown, v.iterations, v.stop_reason, v.log, sbs.x)
    raise ValueError(f"unknown strategy {strategy!r}")
