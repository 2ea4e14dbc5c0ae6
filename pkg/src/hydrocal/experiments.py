"""Twin-experiment protocols shared by the acceptance suite and the scripts.

A twin experiment generates observations with the model itself at a known
truth on the 3x3 grid, then checks what each calibration strategy recovers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from hydrocal.calibrate.cost import CostConfig
from hydrocal.calibrate.problem import CalibrationProblem
from hydrocal.calibrate.sbs import calibrate_uniform
from hydrocal.calibrate.strategies import smoo_optimize
from hydrocal.calibrate.vda import vda_optimize
from hydrocal.metrics import nse
from hydrocal.model import ParameterField
from hydrocal.synth import TWIN_THETA, StormSpec, synth_generate, twin_observation, twin_plan, varying_cp

CSOO = CostConfig()
SSOO = CostConfig(delta_d=0.5, delta_f=0.5, flood={"Epf": 1.0})
PEAK_ONLY = CostConfig(delta_d=0.0, delta_f=1.0, flood={"Epf": 1.0})


def twin_problem(noise=0.0, seed=0, spec: StormSpec | None = None, truth: ParameterField | None = None,
                 config: CostConfig = CSOO):
    """``(problem, data)`` for a twin run on the 3x3 grid."""
    plan, gauge = twin_plan()
    truth = truth if truth is not None else ParameterField.uniform(plan.shape, TWIN_THETA)
    spec = replace(spec or StormSpec(jitter=0.3), noise=noise)
    data = synth_generate(plan, truth, spec, seed=seed, gauge=gauge)
    return CalibrationProblem(plan, data.forcing, gauge, twin_observation(data, gauge), config), data


@dataclass
class RecoveryResult:
    theta: np.ndarray
    nse_calibration: float
    nse_validation: float


def recovery(seed=0, validation_seed=101) -> RecoveryResult:
    """CSOO on noise-free data; NSE on the calibration storms and on an
    independent storm train simulated with the same truth."""
    prob, data = twin_problem(seed=seed)
    res = calibrate_uniform(prob)
    cal = nse(prob.simulate(prob.uniform(res.x)), data.discharge)
    vprob, vdata = twin_problem(seed=validation_seed, spec=StormSpec(jitter=0.3, intensity=7.0, spacing=300))
    val = nse(vprob.simulate(vprob.uniform(res.x)), vdata.discharge)
    return RecoveryResult(res.x, cal, val)


@dataclass
class Comparison:
    """Observation-side costs of the CSOO and SSOO optima, both measured with
    the exact (non-smoothed) formulas."""

    csoo_jd: float
    csoo_jf: float
    ssoo_jd: float
    ssoo_jf: float

    @property
    def jd_ratio(self) -> float:
        return self.ssoo_jd / self.csoo_jd


def _measure(prob, theta: ParameterField, mode: str):
    b = prob.with_config(SSOO).breakdown(theta, mode=mode)
    return b.j_d, b.signature_terms[("f", "Epf")]


def compare_csoo_ssoo(noise=0.05, seed=0, distributed=False) -> Comparison:
    """CSOO (1 - NSE) against SSOO (j_d/2 + j_f^Epf/2) on the same twin data.

    Uniform mode runs SBS for both, SSOO warm-started from the CSOO optimum.
    Distributed mode runs VDA for both from that same uniform CSOO optimum
    (spatially varying ``c_p`` truth).
    """
    truth = None
    if distributed:
        plan, _ = twin_plan()
        truth = varying_cp(plan.shape)
    prob, _ = twin_problem(noise=noise, seed=seed, truth=truth)
    csoo = calibrate_uniform(prob)
    if not distributed:
        ssoo = calibrate_uniform(prob.with_config(SSOO), x0=csoo.x)
        a, b = prob.uniform(csoo.x), prob.uniform(ssoo.x)
        mode = "uniform"
    else:
        bg = prob.uniform(csoo.x)
        a = vda_optimize(prob, bg).theta
        b = vda_optimize(prob.with_config(SSOO), bg).theta
        mode = "distributed"
    jd_c, jf_c = _measure(prob, a, mode)
    jd_s, jf_s = _measure(prob, b, mode)
    return Comparison(jd_c, jf_c, jd_s, jf_s)


@dataclass
class TradeOff:
    front: np.ndarray  # (n, 2): j_d, j_f^Epf
    csoo_jf: float  # j_f^Epf at the CSOO optimum
    peak_jd: float  # j_d at the pure-Epf optimum

    @property
    def spans(self) -> bool:
        return bool(np.any(self.front[:, 1] < self.csoo_jf) and np.any(self.front[:, 0] < self.peak_jd))


def smoo_trade_off(noise=0.05, seed=0, pop_size=64, generations=100) -> TradeOff:
    prob, _ = twin_problem(noise=noise, seed=seed)
    res = smoo_optimize(prob, ("j_d", "Epf"), pop_size, generations, seed)
    csoo = calibrate_uniform(prob)
    peak = calibrate_uniform(prob.with_config(PEAK_ONLY))
    jd_c, jf_c = _measure(prob, prob.uniform(csoo.x), "uniform")
    jd_p, _ = _measure(prob, prob.uniform(peak.x), "uniform")
    return TradeOff(res.pareto.objectives, jf_c, jd_p)
