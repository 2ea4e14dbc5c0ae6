import numpy as np
import pytest

from hydrocal import ParameterField
from hydrocal.calibrate.cost import CostConfig
from hydrocal.calibrate.problem import CalibrationProblem
from hydrocal.calibrate.strategies import objective_config, objective_function, run_calibration
from hydrocal.model import LOWER, UPPER
from hydrocal.synth import TWIN_THETA, StormSpec, synth_generate, twin_observation, twin_plan


@pytest.fixture(scope="module")
def problem():
    plan, gauge = twin_plan()
    data = synth_generate(plan, ParameterField.uniform(plan.shape, TWIN_THETA), StormSpec(nsteps=1000, n_storms=2),
                          gauge=gauge)
    return CalibrationProblem(plan, data.forcing, gauge, twin_observation(data, gauge), CostConfig())


def test_objective_config_exposes_each_term():
    cfg = objective_config(CostConfig(alpha_reg=5.0), ("j_d", "Crc", "Epf"))
    assert cfg.continuous == {"Crc": 1.0} and cfg.flood == {"Epf": 1.0}
    assert cfg.delta_c == cfg.delta_f == 1.0 and cfg.alpha_reg == 0.0


def test_objective_function_at_truth_is_zero(problem):
    f = objective_function(problem, ("j_d", "Epf", "Crc"))
    assert np.all(f(TWIN_THETA) == 0.0)
    assert np.all(f(TWIN_THETA * [2, 1, 1, 1, 1, 1]) > 0)


def test_csoo_sbs_recovers_the_hydrograph(problem):
    rep = run_calibration(problem, "sbs")
    assert rep.breakdown.j_d <= 0.01  # NSE >= 0.99
    assert np.all((rep.uniform >= LOWER) & (rep.uniform <= UPPER))
    assert rep.summary()["strategy"] == "sbs"


def test_vda_after_sbs_does_not_worsen(problem):
    sbs = run_calibration(problem, "sbs")
    vda = run_calibration(problem, "vda", vda_kwargs={"maxiter": 20})
    assert vda.breakdown.j_d <= sbs.breakdown.j_d + 1e-4
    assert vda.log[0]["iter"] == 0 and len(vda.log) <= 21
    assert vda.summary()["theta_uniform"] == pytest.approx(list(sbs.uniform))


def test_nsga_strategy_reports_a_front_member(problem):
    rep = run_calibration(problem, "nsga", nsga_kwargs={"pop_size": 8, "generations": 3, "seed": 1})
    assert rep.smoo is not None
    assert any(np.array_equal(rep.uniform, t) for t in rep.smoo.pareto.thetas)
    with pytest.raises(ValueError):
        run_calibration(problem, "annealing")
