import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrocal import ParameterField
from hydrocal.calibrate.cost import CostConfig, evaluate_cost
from hydrocal.errors import BadSpec
from hydrocal.metrics import nse
from hydrocal.synth import (
    TWIN_THETA,
    StormSpec,
    hyetograph,
    storm_forcing,
    synth_generate,
    twin_observation,
    twin_plan,
    varying_cp,
)


def test_hyetograph_is_symmetric_and_peaks_at_intensity():
    h = hyetograph(18, 10.0)
    assert np.allclose(h, h[::-1])
    assert h.max() < 10.0 and h.max() == pytest.approx(10.0 * (1 - 1 / 18))
    assert h.sum() == pytest.approx(10.0 * 18 / 2)


def test_no_storms_means_no_rain():
    f = storm_forcing((3, 3), StormSpec(n_storms=0))
    assert np.all(f.rainfall == 0.0)


def test_storm_train_layout():
    spec = StormSpec(nsteps=1000, n_storms=2, first_start=100, spacing=400, spatial_gradient=0.5)
    f = storm_forcing((2, 3), spec)
    wet = np.flatnonzero(f.rainfall[:, 0, 1] > 0)
    assert wet[0] == 100 and wet[-1] == 400 + 100 + 17
    assert f.rainfall[110, 0, 0] < f.rainfall[110, 0, 1] < f.rainfall[110, 0, 2]
    assert f.rainfall[110, :, 1].sum() == pytest.approx(2 * hyetograph(18, 10.0)[10])


@pytest.mark.parametrize("bad", [
    dict(nsteps=0), dict(n_storms=-1), dict(spacing=5), dict(n_storms=10), dict(jitter=1.0), dict(noise=-0.1),
])
def test_bad_specs(bad):
    with pytest.raises(BadSpec):
        StormSpec(**bad).validate()


def test_truth_has_zero_cost_without_noise():
    plan, gauge = twin_plan()
    truth = ParameterField.uniform(plan.shape, TWIN_THETA)
    data = synth_generate(plan, truth, StormSpec(), gauge=gauge)
    obs = twin_observation(data, gauge)
    assert len(obs.events) == 3
    cfg = CostConfig(delta_d=0.5, delta_f=0.5, flood={"Epf": 1.0, "Erc": 1.0})
    assert evaluate_cost(cfg, truth, data.clean, obs).total == 0.0
    assert data.noise_nse == 1.0


@settings(max_examples=5)
@given(st.floats(0.01, 0.2), st.integers(0, 100))
def test_reported_noise_level_matches_recomputation(noise, seed):
    plan, gauge = twin_plan()
    data = synth_generate(plan, varying_cp(plan.shape), StormSpec(noise=noise), seed=seed, gauge=gauge)
    assert data.noise_nse == nse(data.discharge, data.clean)
    assert np.all(data.discharge >= 0)
    assert not np.array_equal(data.discharge, data.clean)


def test_out_of_bounds_truth_is_rejected():
    plan, gauge = twin_plan()
    bad = ParameterField.uniform(plan.shape, [500.0, 300.0, 80.0, 12.0, -1.0, 1000.0])
    with pytest.raises(BadSpec):
        synth_generate(plan, bad, StormSpec(), gauge=gauge)


def test_varying_cp_ramp():
    th = varying_cp((3, 3))
    assert th["c_p"][0, 0] == 150.0 and th["c_p"][2, 2] == 600.0
    assert np.all(th["c_r"] == TWIN_THETA[3])
