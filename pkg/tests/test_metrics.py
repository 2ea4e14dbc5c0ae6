import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from hydrocal.errors import ConstantObs, DegenerateObs, LengthMismatch
from hydrocal.metrics import kge, kge_loss_grad, nse, nse_loss_grad

series = arrays(np.float64, st.integers(3, 60), elements=st.floats(0.01, 100.0))


def test_nse_hand_values():
    obs = [1.0, 2.0, 3.0]
    assert nse(obs, obs) == 1.0
    assert nse([2.0, 2.0, 2.0], obs) == 0.0
    assert nse([1.5, 2.0, 2.5], obs) == pytest.approx(0.75, abs=1e-15)


def test_kge_hand_values():
    obs = np.array([1.0, 2.0, 4.0, 3.0])
    assert kge(obs, obs) == pytest.approx(1.0, abs=1e-15)
    assert kge(2 * obs, obs) == pytest.approx(1 - np.sqrt(2), abs=1e-12)
    # a pure shift keeps r and sigma; with the bias term off the score is perfect
    assert kge(obs + 5.0, obs, 1.0, 1.0, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_errors():
    with pytest.raises(ConstantObs):
        nse([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(LengthMismatch):
        nse([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateObs):
        kge([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(DegenerateObs):
        kge([1.0, 2.0], [-1.0, 1.0])


@given(series, st.integers(0, 2**31))
def test_metrics_match_oracle(obs, seed):
    if np.ptp(obs) < 1e-6:
        return
    sim = obs * np.random.default_rng(seed).uniform(0.5, 1.5, obs.size)
    assert nse(sim, obs) == pytest.approx(oracles.nse(list(sim), list(obs)), rel=1e-9, abs=1e-9)
    if np.ptp(sim) > 1e-6:
        assert kge(sim, obs) == pytest.approx(oracles.kge(list(sim), list(obs)), rel=1e-9, abs=1e-9)
    assert nse(sim, obs) <= 1.0 and kge(sim, obs) <= 1.0


def test_kge_without_correlation_term_is_permutation_invariant(rng):
    obs = rng.uniform(1, 10, 50)
    sim = rng.uniform(1, 10, 50)
    p = rng.permutation(50)
    assert kge(sim[p], obs, 0.0, 1.0, 1.0) == pytest.approx(kge(sim, obs, 0.0, 1.0, 1.0), abs=1e-12)
    # NSE is not: a concrete counterexample
    obs = np.array([1.0, 2.0, 3.0])
    sim = np.array([1.0, 2.0, 3.0])
    assert nse(sim[[2, 1, 0]], obs) != nse(sim, obs)


@pytest.mark.parametrize("loss", [nse_loss_grad, kge_loss_grad])
def test_loss_gradients(loss, rng):
    obs = rng.uniform(1, 5, 30)
    sim = obs * rng.uniform(0.7, 1.3, 30)
    v, g = loss(sim, obs)
    for k in range(0, 30, 7):
        h = 1e-6
        e = np.zeros(30)
        e[k] = h
        fd = (loss(sim + e, obs)[0] - loss(sim - e, obs)[0]) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)
