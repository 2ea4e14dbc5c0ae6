import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from hydrocal.errors import EmptySeries, NegativeFlow, WindowOutOfRange, ZeroEventRainfall, ZeroRainfall
from hydrocal.segmentation import FloodEvent
from hydrocal.signatures import (
    CONTINUOUS,
    EVENT,
    baseflow_separate,
    continuous_signatures,
    event_signatures,
    flow_percentile,
    signature,
    split_flow,
)

flows = arrays(np.float64, st.integers(3, 120), elements=st.floats(0.0, 50.0))


def storm(n=200, seed=0):
    rng = np.random.default_rng(seed)
    P = np.zeros(n)
    P[20:32] = rng.uniform(1, 8, 12)
    P[110:118] = rng.uniform(1, 5, 8)
    Q = 0.2 + np.convolve(P, 0.6 * 0.8 ** np.arange(60))[:n] + 0.01 * rng.random(n)
    return P, Q


def test_constant_and_zero_flow_separation():
    qb, qq = baseflow_separate(np.full(10, 3.0))
    assert np.all(qb == 3.0) and np.all(qq == 0.0)
    qb, qq = baseflow_separate(np.zeros(10))
    assert np.all(qb == 0.0) and np.all(qq == 0.0)


def test_pulse_matches_recursive_filter_oracle():
    q = np.array([1, 1, 2, 6, 12, 9, 6, 4, 3, 2.5, 2, 1.8, 1.6, 1.5, 1.4, 1.3, 1.2, 1.1, 1.1, 1.0])
    qb, _ = baseflow_separate(q)
    assert np.allclose(qb, oracles.lyne_hollick(list(q)), rtol=0, atol=1e-12)


@given(flows)
def test_separation_partitions_flow(q):
    qb, qq = baseflow_separate(q)
    assert np.array_equal(qb + qq, q)
    assert np.all(qb >= 0) and np.all(qb <= q)
    assert np.allclose(qb, oracles.lyne_hollick(list(q)), rtol=1e-12, atol=1e-12)


def test_separation_errors():
    with pytest.raises(NegativeFlow):
        baseflow_separate(np.array([1.0, -1.0, 2.0]))
    with pytest.raises(EmptySeries):
        baseflow_separate(np.array([1.0, 2.0]))


def test_percentiles():
    assert flow_percentile(np.full(7, 2.5), 0.3) == 2.5
    q = np.arange(1.0, 101.0)
    assert flow_percentile(q, 0.5) == oracles.quantile(list(q), 0.5) == 50.5
    assert flow_percentile(q, 0.02) == pytest.approx(oracles.quantile(list(q), 0.98)) == pytest.approx(98.02)
    assert flow_percentile(q, 0.02, "cdf") == pytest.approx(2.98)
    with pytest.raises(EmptySeries):
        flow_percentile(np.array([]), 0.5)


@given(flows)
def test_exceedance_percentiles_are_ordered(q):
    v = [flow_percentile(q, p) for p in (0.02, 0.1, 0.5, 0.9)]
    assert v[0] >= v[1] >= v[2] >= v[3]


def test_instant_response_gives_unit_runoff_coefficient():
    P, _ = storm()
    assert continuous_signatures(P, P.copy())["Crc"].value == pytest.approx(1.0)


def test_zero_discharge_edge():
    P, _ = storm()
    s = continuous_signatures(P, np.zeros_like(P))
    assert s["Crc"].value == s["Crchf"].value == s["Crclf"].value == 0.0
    assert np.isnan(s["Crch2r"].value) and s["Crch2r"].flag == "undefined"
    with pytest.raises(ZeroRainfall):
        continuous_signatures(np.zeros(10), np.ones(10))


def test_continuous_signatures_match_summation_oracle():
    P, Q = storm()
    got = continuous_signatures(P, Q)
    ref = oracles.continuous_signatures(list(P), list(Q))
    for k in CONTINUOUS:
        assert got[k].value == pytest.approx(ref[k], rel=1e-12, abs=1e-12), k
    assert got["Crc"].unit == "-" and got["Cfp2"].unit == "mm"


def test_event_signatures_match_summation_oracle():
    P, Q = storm()
    ev = FloodEvent(18, 35, 90)
    got = event_signatures(P, Q, ev, event_id=3)
    ref = oracles.event_signatures(list(P), list(Q), 18, 90)
    for k in EVENT:
        assert got[k].value == pytest.approx(ref[k], rel=1e-12, abs=1e-12), k
    assert got["Eff"].value + got["Ebf"].value == pytest.approx(Q[18:91].sum(), rel=1e-10)
    assert got["Epf"].event_id == 3 and got["Elt"].unit == "h"


def test_event_edge_cases():
    P = np.zeros(50)
    P[10] = 4.0
    Q = np.full(50, 2.0)
    ev = FloodEvent(5, 20, 30)
    s = event_signatures(P, Q, ev)
    assert s["Epf"].value == 2.0 and s["Eff"].value == 0.0 and s["Ebf"].value == pytest.approx(2.0 * 26)
    Q = np.ones(50)
    Q[16] = 5.0
    assert event_signatures(P, Q, ev)["Elt"].value == 6.0
    with pytest.raises(WindowOutOfRange):
        event_signatures(P, Q, FloodEvent(40, 45, 60))
    with pytest.raises(ZeroEventRainfall):
        event_signatures(P, Q, FloodEvent(20, 25, 30))


@given(arrays(np.float64, st.integers(10, 100), elements=st.floats(0.0, 30.0)), st.integers(0, 2**31))
def test_partition_identities(Q, seed):
    P = np.random.default_rng(seed).uniform(0.1, 5.0, Q.size)
    s = continuous_signatures(P, Q)
    assert abs(s["Crchf"].value + s["Crclf"].value - s["Crc"].value) <= 1e-10
    split = split_flow(Q)
    w = (2, Q.size - 3)
    erc = signature("Erc", P, Q, window=w, split=split)
    parts = signature("Erchf", P, Q, window=w, split=split) + signature("Erclf", P, Q, window=w, split=split)
    assert abs(parts - erc) <= 1e-10


@given(st.floats(0.1, 20.0))
def test_scale_consistency(lam):
    P, Q = storm()
    a = continuous_signatures(P, Q)
    b = continuous_signatures(lam * P, lam * Q)
    for k in ("Crc", "Crchf", "Crclf", "Crch2r"):
        assert b[k].value == pytest.approx(a[k].value, rel=1e-9)
    for k in ("Cfp2", "Cfp10", "Cfp50", "Cfp90"):
        assert b[k].value == pytest.approx(lam * a[k].value, rel=1e-9)
    ev = FloodEvent(18, 35, 90)
    a = event_signatures(P, Q, ev)
    b = event_signatures(lam * P, lam * Q, ev)
    for k in ("Epf", "Eff", "Ebf"):
        assert b[k].value == pytest.approx(lam * a[k].value, rel=1e-9)
    for k in ("Erc", "Erchf", "Erclf"):
        assert b[k].value == pytest.approx(a[k].value, rel=1e-9)


@pytest.mark.parametrize("sig", [s for s in CONTINUOUS + EVENT if s != "Elt"])
@pytest.mark.parametrize("smooth", [False, True, "lse"])
def test_signature_gradients(sig, smooth):
    P, Q = storm(120, seed=3)
    Q = Q + np.linspace(0, 0.5, Q.size)  # break ties in the percentiles
    win = None if sig in CONTINUOUS else (15, 80)
    v, g = signature(sig, P, Q, window=win, smooth=smooth, grad=True)
    rng = np.random.default_rng(1)
    d = rng.standard_normal(Q.size) * 1e-3
    h = 1e-5
    fd = (signature(sig, P, Q + h * d, window=win, smooth=smooth)
          - signature(sig, P, Q - h * d, window=win, smooth=smooth)) / (2 * h)
    assert g @ d == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_smooth_peak_tracks_the_max_and_scales():
    P, Q = storm()
    exact = signature("Epf", P, Q, window=(18, 90))
    smooth = signature("Epf", P, Q, window=(18, 90), smooth=True)
    assert exact <= smooth <= exact * 73 ** (1 / 100)
    assert signature("Epf", P, 7 * Q, window=(18, 90), smooth=True) == pytest.approx(7 * smooth, rel=1e-12)
    lse = signature("Epf", P, Q, window=(18, 90), smooth="lse")
    assert exact <= lse <= exact + np.log(73) / 50
