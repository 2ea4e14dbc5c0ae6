import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hydrocal import ParameterField
from hydrocal.calibrate.pareto import ParetoSet
from hydrocal.errors import LengthMismatch, MissingForcing, NegativeFlow, ParseError
from hydrocal.io import (
    format_time,
    load_forcing,
    parse_time,
    read_discharge,
    read_events,
    read_hourly_dir,
    read_iterates,
    read_parameters,
    read_pareto,
    read_signatures,
    read_sobol,
    read_stacked,
    write_discharge,
    write_events,
    write_hourly_dir,
    write_iterates,
    write_parameters,
    write_pareto,
    write_signatures,
    write_sobol,
    write_stacked,
)
from hydrocal.model import LOWER, UPPER
from hydrocal.segmentation import FloodEvent

T0 = np.datetime64("2001-02-28T22", "h")
finite = st.floats(0, 1e6, allow_nan=False, allow_subnormal=False)


def test_time_format_round_trip():
    assert format_time(T0) == "2001-02-28T22:00Z"
    assert parse_time("2001-02-28T22:00Z") == T0
    assert parse_time("2001-02-28T22:00:00+00:00") == T0
    with pytest.raises(ParseError):
        parse_time("2001-02-28T22:30Z")
    with pytest.raises(ParseError):
        parse_time("yesterday")


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 3), st.integers(1, 3)), elements=finite))
def test_stacked_forcing_round_trip(tmp_path_factory, stack):
    p = tmp_path_factory.mktemp("s") / "rain.csv"
    write_stacked(p, stack, T0, 2.5)
    back, start, cs = read_stacked(p)
    assert np.array_equal(back, stack) and start == T0 and cs == 2.5
    text = p.read_text()
    write_stacked(p, back, start, cs)
    assert p.read_text() == text


def test_stacked_forcing_errors(tmp_path):
    p = tmp_path / "r.csv"
    write_stacked(p, np.ones((3, 1, 2)), T0)
    lines = p.read_text().splitlines()
    (tmp_path / "gap.csv").write_text("\n".join(lines[:5] + [lines[5].replace("T23:00Z", "T21:00Z")]) + "\n")
    with pytest.raises(MissingForcing):
        read_stacked(tmp_path / "gap.csv")
    (tmp_path / "cols.csv").write_text("\n".join(lines[:4] + [lines[4] + ",1.0"]) + "\n")
    with pytest.raises(ParseError) as err:
        read_stacked(tmp_path / "cols.csv")
    assert err.value.line == 5


def test_hourly_directory_round_trip(tmp_path):
    stack = np.arange(24.0).reshape(4, 2, 3) / 7
    write_hourly_dir(tmp_path / "rain", stack, T0, 1.0)
    write_hourly_dir(tmp_path / "pet", stack * 0, T0, 1.0)
    back, start, _ = read_hourly_dir(tmp_path / "rain")
    assert np.array_equal(back, stack) and start == T0
    f = load_forcing(tmp_path / "rain", tmp_path / "pet")
    assert f.nsteps == 4 and f.start == T0
    write_hourly_dir(tmp_path / "short", stack[:3], T0, 1.0)
    with pytest.raises(LengthMismatch):
        load_forcing(tmp_path / "rain", tmp_path / "short")
    with pytest.raises(MissingForcing):
        read_hourly_dir(tmp_path / "empty")


@given(arrays(np.float64, st.integers(1, 50), elements=finite))
def test_discharge_round_trip(tmp_path_factory, q):
    p = tmp_path_factory.mktemp("q") / "q.csv"
    write_discharge(p, q, T0)
    back, start = read_discharge(p)
    assert np.array_equal(back, q) and start == T0


def test_discharge_errors(tmp_path):
    p = tmp_path / "q.csv"
    p.write_text("timestamp,discharge_m3s\n2000-01-01T00:00Z,-1.0\n")
    with pytest.raises(NegativeFlow):
        read_discharge(p)
    p.write_text("timestamp,discharge_m3s\n2000-01-01T00:00Z,abc\n")
    with pytest.raises(ParseError):
        read_discharge(p)
    p.write_text("time,q\n")
    with pytest.raises(ParseError):
        read_discharge(p)


def test_result_tables_round_trip(tmp_path):
    sig_rows = [("g", "continuous", None, "Crc", 0.25, "-"), ("g", "event", 2, "Epf", 1.5, "mm/h")]
    write_signatures(tmp_path / "s.csv", sig_rows)
    assert read_signatures(tmp_path / "s.csv") == sig_rows

    sob = [("Epf", "c_r", 0.5, 0.625), ("Epf", "c_i", 0.0, 0.01)]
    write_sobol(tmp_path / "sob.csv", sob)
    assert read_sobol(tmp_path / "sob.csv") == sob
    assert (tmp_path / "sob.csv").read_text().splitlines()[0] == "signature,parameter,first_order,total_order"

    log = [{"iter": 0, "J": 1.0, "j_d": 0.5, "j_c": 0.0, "j_f": 0.5, "J_reg": 0.0, "grad_norm": 2.0}]
    write_iterates(tmp_path / "it.csv", log)
    assert read_iterates(tmp_path / "it.csv") == log

    events = [FloodEvent(3, 10, 40, 2), FloodEvent(100, 120, 200)]
    write_events(tmp_path / "ev.csv", events, T0, "outlet")
    back = read_events(tmp_path / "ev.csv", T0)
    assert [b[2] for b in back] == events and back[1][:2] == ("outlet", 1)


def test_pareto_and_parameter_round_trip(tmp_path):
    ps = ParetoSet(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[0.1, 0.9], [0.5, 0.2]]))
    write_pareto(tmp_path / "p.csv", ps, selected=1)
    th, ob, sel = read_pareto(tmp_path / "p.csv")
    assert np.array_equal(th, ps.thetas) and np.array_equal(ob, ps.objectives) and sel == 1
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "solution_id,theta_1,theta_2,obj_1,obj_2,selected"

    theta = ParameterField(LOWER[:, None, None] + np.random.default_rng(0).random((6, 2, 3))
                           * (UPPER - LOWER)[:, None, None])
    write_parameters(tmp_path / "par", theta, 1.0)
    assert np.array_equal(read_parameters(tmp_path / "par").values, theta.values)
