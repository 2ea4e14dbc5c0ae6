import pytest
from hypothesis import given
from hypothesis import strategies as st

from hydrocal.config import RunConfig, dumps, loads, parse_config, save_config
from hydrocal.errors import ParseError, ValidationError

MINIMAL = "[paths]\nd8 = grid.asc\n"


def test_defaults_fill_every_section():
    cfg = loads(MINIMAL)
    assert cfg.paths.d8 == "grid.asc" and cfg.paths.out == "out"
    assert cfg.cost.dominant == "nse" and cfg.cost.alpha_reg is None and cfg.cost.peak_surrogate == "power"
    assert cfg.optimizer.strategy == "sbs" and cfg.optimizer.nsga_pop == 64
    assert cfg.sensitivity.n == 64 and len(cfg.sensitivity.signatures) == 16
    cc = cfg.cost_config()
    assert cc.alpha("distributed") == 1e-4 and cc.alpha("uniform") == 0.0


def test_missing_grid_is_reported():
    with pytest.raises(ValidationError) as err:
        loads("[general]\nseed = 3\n")
    assert "[paths] d8: required" in err.value.violations


def test_violations_are_collected_together():
    text = MINIMAL + "[cost]\ndominant = rmse\nflood = Crc:1\n[sensitivity]\nn = 100\n"
    with pytest.raises(ValidationError) as err:
        loads(text)
    assert len(err.value.violations) == 3


def test_parse_error_points_at_the_line():
    text = MINIMAL + "[period]\nwarmup = 12\nstart = not-a-time\n"
    with pytest.raises(ParseError) as err:
        loads(text)
    assert err.value.line == 5 and err.value.field == "period.start"
    with pytest.raises(ParseError) as err:
        loads("d8 = x\n")
    assert err.value.line == 1
    with pytest.raises(ValidationError):
        loads(MINIMAL + "[bogus]\nx = 1\n")


def test_mode_requirements_and_files(tmp_path):
    with pytest.raises(ValidationError) as err:
        loads(MINIMAL, mode="calibrate")
    assert any("discharge" in v for v in err.value.violations)
    (tmp_path / "c.ini").write_text(MINIMAL)
    with pytest.raises(ValidationError):
        parse_config(tmp_path / "c.ini", mode="synth")  # grid file absent
    (tmp_path / "grid.asc").write_text("")
    assert parse_config(tmp_path / "c.ini", mode="synth").resolve("grid.asc") == tmp_path / "grid.asc"


def test_weights_and_lists():
    cfg = loads(MINIMAL + "[cost]\nflood = Epf:0.5, Eff\ncontinuous = Crc:2\nseason_months = 3,4,5\n"
                "alpha_reg = auto\n[gauge]\noutlet = 2, 1\n")
    assert cfg.cost.flood == (("Epf", 0.5), ("Eff", 1.0))
    assert cfg.cost_config().flood == {"Epf": 0.5, "Eff": 1.0}
    assert cfg.cost_config().season_months == (3, 4, 5)
    assert cfg.gauge.outlet == (2, 1)


@given(
    st.integers(0, 2**31),
    st.sampled_from(["sbs", "vda", "nsga"]),
    st.floats(0, 5, allow_subnormal=False),
    st.sampled_from(["power", "lse"]),
    st.integers(0, 500),
)
def test_dump_and_reload_is_identity(seed, strategy, delta_f, surrogate, warmup):
    text = (MINIMAL + f"[general]\nseed = {seed}\n[optimizer]\nstrategy = {strategy}\n"
            f"[cost]\ndelta_f = {delta_f!r}\nflood = Epf:1\npeak_surrogate = {surrogate}\n[period]\nwarmup = {warmup}\n")
    cfg = loads(text)
    again = loads(dumps(cfg))
    assert again == cfg
    assert dumps(again) == dumps(cfg)


def test_save_and_seed_override(tmp_path):
    cfg = loads(MINIMAL).with_seed(42)
    save_config(tmp_path / "x.ini", cfg)
    assert parse_config(tmp_path / "x.ini", check_files=False).seed == 42
    assert isinstance(cfg, RunConfig)
