"""Run configuration: an INI file with ``[section]`` headers.

Grammar (every key optional unless marked)::

    [general]       seed
    [paths]         d8 (required), rainfall, pet, discharge, parameters, out
    [period]        start, end, warmup
    [gauge]         outlet = row, col ; id
    [cost]          dominant, kge_weights, delta_d, delta_c, delta_f,
                    continuous = Sig:weight, ... ; flood = Sig:weight, ...
                    alpha_reg (number or "auto"), season_months, convention,
                    peak_surrogate (power | lse)
    [segmentation]  mph ("auto" or mm/h), mpd
    [optimizer]     strategy (sbs | vda | nsga), theta_init, sbs_step0,
                    sbs_min_step, vda_maxiter, vda_gtol, vda_ftol,
                    vda_memory, nsga_pop, nsga_generations, nsga_objectives,
                    saw_constrained
    [sensitivity]   n, signatures
    [gradient]      directions
    [synth]         theta_true, cp_range, nsteps, n_storms, duration,
                    intensity, first_start, spacing, pet, jitter,
                    spatial_gradient, noise, start

Relative paths are resolved against the configuration file's directory.
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from hydrocal.errors import ParseError, ValidationError
from hydrocal.model import LOWER, UPPER
from hydrocal.signatures import CONTINUOUS, EVENT

logger = logging.getLogger(__name__)

MODES = ("run", "segment", "signatures", "sensitivity", "calibrate", "gradient-test", "synth")
STRATEGIES = ("sbs", "vda", "nsga")


def _opt(default, kind, doc=""):
    return field(default=default, metadata={"kind": kind, "doc": doc})


@dataclass(frozen=True)
class General:
    seed: int = _opt(0, "int")


@dataclass(frozen=True)
class Paths:
    d8: str | None = _opt(None, "str")
    rainfall: str | None = _opt(None, "str")
    pet: str | None = _opt(None, "str")
    discharge: str | None = _opt(None, "str")
    parameters: str | None = _opt(None, "str")
    out: str = _opt("out", "str")


@dataclass(frozen=True)
class Period:
    start: str | None = _opt(None, "time")
    end: str | None = _opt(None, "time")
    warmup: int = _opt(0, "int")


@dataclass(frozen=True)
class Gauge:
    outlet: tuple | None = _opt(None, "cell")
    id: str = _opt("gauge", "str")


@dataclass(frozen=True)
class Cost:
    dominant: str = _opt("nse", "str")
    kge_weights: tuple = _opt((1.0, 1.0, 1.0), "floats")
    delta_d: float = _opt(1.0, "float")
    delta_c: float = _opt(0.0, "float")
    delta_f: float = _opt(0.0, "float")
    continuous: tuple = _opt((), "weights")
    flood: tuple = _opt((), "weights")
    alpha_reg: float | None = _opt(None, "auto_float")
    season_months: tuple = _opt((), "ints")
    convention: str = _opt("exceedance", "str")
    peak_surrogate: str = _opt("power", "str")


@dataclass(frozen=True)
class Segmentation:
    mph: float | None = _opt(None, "auto_float")
    mpd: int = _opt(12, "int")


@dataclass(frozen=True)
class Optimizer:
    strategy: str = _opt("sbs", "str")
    theta_init: tuple = _opt((), "floats")
    sbs_step0: float = _opt(0.64, "float")
    sbs_min_step: float = _opt(0.01, "float")
    vda_maxiter: int = _opt(200, "int")
    vda_gtol: float = _opt(1e-6, "float")
    vda_ftol: float = _opt(1e-8, "float")
    vda_memory: int = _opt(10, "int")
    nsga_pop: int = _opt(64, "int")
    nsga_generations: int = _opt(100, "int")
    nsga_objectives: tuple = _opt(("j_d", "Epf"), "names")
    saw_constrained: int = _opt(0, "int")


@dataclass(frozen=True)
class Sensitivity:
    n: int = _opt(64, "int")
    signatures: tuple = _opt(CONTINUOUS + EVENT, "names")


@dataclass(frozen=True)
class Gradient:
    directions: int = _opt(10, "int")


@dataclass(frozen=True)
class Synth:
    theta_true: tuple = _opt((5.0, 300.0, 80.0, 12.0, -1.0, 1000.0), "floats")
    cp_range: tuple = _opt((), "floats")
    nsteps: int = _opt(1400, "int")
    n_storms: int = _opt(3, "int")
    duration: int = _opt(18, "int")
    intensity: float = _opt(10.0, "float")
    first_start: int = _opt(200, "int")
    spacing: int = _opt(360, "int")
    pet: float = _opt(0.1, "float")
    jitter: float = _opt(0.0, "float")
    spatial_gradient: float = _opt(0.0, "float")
    noise: float = _opt(0.0, "float")
    start: str = _opt("2000-03-01T00:00Z", "time")


SECTIONS = {
    "general": General,
    "paths": Paths,
    "period": Period,
    "gauge": Gauge,
    "cost": Cost,
    "segmentation": Segmentation,
    "optimizer": Optimizer,
    "sensitivity": Sensitivity,
    "gradient": Gradient,
    "synth": Synth,
}


@dataclass(frozen=True)
class RunConfig:
    general: General = field(default_factory=General)
    paths: Paths = field(default_factory=Paths)
    period: Period = field(default_factory=Period)
    gauge: Gauge = field(default_factory=Gauge)
    cost: Cost = field(default_factory=Cost)
    segmentation: Segmentation = field(default_factory=Segmentation)
    optimizer: Optimizer = field(default_factory=Optimizer)
    sensitivity: Sensitivity = field(default_factory=Sensitivity)
    gradient: Gradient = field(default_factory=Gradient)
    synth: Synth = field(default_factory=Synth)
    base_dir: str = field(default=".", compare=False)

    @property
    def seed(self) -> int:
        return self.general.seed

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, general=General(seed))

    def cost_config(self, background=None):
        from hydrocal.calibrate.cost import CostConfig

        c = self.cost
        return CostConfig(
            dominant=c.dominant,
            kge_weights=tuple(c.kge_weights),
            continuous=dict(c.continuous),
            flood=dict(c.flood),
            delta_d=c.delta_d,
            delta_c=c.delta_c,
            delta_f=c.delta_f,
            alpha_reg=c.alpha_reg,
            background=background,
            season_months=tuple(c.season_months) or None,
            convention=c.convention,
            peak_surrogate=c.peak_surrogate,
        )

    def segment_kwargs(self) -> dict:
        kw = {"mpd": self.segmentation.mpd}
        if self.segmentation.mph is not None:
            kw["mph"] = self.segmentation.mph
        return kw


# ---------------------------------------------------------------------------
# value conversion
# ---------------------------------------------------------------------------


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _convert(kind, text):
    if kind == "str":
        return text
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "auto_float":
        return None if text.lower() == "auto" else float(text)
    if kind == "time":
        from hydrocal.io import format_time, parse_time

        return format_time(parse_time(text))
    if kind == "floats":
        return tuple(float(t) for t in _split(text))
    if kind == "ints":
        return tuple(int(t) for t in _split(text))
    if kind == "names":
        return tuple(_split(text))
    if kind == "cell":
        vals = tuple(int(t) for t in _split(text))
        if len(vals) != 2:
            raise ValueError("expected 'row, col'")
        return vals
    if kind == "weights":
        out = []
        for item in _split(text):
            name, sep, w = item.partition(":")
            out.append((name.strip(), float(w) if sep else 1.0))
        return tuple(out)
    raise AssertionError(kind)


def _format(kind, value):
    if value is None:
        return "auto" if kind == "auto_float" else ""
    if kind in ("float", "auto_float"):
        return repr(float(value))
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind in ("ints", "names", "cell"):
        return ", ".join(str(v) for v in value)
    if kind == "weights":
        return ", ".join(f"{n}:{float(w)!r}" for n, w in value)
    return str(value)


def _key_lines(text):
    """Map (section, key) -> line number."""
    where = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where[(section, m.group(1).strip().lower())] = i
    return where


# ---------------------------------------------------------------------------
# parse / validate / serialise
# ---------------------------------------------------------------------------


def loads(text: str, base_dir=".", mode: str | None = None, check_files: bool = False) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ParseError("content before the first [section] header", line=e.lineno) from None
    except configparser.DuplicateOptionError as e:
        raise ParseError(f"duplicate key {e.option!r}", line=e.lineno, field=e.option) from None
    except configparser.DuplicateSectionError as e:
        raise ParseError(f"duplicate section [{e.section}]", line=e.lineno) from None
    except configparser.ParsingError as e:
        lineno, line = e.errors[0]
        raise ParseError(f"cannot parse {line!r}", line=lineno) from None

    lines = _key_lines(text)
    problems = []
    sections = {}
    for name in cp.sections():
        key = name.lower()
        if key not in SECTIONS:
            problems.append(f"unknown section [{name}]")
            continue
        cls = SECTIONS[key]
        kinds = {f.name: f.metadata["kind"] for f in fields(cls)}
        values = {}
        for opt, raw in cp.items(name):
            if opt not in kinds:
                problems.append(f"[{key}] unknown key {opt!r}")
                continue
            try:
                values[opt] = _convert(kinds[opt], raw.strip())
            except (ValueError, ParseError) as e:
                raise ParseError(f"bad value {raw!r}: {e}", line=lines.get((key, opt)), field=f"{key}.{opt}") from None
        for f in fields(cls):
            if f.name not in values:
                logger.info("config default [%s] %s = %s", key, f.name, _format(f.metadata["kind"], f.default))
        sections[key] = cls(**values)
    for key, cls in SECTIONS.items():
        if key not in sections:
            sections[key] = cls()
    if problems:
        raise ValidationError(problems)
    cfg = RunConfig(**sections, base_dir=str(base_dir))
    validate(cfg, mode, check_files)
    if cfg.cost.alpha_reg is None:
        logger.info("config default alpha_reg: 1e-4 for distributed calibration, 0 for uniform")
    return cfg


def parse_config(path, mode: str | None = None, check_files: bool = True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from None
    return loads(text, path.parent, mode, check_files)


def dumps(cfg: RunConfig) -> str:
    out = []
    for key, cls in SECTIONS.items():
        sec = getattr(cfg, key)
        out.append(f"[{key}]")
        for f in fields(cls):
            v = getattr(sec, f.name)
            if v is None and f.metadata["kind"] != "auto_float":
                continue
            out.append(f"{f.name} = {_format(f.metadata['kind'], v)}")
        out.append("")
    return "\n".join(out)


def save_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(dumps(cfg))


NEEDS = {
    "run": ("d8", "rainfall", "pet"),
    "segment": ("d8", "rainfall", "pet", "discharge"),
    "signatures": ("d8", "rainfall", "pet", "discharge"),
    "sensitivity": ("d8", "rainfall", "pet"),
    "calibrate": ("d8", "rainfall", "pet", "discharge"),
    "gradient-test": ("d8", "rainfall", "pet", "discharge"),
    "synth": ("d8",),
}


def validate(cfg: RunConfig, mode: str | None = None, check_files: bool = False) -> None:
    """Collect every violation and raise them together."""
    v = []
    if cfg.paths.d8 is None:
        v.append("[paths] d8: required")
    if mode is not None:
        if mode not in MODES:
            v.append(f"unknown mode {mode!r}")
        else:
            for name in NEEDS[mode]:
                p = getattr(cfg.paths, name)
                if p is None:
                    if name != "d8":
                        v.append(f"[paths] {name}: required for '{mode}'")
                elif check_files and not (mode == "synth" and name != "d8") and not cfg.resolve(p).exists():
                    v.append(f"[paths] {name}: {cfg.resolve(p)} does not exist")
    if check_files and mode not in (None, "synth") and cfg.paths.parameters is not None:
        if not cfg.resolve(cfg.paths.parameters).is_dir():
            v.append(f"[paths] parameters: {cfg.resolve(cfg.paths.parameters)} is not a directory")
    c = cfg.cost
    if c.dominant not in ("nse", "kge"):
        v.append(f"[cost] dominant: must be nse or kge, got {c.dominant!r}")
    if len(c.kge_weights) != 3:
        v.append("[cost] kge_weights: need three values")
    for w in (c.delta_d, c.delta_c, c.delta_f, *(w for _, w in c.continuous), *(w for _, w in c.flood)):
        if w < 0:
            v.append("[cost] weights must be non-negative")
            break
    for n, _ in c.continuous:
        if n not in CONTINUOUS:
            v.append(f"[cost] continuous: {n!r} is not a continuous signature")
    for n, _ in c.flood:
        if n not in EVENT:
            v.append(f"[cost] flood: {n!r} is not a flood-event signature")
    if c.alpha_reg is not None and c.alpha_reg < 0:
        v.append("[cost] alpha_reg: must be non-negative")
    if any(not 1 <= m <= 12 for m in c.season_months):
        v.append("[cost] season_months: months are 1..12")
    if c.convention not in ("exceedance", "non-exceedance"):
        v.append("[cost] convention: exceedance or non-exceedance")
    if c.peak_surrogate not in ("power", "lse"):
        v.append("[cost] peak_surrogate: power or lse")
    if cfg.period.warmup < 0:
        v.append("[period] warmup: must be non-negative")
    if cfg.period.start and cfg.period.end:
        span = int((np.datetime64(cfg.period.end[:-1]) - np.datetime64(cfg.period.start[:-1])) / np.timedelta64(1, "h"))
        if span < 0:
            v.append("[period] end precedes start")
        elif cfg.period.warmup >= span + 1:
            v.append("[period] warmup: must be shorter than the period")
    o = cfg.optimizer
    if o.strategy not in STRATEGIES:
        v.append(f"[optimizer] strategy: one of {', '.join(STRATEGIES)}")
    if o.theta_init and (len(o.theta_init) != 6 or np.any(np.array(o.theta_init) < LOWER)
                         or np.any(np.array(o.theta_init) > UPPER)):
        v.append("[optimizer] theta_init: six values within bounds")
    if not 0 < o.sbs_min_step <= o.sbs_step0:
        v.append("[optimizer] sbs_min_step: need 0 < sbs_min_step <= sbs_step0")
    if o.vda_maxiter < 0 or o.vda_memory < 1:
        v.append("[optimizer] vda_maxiter >= 0 and vda_memory >= 1")
    if o.nsga_pop < 2 or o.nsga_generations < 0:
        v.append("[optimizer] nsga_pop >= 2 and nsga_generations >= 0")
    for n in o.nsga_objectives:
        if n != "j_d" and n not in CONTINUOUS + EVENT:
            v.append(f"[optimizer] nsga_objectives: unknown objective {n!r}")
    if not 0 <= o.saw_constrained < max(len(o.nsga_objectives), 1):
        v.append("[optimizer] saw_constrained: index outside the objective list")
    s = cfg.sensitivity
    if s.n < 1 or s.n & (s.n - 1):
        v.append("[sensitivity] n: must be a power of 2")
    for n in s.signatures:
        if n not in CONTINUOUS + EVENT:
            v.append(f"[sensitivity] signatures: unknown signature {n!r}")
    if cfg.gradient.directions < 1:
        v.append("[gradient] directions: at least 1")
    sy = cfg.synth
    if len(sy.theta_true) != 6 or np.any(np.array(sy.theta_true) < LOWER) or np.any(np.array(sy.theta_true) > UPPER):
        v.append("[synth] theta_true: six values within bounds")
    if sy.cp_range and len(sy.cp_range) != 2:
        v.append("[synth] cp_range: two values")
    if v:
        raise ValidationError(v)
