"""Synthetic forcing and observations for twin experiments."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from hydrocal import metrics
from hydrocal.errors import BadSpec
from hydrocal.grid import D8Raster, build_drainage_plan, delineate_catchment
from hydrocal.model import Forcing, ParameterField, run

logger = logging.getLogger(__name__)

# 3x3 convergent grid draining to the bottom-centre cell
TWIN_D8 = np.array([[4, 5, 6], [3, 5, 7], [3, 5, 7]])
TWIN_OUTLET = (2, 1)
TWIN_THETA = np.array([5.0, 300.0, 80.0, 12.0, -1.0, 1000.0])


@dataclass(frozen=True)
class StormSpec:
    """Deterministic storm train on a dry background.

    Storms are triangular hyetographs of ``duration`` hours peaking at
    ``intensity`` mm/h; the first starts at ``first_start`` and the next ones
    every ``spacing`` hours.  ``jitter`` scales each storm's intensity by a
    seeded factor in ``[1 - jitter, 1 + jitter]``; ``spatial_gradient``
    tilts the rainfall linearly across columns (fraction at the edges).
    """

    nsteps: int = 1400
    n_storms: int = 3
    duration: int = 18
    intensity: float = 10.0
    first_start: int = 200
    spacing: int = 360
    pet: float = 0.1  # mm/h, diurnal cycle with this mean
    jitter: float = 0.0
    spatial_gradient: float = 0.0
    noise: float = 0.0  # multiplicative noise standard deviation on discharge
    start: str = "2000-03-01T00:00"

    def validate(self):
        problems = []
        if self.nsteps <= 0:
            problems.append("nsteps must be positive")
        if self.n_storms < 0:
            problems.append("n_storms must be non-negative")
        if self.n_storms and self.duration <= 0:
            problems.append("duration must be positive")
        if self.intensity < 0 or self.pet < 0:
            problems.append("intensity and pet must be non-negative")
        if self.n_storms and self.spacing < self.duration:
            problems.append("storms overlap: spacing < duration")
        if self.n_storms and self.first_start + (self.n_storms - 1) * self.spacing + self.duration > self.nsteps:
            problems.append("storm train does not fit in nsteps")
        if not 0.0 <= self.jitter < 1.0:
            problems.append("jitter must lie in [0, 1)")
        if not 0.0 <= self.spatial_gradient < 1.0:
            problems.append("spatial_gradient must lie in [0, 1)")
        if self.noise < 0:
            problems.append("noise must be non-negative")
        if problems:
            raise BadSpec("; ".join(problems))


def hyetograph(duration: int, intensity: float) -> np.ndarray:
    t = np.arange(duration) + 0.5
    return intensity * (1.0 - np.abs(2.0 * t / duration - 1.0))


def storm_forcing(shape, spec: StormSpec, seed: int = 0) -> Forcing:
    spec.validate()
    rng = np.random.default_rng(seed)
    series = np.zeros(spec.nsteps)
    scale = 1.0 + spec.jitter * (2.0 * rng.random(spec.n_storms) - 1.0)
    for k in range(spec.n_storms):
        s = spec.first_start + k * spec.spacing
        series[s : s + spec.duration] += scale[k] * hyetograph(spec.duration, spec.intensity)
    ncols = shape[1]
    tilt = 1.0 + spec.spatial_gradient * (np.linspace(-1.0, 1.0, ncols) if ncols > 1 else np.zeros(1))
    rain = series[:, None, None] * np.ones(shape)[None] * tilt[None, None, :]
    hours = np.arange(spec.nsteps) % 24
    diurnal = spec.pet * (1.0 + np.sin(2.0 * np.pi * (hours - 6) / 24.0))
    pet = np.broadcast_to(diurnal[:, None, None], rain.shape).copy()
    return Forcing(rain, pet, np.datetime64(spec.start, "h"))


@dataclass
class SyntheticData:
    forcing: Forcing
    discharge: np.ndarray  # observed (possibly noisy) m3/s
    clean: np.ndarray  # noise-free m3/s
    theta_true: ParameterField
    noise_nse: float = 1.0  # NSE of the noisy series against the clean one
    meta: dict = field(default_factory=dict)


def synth_generate(plan, theta_true: ParameterField, spec: StormSpec, seed: int = 0, gauge=None,
                   noise_seed: int | None = None) -> SyntheticData:
    """Storm forcing and the discharge the model produces for it at ``gauge``."""
    if not theta_true.within_bounds(plan.active):
        raise BadSpec("theta_true lies outside the calibration bounds")
    forcing = storm_forcing(plan.shape, spec, seed)
    if gauge is None:
        outlets = np.flatnonzero(plan.active.ravel() & (plan.downstream.ravel() < 0))
        gauge = delineate_catchment(plan, plan.cell(int(outlets[0])))
    clean = run(plan, theta_true, None, forcing, [gauge]).discharge[gauge.gauge_id]
    obs = clean.copy()
    noise_nse = 1.0
    if spec.noise > 0:
        rng = np.random.default_rng(seed + 1 if noise_seed is None else noise_seed)
        obs = np.maximum(clean * (1.0 + spec.noise * rng.standard_normal(clean.size)), 0.0)
        if np.ptp(clean) > 0:
            noise_nse = metrics.nse(obs, clean)
            logger.info("synthetic noise %.3f: NSE(noisy vs clean) = %.6f", spec.noise, noise_nse)
    return SyntheticData(forcing, obs, clean, theta_true, noise_nse, {"gauge": gauge, "seed": seed, "cell_area": plan.cell_area})


def twin_plan(cellsize: float = 1.0):
    """The 3x3 twin-experiment grid and its outlet catchment."""
    plan = build_drainage_plan(D8Raster(TWIN_D8, cellsize))
    return plan, delineate_catchment(plan, TWIN_OUTLET, "outlet")


def varying_cp(shape, theta=TWIN_THETA, low=150.0, high=600.0) -> ParameterField:
    """Uniform ``theta`` with ``c_p`` ramping from ``low`` to ``high`` across rows."""
    field_ = ParameterField.uniform(shape, theta)
    ramp = np.linspace(low, high, shape[0] * shape[1]).reshape(shape)
    field_["c_p"] = ramp
    return field_


TWIN_WARMUP = 168
PEAK_FRACTION = 0.25


def twin_observation(data: SyntheticData, gauge, warmup: int = TWIN_WARMUP, peak_fraction=PEAK_FRACTION):
    """Wrap synthetic discharge as an :class:`Observation`.

    A short storm train has too few hours for the default 0.995-quantile
    peak threshold to see every storm, so peaks are thresholded at
    ``peak_fraction`` of the largest observed flow instead.
    """
    from hydrocal.calibrate.cost import Observation

    area = gauge.n_cells * data.meta.get("cell_area", 1.0)
    rain = data.forcing.catchment_rainfall(gauge)
    q_mm = data.discharge[warmup:] * 3.6 / area
    kwargs = {"mph": peak_fraction * float(q_mm.max())} if peak_fraction else {}
    return Observation(data.discharge, rain, area, data.forcing.start, warmup, segment_kwargs=kwargs)
