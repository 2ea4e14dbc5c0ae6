"""Gridded six-parameter, five-state conceptual model.

Per cell and hourly step the vertical column is::

    rain, PET -> interception (c_i) -> production (c_p, GR tanh forms)
              -> 90 % fast transfer (c_tr) + 10 % slow transfer (c_tl)
                 both receiving the exchange ml * (h_tr / c_tr) ** 3.5
              -> local runoff

Local runoff and the inflow from upstream cells enter the cell's linear
routing reservoir (time constant c_r, outflow fraction 1 - exp(-dt / c_r)).
Cells are visited in topological order so that an upstream outflow reaches
its downstream neighbour within the same step.

Storages are in mm over the cell, discharge leaves a cell in mm km2 / h and
is reported in m3/s (1 mm km2 / h = 1 / 3.6 m3/s).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np

from hydrocal.errors import MissingForcing, NonFiniteFlux, ShapeMismatch
from hydrocal.grid import Catchment, DrainagePlan

PARAM_NAMES = ("c_i", "c_p", "c_tr", "c_r", "ml", "c_tl")
STATE_NAMES = ("h_i", "h_p", "h_tr", "h_r", "h_tl")

BOUNDS = {
    "c_i": (1.0, 100.0),
    "c_p": (1.0, 2000.0),
    "c_tr": (1.0, 1000.0),
    "c_r": (1.0, 200.0),
    "ml": (-20.0, 5.0),
    "c_tl": (1.0, 10000.0),
}
LOWER = np.array([BOUNDS[n][0] for n in PARAM_NAMES])
UPPER = np.array([BOUNDS[n][1] for n in PARAM_NAMES])

FAST_SPLIT = 0.9
EXCHANGE_EXPONENT = 3.5
MM_KM2_PER_H_TO_M3S = 1.0 / 3.6

I_CI, I_CP, I_CTR, I_CR, I_ML, I_CTL = range(6)
S_HI, S_HP, S_HTR, S_HR, S_HTL = range(5)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _drain(h, c):
    """Quartic power-law outflow; returns (remaining storage, outflow)."""
    if h <= 0.0:
        return 0.0, 0.0
    u = (h / c) ** 4
    rem = h * (1.0 + u) ** -0.25
    return rem, h - rem


@numba.njit(cache=True)
def _vertical(ci, cp, ctr, ctl, ml, hi, hp, htr, htl, p, e):
    # interception
    avail = hi + p
    ei = min(e, avail)
    en = e - ei
    pn = max(0.0, avail - ei - ci)
    hi_new = min(ci, avail - ei)

    # production
    x = hp / cp
    ps = 0.0
    es = 0.0
    if pn > 0.0:
        tp = np.tanh(pn / cp)
        ps = cp * (1.0 - x * x) * tp / (1.0 + x * tp)
    if en > 0.0:
        te = np.tanh(en / cp)
        es = hp * (2.0 - x) * te / (1.0 + (1.0 - x) * te)
    hp_new = hp + ps - es
    pr = pn - ps

    # transfer with exchange, clipped at empty
    f = ml * (htr / ctr) ** EXCHANGE_EXPONENT
    tr_in = htr + FAST_SPLIT * pr
    tl_in = htl + (1.0 - FAST_SPLIT) * pr
    htr_b = max(0.0, tr_in + f)
    htl_b = max(0.0, tl_in + f)
    exch = (htr_b - tr_in) + (htl_b - tl_in)

    htr_new, qtr = _drain(htr_b, ctr)
    htl_new, qtl = _drain(htl_b, ctl)
    return hi_new, hp_new, htr_new, htl_new, qtr + qtl, ei + es, exch


@numba.njit(cache=True)
def _route(cr, hr, inflow_mm):
    k = 1.0 - np.exp(-1.0 / cr)
    hr_a = hr + inflow_mm
    out = k * hr_a
    return hr_a - out, out


@numba.njit(cache=True)
def _simulate(params, h0, rain, pet, down, area, every):
    """Run the model over all active cells (in topological order).

    ``every`` > 0 stores the state at the start of each step t with
    t % every == 0 (``every`` = 1 keeps the full trajectory).
    """
    nt = rain.shape[0]
    n = params.shape[0]
    q = np.zeros((nt, n))
    exch_log = np.zeros((nt, n))
    evap_log = np.zeros((nt, n))
    nck = (nt + every - 1) // every if every > 0 else 0
    ckpt = np.zeros((nck, n, 5))
    h = h0.copy()
    inflow = np.zeros(n)
    for t in range(nt):
        if every > 0 and t % every == 0:
            ckpt[t // every] = h
        inflow[:] = 0.0
        for i in range(n):
            hi, hp, htr, htl, r, ev, ex = _vertical(
                params[i, I_CI], params[i, I_CP], params[i, I_CTR], params[i, I_CTL], params[i, I_ML],
                h[i, S_HI], h[i, S_HP], h[i, S_HTR], h[i, S_HTL], rain[t, i], pet[t, i],
            )
            hr, out = _route(params[i, I_CR], h[i, S_HR], r + inflow[i] / area)
            h[i, S_HI] = hi
            h[i, S_HP] = hp
            h[i, S_HTR] = htr
            h[i, S_HTL] = htl
            h[i, S_HR] = hr
            q[t, i] = out * area
            exch_log[t, i] = ex * area
            evap_log[t, i] = ev * area
            if down[i] >= 0:
                inflow[down[i]] += q[t, i]
    return q, h, exch_log, evap_log, ckpt


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


class _Stacked:
    names: tuple = ()

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[0] != len(self.names):
            raise ShapeMismatch(f"expected array of shape ({len(self.names)}, nrows, ncols)")
        self.values = values

    def __getitem__(self, name):
        return self.values[self.names.index(name)]

    def __setitem__(self, name, grid):
        self.values[self.names.index(name)] = grid

    @property
    def shape(self):
        return self.values.shape[1:]

    def copy(self):
        return type(self)(self.values.copy())

    def as_dict(self):
        return {n: self.values[k] for k, n in enumerate(self.names)}

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.values, other.values, equal_nan=True)

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"


class ParameterField(_Stacked):
    """Six parameter grids ordered as :data:`PARAM_NAMES`."""

    names = PARAM_NAMES

    @classmethod
    def uniform(cls, shape, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (6,):
            raise ShapeMismatch("uniform parameter vector must have 6 entries")
        return cls(np.broadcast_to(theta[:, None, None], (6, *shape)).copy())

    @classmethod
    def from_grids(cls, **grids):
        return cls(np.stack([np.asarray(grids[n], dtype=float) for n in PARAM_NAMES]))

    c_i = property(lambda self: self["c_i"])
    c_p = property(lambda self: self["c_p"])
    c_tr = property(lambda self: self["c_tr"])
    c_r = property(lambda self: self["c_r"])
    ml = property(lambda self: self["ml"])
    c_tl = property(lambda self: self["c_tl"])

    def within_bounds(self, mask=None) -> bool:
        v = self.values if mask is None else self.values[:, mask]
        lo = LOWER.reshape((6,) + (1,) * (v.ndim - 1))
        hi = UPPER.reshape((6,) + (1,) * (v.ndim - 1))
        return bool(np.all((v >= lo) & (v <= hi)))

    def clip(self):
        lo = LOWER[:, None, None]
        hi = UPPER[:, None, None]
        return ParameterField(np.clip(self.values, lo, hi))


class StateField(_Stacked):
    """Five state grids ordered as :data:`STATE_NAMES` (mm)."""

    names = STATE_NAMES

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros((5, *shape)))

    @classmethod
    def default(cls, theta: ParameterField):
        """Half-full production store, transfer stores at 20 % of capacity."""
        v = np.zeros((5, *theta.shape))
        v[S_HP] = 0.5 * theta["c_p"]
        v[S_HTR] = 0.2 * theta["c_tr"]
        v[S_HTL] = 0.2 * theta["c_tl"]
        return cls(v)

    h_i = property(lambda self: self["h_i"])
    h_p = property(lambda self: self["h_p"])
    h_tr = property(lambda self: self["h_tr"])
    h_r = property(lambda self: self["h_r"])
    h_tl = property(lambda self: self["h_tl"])


@dataclass
class Forcing:
    """Hourly rainfall and PET grids (mm/h), shape ``(nsteps, nrows, ncols)``."""

    rainfall: np.ndarray
    pet: np.ndarray
    start: np.datetime64 = np.datetime64("2000-01-01T00", "h")

    def __post_init__(self):
        self.rainfall = np.asarray(self.rainfall, dtype=float)
        self.pet = np.asarray(self.pet, dtype=float)
        self.start = np.datetime64(self.start, "h")
        if self.rainfall.ndim != 3 or self.rainfall.shape != self.pet.shape:
            raise ShapeMismatch("rainfall and PET must be equal-shape (nsteps, nrows, ncols) stacks")

    @property
    def nsteps(self) -> int:
        return self.rainfall.shape[0]

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + np.arange(self.nsteps).astype("timedelta64[h]")

    def window(self, start: int, stop: int) -> "Forcing":
        return Forcing(self.rainfall[start:stop], self.pet[start:stop], self.start + np.timedelta64(start, "h"))

    def catchment_rainfall(self, catchment: Catchment) -> np.ndarray:
        """Areal mean rainfall over the catchment (mm/h)."""
        flat = self.rainfall.reshape(self.nsteps, -1)
        return flat[:, catchment.members].mean(axis=1)


@dataclass
class SimulationResult:
    discharge: dict  # gauge id -> m3/s series
    final_state: StateField
    ledger: dict
    timestamps: np.ndarray
    cell_outflow: np.ndarray = field(repr=False)  # (nsteps, n_active) mm km2 / h, topo order
    exchange_log: np.ndarray = field(repr=False)  # (nsteps, n_active) mm km2


class CellStep(NamedTuple):
    state: tuple
    runoff: float
    exchange: float
    evaporation: float


def step_cell(params, state, p: float, e: float) -> CellStep:
    """Advance the vertical column of one cell by one hour.

    ``params`` is indexed like :data:`PARAM_NAMES`, ``state`` like
    :data:`STATE_NAMES`; the routing store ``h_r`` is passed through
    untouched (routing happens in :func:`run`).
    """
    ci, cp, ctr, _cr, ml, ctl = (float(v) for v in params)
    hi, hp, htr, hr, htl = (float(v) for v in state)
    hi2, hp2, htr2, htl2, r, ev, ex = _vertical(ci, cp, ctr, ctl, ml, hi, hp, htr, htl, float(p), float(e))
    out = (hi2, hp2, htr2, hr, htl2)
    if not np.all(np.isfinite(out + (r, ev, ex))):
        raise NonFiniteFlux("non-finite flux in cell step")
    return CellStep(out, r, ex, ev)


def _active_vectors(plan: DrainagePlan, grids: np.ndarray) -> np.ndarray:
    """(k, nrows, ncols) -> (n_active, k) in topological order."""
    flat = grids.reshape(grids.shape[0], -1)
    return np.ascontiguousarray(flat[:, plan.order].T)


def _forcing_vectors(plan: DrainagePlan, forcing: Forcing):
    nt = forcing.nsteps
    rain = np.ascontiguousarray(forcing.rainfall.reshape(nt, -1)[:, plan.order])
    pet = np.ascontiguousarray(forcing.pet.reshape(nt, -1)[:, plan.order])
    if not (np.all(np.isfinite(rain)) and np.all(np.isfinite(pet))):
        bad = np.flatnonzero(~(np.isfinite(rain).all(axis=1) & np.isfinite(pet).all(axis=1)))
        raise MissingForcing(f"missing forcing at {bad.size} step(s), first index {bad[0]}")
    if np.any(rain < 0) or np.any(pet < 0):
        raise MissingForcing("negative rainfall or PET in forcing")
    return rain, pet


def prepare(plan: DrainagePlan, theta: ParameterField, h0: StateField | None, forcing: Forcing):
    """Validate shapes and flatten inputs onto the active cells."""
    if theta.shape != plan.shape:
        raise ShapeMismatch(f"parameter grid {theta.shape} != drainage plan {plan.shape}")
    if forcing.rainfall.shape[1:] != plan.shape:
        raise ShapeMismatch(f"forcing grid {forcing.rainfall.shape[1:]} != drainage plan {plan.shape}")
    if h0 is None:
        h0 = StateField.default(theta)
    if h0.shape != plan.shape:
        raise ShapeMismatch(f"state grid {h0.shape} != drainage plan {plan.shape}")
    params = _active_vectors(plan, theta.values)
    state = _active_vectors(plan, h0.values)
    rain, pet = _forcing_vectors(plan, forcing)
    return params, state, rain, pet


def run(
    plan: DrainagePlan,
    theta: ParameterField,
    h0: StateField | None,
    forcing: Forcing,
    gauges=(),
) -> SimulationResult:
    """Simulate discharge at the gauges.

    ``h0=None`` selects the default initial state derived from ``theta``.
    """
    params, state, rain, pet = prepare(plan, theta, h0, forcing)
    down = plan.downstream_positions()
    area = plan.cell_area
    q, h_end, exch, evap, _ = _simulate(params, state, rain, pet, down, area, 0)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(h_end))):
        raise NonFiniteFlux("simulation produced non-finite values")

    pos = plan.position()
    discharge = {}
    for g in gauges:
        p = pos[plan.flat(g.outlet)]
        discharge[g.gauge_id] = q[:, p] * MM_KM2_PER_H_TO_M3S

    final = np.zeros((5, plan.shape[0] * plan.shape[1]))
    final[:, plan.order] = h_end.T
    outlets = down < 0
    ledger = {
        "total_rainfall": float(rain.sum() * area),
        "total_evaporation": float(evap.sum()),
        "total_exchange": float(exch.sum()),
        "delta_storage": float((h_end.sum() - state.sum()) * area),
        "total_outflow": float(q[:, outlets].sum()),
    }
    return SimulationResult(
        discharge=discharge,
        final_state=StateField(final.reshape(5, *plan.shape)),
        ledger=ledger,
        timestamps=forcing.timestamps,
        cell_outflow=q,
        exchange_log=exch,
    )


def mass_balance(result: SimulationResult) -> float:
    """Closure residual P - E - dS - Q + X over the whole domain (mm km2).

    X is the net water added by the exchange term (negative when ``ml < 0``
    drains the transfer stores), so a consistent run closes to rounding.
    """
    lg = result.ledger
    return (
        lg["total_rainfall"]
        - lg["total_evaporation"]
        - lg["delta_storage"]
        - lg["total_outflow"]
        + lg["total_exchange"]
    )


def water_imbalance(result: SimulationResult) -> float:
    """P - E - dS - Q, i.e. the water the exchange term removed (mm km2)."""
    lg = result.ledger
    return lg["total_rainfall"] - lg["total_evaporation"] - lg["delta_storage"] - lg["total_outflow"]


def simulate_batch(plan: DrainagePlan, gauge: Catchment, thetas, forcing: Forcing, h0: StateField | None = None,
                   chunk: int = 256) -> np.ndarray:
    """Gauge discharge (m3/s) for many spatially uniform parameter vectors.

    Runs are laid side by side as disjoint copies of the grid so one kernel
    call advances a whole chunk of them.  Returns ``(n_runs, nsteps)``.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    rain = np.ascontiguousarray(forcing.rainfall.reshape(forcing.nsteps, -1)[:, plan.order])
    pet = np.ascontiguousarray(forcing.pet.reshape(forcing.nsteps, -1)[:, plan.order])
    _forcing_vectors(plan, forcing)  # validation only
    down = plan.downstream_positions()
    n = down.size
    pos = int(plan.position()[plan.flat(gauge.outlet)])
    out = np.empty((thetas.shape[0], forcing.nsteps))
    for lo in range(0, thetas.shape[0], chunk):
        block = thetas[lo : lo + chunk]
        r = block.shape[0]
        params = np.repeat(block, n, axis=0)
        if h0 is None:
            state = np.zeros((r * n, 5))
            state[:, S_HP] = 0.5 * params[:, I_CP]
            state[:, S_HTR] = 0.2 * params[:, I_CTR]
            state[:, S_HTL] = 0.2 * params[:, I_CTL]
        else:
            state = np.tile(_active_vectors(plan, h0.values), (r, 1))
        offs = np.repeat(np.arange(r) * n, n)
        dn = np.tile(down, r)
        dn = np.where(dn >= 0, dn + offs, -1)
        q = _simulate(params, state, np.tile(rain, (1, r)), np.tile(pet, (1, r)), dn, plan.cell_area, 0)[0]
        out[lo : lo + r] = q[:, pos::n][:, :r].T * MM_KM2_PER_H_TO_M3S
    if not np.all(np.isfinite(out)):
        raise NonFiniteFlux("batch simulation produced non-finite values")
    return out
