"""Multi-criteria calibration cost.

``J = delta_d * j_d + delta_c * j_c + delta_f * j_f + alpha * J_reg`` where

* ``j_d`` is ``1 - NSE`` or ``1 - KGE(a, b, g)`` on discharge (m3/s);
* ``j_c = sum_S sigma_S |S_sim / S_obs - 1|`` over continuous signatures;
* ``j_f = sum_S sigma_S mean_e |S_sim,e / S_obs,e - 1|`` over the flood
  events segmented on the observations (optionally restricted to events
  whose peak falls in given months);
* ``J_reg = sum ((theta - theta_bg) / sigma_theta) ** 2`` over active cells.

In the smoothed form used for gradients ``|x|`` becomes
``sqrt(x**2 + tau**2)`` and the event peak a power mean of order 100
(or a log-sum-exp, see ``CostConfig.peak_surrogate``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from hydrocal import metrics
from hydrocal.errors import NoEvents, ValidationError, ZeroObservedSignature
from hydrocal.model import LOWER, UPPER, ParameterField
from hydrocal.segmentation import FloodEvent, segment
from hydrocal.signatures import CONTINUOUS, EVENT, NON_SMOOTH, signature, split_flow

logger = logging.getLogger(__name__)

ABS_SMOOTHING = 1e-8
DISTRIBUTED_ALPHA = 1e-4
DEFAULT_SIGMA_THETA = (UPPER - LOWER) / 4.0


@dataclass
class CostConfig:
    dominant: str = "nse"
    kge_weights: tuple = (1.0, 1.0, 1.0)
    continuous: dict = field(default_factory=dict)  # signature -> weight
    flood: dict = field(default_factory=dict)
    delta_d: float = 1.0
    delta_c: float = 0.0
    delta_f: float = 0.0
    alpha_reg: float | None = None  # None -> 1e-4 distributed, 0 uniform
    background: ParameterField | None = None
    sigma_theta: np.ndarray = field(default_factory=lambda: DEFAULT_SIGMA_THETA.copy())
    season_months: tuple | None = None
    convention: str = "exceedance"
    peak_surrogate: str = "power"  # smoothed event peak: "power" or "lse"

    def __post_init__(self):
        problems = []
        if self.dominant not in ("nse", "kge"):
            problems.append(f"dominant metric must be 'nse' or 'kge', got {self.dominant!r}")
        for s in self.continuous:
            if s not in CONTINUOUS:
                problems.append(f"{s!r} is not a continuous signature")
        for s in self.flood:
            if s not in EVENT:
                problems.append(f"{s!r} is not a flood-event signature")
        weights = [self.delta_d, self.delta_c, self.delta_f, *self.continuous.values(), *self.flood.values()]
        if any(w < 0 for w in weights):
            problems.append("weights must be non-negative")
        if self.peak_surrogate not in ("power", "lse"):
            problems.append(f"peak_surrogate must be 'power' or 'lse', got {self.peak_surrogate!r}")
        if self.alpha_reg is not None and self.alpha_reg < 0:
            problems.append("alpha_reg must be non-negative")
        if problems:
            raise ValidationError(problems)
        self.sigma_theta = np.asarray(self.sigma_theta, dtype=float)

    def alpha(self, mode: str) -> float:
        if self.alpha_reg is not None:
            return float(self.alpha_reg)
        return DISTRIBUTED_ALPHA if mode == "distributed" else 0.0

    @property
    def non_smooth(self) -> set:
        used = set()
        if self.delta_c > 0:
            used |= {s for s, w in self.continuous.items() if w > 0}
        if self.delta_f > 0:
            used |= {s for s, w in self.flood.items() if w > 0}
        return used & NON_SMOOTH

    @property
    def differentiable(self) -> bool:
        return not self.non_smooth


@dataclass
class Observation:
    """Observed gauge discharge with the catchment rainfall it responds to.

    ``events`` index the full series; when omitted they are segmented on the
    observed discharge after the warm-up.
    """

    discharge: np.ndarray  # m3/s
    rainfall: np.ndarray  # catchment-mean mm/h
    area_km2: float
    start: np.datetime64 = np.datetime64("2000-01-01T00", "h")
    warmup: int = 0
    events: list | None = None
    segment_kwargs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.discharge = np.asarray(self.discharge, dtype=float)
        self.rainfall = np.asarray(self.rainfall, dtype=float)
        self.start = np.datetime64(self.start, "h")
        if self.events is None:
            w = self.warmup
            found = segment(self.rainfall[w:], self.discharge[w:] * self.depth_factor, **self.segment_kwargs)
            self.events = [e.shifted(w) for e in found]
        self._sig_cache = {}

    @property
    def depth_factor(self) -> float:
        """m3/s -> mm/h over the catchment."""
        return 3.6 / self.area_km2

    @property
    def window(self) -> slice:
        return slice(self.warmup, self.discharge.size)

    def season_events(self, months):
        if months is None:
            return list(self.events)
        out = []
        for e in self.events:
            month = (self.start + np.timedelta64(e.peak, "h")).astype("datetime64[M]").astype(int) % 12 + 1
            if month in months:
                out.append(e)
        return out

    def signatures(self, sigs, events, smooth, convention):
        key = (tuple(sigs), tuple((e.start, e.end) for e in events), smooth, convention)
        if key not in self._sig_cache:
            w = self.warmup
            P = self.rainfall[w:]
            Q = self.discharge[w:] * self.depth_factor
            split = split_flow(Q)
            vals = {}
            for s in sigs:
                if s in CONTINUOUS:
                    vals[s] = signature(s, P, Q, split=split, smooth=smooth, convention=convention)
                else:
                    vals[s] = [
                        signature(s, P, Q, window=(e.start - w, e.end - w), split=split, smooth=smooth)
                        for e in events
                    ]
            self._sig_cache[key] = vals
        return self._sig_cache[key]


@dataclass
class CostBreakdown:
    total: float
    j_d: float
    j_c: float
    j_f: float
    j_reg: float
    alpha_reg: float
    weights: tuple
    signature_terms: dict = field(default_factory=dict)
    reg_grad: np.ndarray | None = field(default=None, repr=False)

    @property
    def j_obs(self) -> float:
        dd, dc, df = self.weights
        return dd * self.j_d + dc * self.j_c + df * self.j_f

    def as_dict(self) -> dict:
        return {
            "J": self.total,
            "j_d": self.j_d,
            "j_c": self.j_c,
            "j_f": self.j_f,
            "J_reg": self.j_reg,
            "alpha_reg": self.alpha_reg,
            **{f"j_{k[0]}^{k[1]}": v for k, v in self.signature_terms.items()},
        }


def _abs(x, smooth):
    if smooth:
        r = np.sqrt(x * x + ABS_SMOOTHING**2)
        return r, x / r
    return abs(x), np.sign(x)


def regularization(config: CostConfig, theta: ParameterField, active=None):
    """Return ``(J_reg, dJ_reg/dtheta)``; zero without a background."""
    if config.background is None:
        return 0.0, None
    diff = (theta.values - config.background.values) / config.sigma_theta[:, None, None] ** 2
    dev = diff * (theta.values - config.background.values)
    if active is not None:
        dev = dev[:, active]
        diff = np.where(active[None], diff, 0.0)
    return float(dev.sum()), 2.0 * diff


def evaluate_cost(config: CostConfig, theta, sim, obs: Observation, mode="uniform", smooth=False, grad=False,
                  active=None):
    """Cost of simulated gauge discharge ``sim`` (m3/s) against ``obs``.

    With ``grad=True`` returns ``(breakdown, dJ_obs/dsim)``; the
    regularisation gradient is carried on ``breakdown.reg_grad``.
    """
    sim = np.asarray(sim, dtype=float)
    if smooth:
        smooth = config.peak_surrogate
    w = obs.warmup
    n = sim.size
    d_sim = np.zeros(n) if grad else None
    terms = {}

    s, o = sim[w:], obs.discharge[w:]
    if config.dominant == "nse":
        j_d, g_d = metrics.nse_loss_grad(s, o)
    else:
        j_d, g_d = metrics.kge_loss_grad(s, o, *config.kge_weights)
    if grad:
        d_sim[w:] += config.delta_d * g_d

    j_c = 0.0
    j_f = 0.0
    need_c = config.delta_c > 0 and config.continuous
    need_f = config.delta_f > 0 and config.flood
    if need_c or need_f:
        P = obs.rainfall[w:]
        Qs = s * obs.depth_factor
        split = split_flow(Qs)
        events = obs.season_events(config.season_months) if need_f else []
        sigs = (list(config.continuous) if need_c else []) + (list(config.flood) if need_f else [])
        ref = obs.signatures(sigs, events, smooth, config.convention)
        chain = obs.depth_factor

        if need_c:
            for sig, weight in config.continuous.items():
                so = ref[sig]
                if so == 0 or not np.isfinite(so):
                    raise ZeroObservedSignature(f"observed {sig} is {so}; ratio undefined")
                if grad:
                    ss, g_s = signature(sig, P, Qs, split=split, smooth=smooth, convention=config.convention, grad=True)
                else:
                    ss = signature(sig, P, Qs, split=split, smooth=smooth, convention=config.convention)
                a, da = _abs(ss / so - 1.0, smooth)
                terms[("c", sig)] = a
                j_c += weight * a
                if grad:
                    d_sim[w:] += config.delta_c * weight * da / so * g_s * chain

        if need_f:
            if not events:
                raise NoEvents("flood-signature cost requested but no events are available")
            for sig, weight in config.flood.items():
                vals = []
                grads = []
                for e, so in zip(events, ref[sig]):
                    if so == 0 or not np.isfinite(so):
                        logger.warning("dropping event %s from j_f^%s: observed value %s", (e.start, e.end), sig, so)
                        continue
                    win = (e.start - w, e.end - w)
                    if grad:
                        ss, g_s = signature(sig, P, Qs, window=win, split=split, smooth=smooth, grad=True)
                    else:
                        ss = signature(sig, P, Qs, window=win, split=split, smooth=smooth)
                    a, da = _abs(ss / so - 1.0, smooth)
                    vals.append(a)
                    if grad:
                        grads.append(da / so * g_s)
                if not vals:
                    raise NoEvents(f"no usable events for j_f^{sig}")
                term = float(np.mean(vals))
                terms[("f", sig)] = term
                j_f += weight * term
                if grad:
                    d_sim[w:] += config.delta_f * weight * np.mean(grads, axis=0) * chain

    alpha = config.alpha(mode)
    j_reg, reg_grad = regularization(config, theta, active) if alpha > 0 else (0.0, None)
    total = config.delta_d * j_d + config.delta_c * j_c + config.delta_f * j_f + alpha * j_reg
    out = CostBreakdown(
        total=float(total),
        j_d=float(j_d),
        j_c=float(j_c),
        j_f=float(j_f),
        j_reg=float(j_reg),
        alpha_reg=alpha,
        weights=(config.delta_d, config.delta_c, config.delta_f),
        signature_terms=terms,
        reg_grad=reg_grad,
    )
    if grad:
        return out, d_sim
    return out
