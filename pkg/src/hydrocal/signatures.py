"""Continuous and flood-event hydrological signatures.

Rainfall and discharge are hourly depths (mm/h) over the catchment, so
time integrals are plain sums in mm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from hydrocal.errors import (
    EmptySeries,
    NegativeFlow,
    NonDifferentiableCost,
    WindowOutOfRange,
    ZeroEventRainfall,
    ZeroRainfall,
)

CONTINUOUS = ("Crc", "Crchf", "Crclf", "Crch2r", "Cfp2", "Cfp10", "Cfp50", "Cfp90")
EVENT = ("Eff", "Ebf", "Erc", "Erchf", "Erclf", "Erch2r", "Elt", "Epf")
ALL_SIGNATURES = CONTINUOUS + EVENT
UNITS = {
    "Crc": "-", "Crchf": "-", "Crclf": "-", "Crch2r": "-",
    "Cfp2": "mm", "Cfp10": "mm", "Cfp50": "mm", "Cfp90": "mm",
    "Eff": "mm", "Ebf": "mm", "Erc": "-", "Erchf": "-", "Erclf": "-", "Erch2r": "-",
    "Elt": "h", "Epf": "mm",
}
PERCENTILES = {"Cfp2": 0.02, "Cfp10": 0.10, "Cfp50": 0.50, "Cfp90": 0.90}
NON_SMOOTH = frozenset({"Elt"})
RAIN_RATIOS = frozenset({"Crc", "Crchf", "Crclf", "Erc", "Erchf", "Erclf"})

LH_ALPHA = 0.925
LH_PASSES = 3
PEAK_POWER = 100.0  # power-mean surrogate for the event peak
PEAK_SHARPNESS = 50.0  # 1/mm, log-sum-exp surrogate (optional)


@dataclass(frozen=True)
class SignatureValue:
    id: str
    value: float
    unit: str
    scope: str = "whole-period"
    event_id: int | None = None
    flag: str | None = None


# ---------------------------------------------------------------------------
# Lyne-Hollick filter
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _lh_filter(q, a, passes):
    n = q.size
    c = 0.5 * (1.0 + a)
    x = q.copy()
    flags = np.zeros((passes, n), dtype=np.int8)  # 0 free, 1 clipped at 0, 2 clipped at input
    for k in range(passes):
        f = np.zeros(n)
        flags[k, 0 if k % 2 == 0 else n - 1] = 1
        for j in range(1, n):
            t = j if k % 2 == 0 else n - 1 - j
            tp = t - 1 if k % 2 == 0 else t + 1
            v = a * f[tp] + c * (x[t] - x[tp])
            if v < 0.0:
                f[t] = 0.0
                flags[k, t] = 1
            elif v > x[t]:
                f[t] = x[t]
                flags[k, t] = 2
            else:
                f[t] = v
        x = x - f
    return x, flags


@numba.njit(cache=True)
def _lh_vjp(flags, a, bar):
    passes, n = flags.shape
    c = 0.5 * (1.0 + a)
    ybar = bar.copy()
    for k in range(passes - 1, -1, -1):
        xbar = ybar.copy()
        fbar = -ybar
        for j in range(n - 1, 0, -1):
            t = j if k % 2 == 0 else n - 1 - j
            tp = t - 1 if k % 2 == 0 else t + 1
            g = fbar[t]
            if flags[k, t] == 0:
                fbar[tp] += a * g
                xbar[t] += c * g
                xbar[tp] -= c * g
            elif flags[k, t] == 2:
                xbar[t] += g
        ybar = xbar
    return ybar


@dataclass(frozen=True)
class FlowSplit:
    """Baseflow / quickflow partition of a series, with the filter's branch
    record so that gradients can be pulled back through it."""

    baseflow: np.ndarray
    quickflow: np.ndarray
    flags: np.ndarray
    alpha: float = LH_ALPHA

    def pullback(self, baseflow_bar: np.ndarray) -> np.ndarray:
        return _lh_vjp(self.flags, self.alpha, np.asarray(baseflow_bar, dtype=float))


def split_flow(q, alpha: float = LH_ALPHA, passes: int = LH_PASSES) -> FlowSplit:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size < 3:
        raise EmptySeries("baseflow separation needs a 1-D series of length >= 3")
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise NegativeFlow("discharge must be finite and non-negative")
    qb, flags = _lh_filter(q, alpha, passes)
    qq = q - qb
    # q - qq is exact for qq in [q/2, q] (Sterbenz), so qb + qq == q bitwise.
    qb = q - qq
    return FlowSplit(qb, qq, flags, alpha)


def baseflow_separate(q, alpha: float = LH_ALPHA, passes: int = LH_PASSES):
    """Three-pass Lyne-Hollick filter; returns ``(baseflow, quickflow)``."""
    s = split_flow(q, alpha, passes)
    return s.baseflow, s.quickflow


# ---------------------------------------------------------------------------
# percentiles
# ---------------------------------------------------------------------------


def _quantile_level(p: float, convention: str) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("percentile fraction must be in (0, 1)")
    if convention == "exceedance":
        return 1.0 - p
    if convention == "cdf":
        return p
    raise ValueError(f"unknown percentile convention {convention!r}")


def flow_percentile(q, p: float, convention: str = "exceedance") -> float:
    """Flow-duration-curve quantile.

    Under the default exceedance convention ``p = 0.02`` returns the flow
    exceeded 2 % of the time. Linear interpolation between order statistics.
    """
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        raise EmptySeries("empty series")
    return float(np.quantile(q, _quantile_level(p, convention)))


def _percentile_grad(q, level):
    n = q.size
    order = np.argsort(q, kind="stable")
    h = (n - 1) * level
    lo = int(np.floor(h))
    hi = min(lo + 1, n - 1)
    frac = h - lo
    g = np.zeros(n)
    g[order[lo]] += 1.0 - frac
    g[order[hi]] += frac
    return g


# ---------------------------------------------------------------------------
# signature evaluation
# ---------------------------------------------------------------------------


def _window(n, window):
    if window is None:
        return slice(0, n)
    start, end = window
    if start < 0 or end >= n or start > end:
        raise WindowOutOfRange(f"event window [{start}, {end}] outside series of length {n}")
    return slice(int(start), int(end) + 1)


def _lse_max(x):
    m = x.max()
    w = np.exp(PEAK_SHARPNESS * (x - m))
    s = w.sum()
    return m + np.log(s) / PEAK_SHARPNESS, w / s


def _smooth_max(x):
    """``(sum x**p) ** (1/p)`` for ``x >= 0`` and its gradient.

    Being 1-homogeneous, its bias is a factor close to 1 that largely
    cancels in simulated/observed peak ratios.
    """
    m = x.max()
    if m <= 0.0:
        return 0.0, np.zeros_like(x)
    r = np.clip(x / m, 0.0, None)
    f = m * np.sum(r**PEAK_POWER) ** (1.0 / PEAK_POWER)
    return f, (np.clip(x, 0.0, None) / f) ** (PEAK_POWER - 1.0)


def signature(
    sig: str,
    P,
    Q,
    window=None,
    split: FlowSplit | None = None,
    smooth: bool = False,
    convention: str = "exceedance",
    grad: bool = False,
):
    """Evaluate one signature over the whole series or an inclusive
    ``(start, end)`` index window.

    With ``grad=True`` returns ``(value, dvalue/dQ)``. ``smooth=True`` (or
    ``"power"``) replaces the event peak max by a power-mean surrogate,
    ``smooth="lse"`` by a log-sum-exp one.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = Q.size
    sl = _window(n, window)
    if sig in ("Crchf", "Crclf", "Crch2r", "Eff", "Ebf", "Erchf", "Erclf", "Erch2r") and split is None:
        split = split_flow(Q)
    d_q = np.zeros(n) if grad else None
    d_qb = np.zeros(n) if grad else None

    if sig in RAIN_RATIOS or sig in ("Crch2r", "Erch2r"):
        sp = P[sl].sum()
        sq = Q[sl].sum()
        if sig in ("Crc", "Erc"):
            val = sq / sp
            if grad:
                d_q[sl] += 1.0 / sp
        elif sig in ("Crchf", "Erchf"):
            val = split.quickflow[sl].sum() / sp
            if grad:
                d_q[sl] += 1.0 / sp
                d_qb[sl] -= 1.0 / sp
        elif sig in ("Crclf", "Erclf"):
            val = split.baseflow[sl].sum() / sp
            if grad:
                d_qb[sl] += 1.0 / sp
        else:
            sqq = split.quickflow[sl].sum()
            val = sqq / sq if sq > 0 else np.nan
            if grad:
                d_q[sl] += 1.0 / sq - sqq / sq**2
                d_qb[sl] -= 1.0 / sq
    elif sig in PERCENTILES:
        level = _quantile_level(PERCENTILES[sig], convention)
        val = float(np.quantile(Q[sl], level))
        if grad:
            d_q[sl] += _percentile_grad(Q[sl], level)
    elif sig == "Eff":
        val = split.quickflow[sl].sum()
        if grad:
            d_q[sl] += 1.0
            d_qb[sl] -= 1.0
    elif sig == "Ebf":
        val = split.baseflow[sl].sum()
        if grad:
            d_qb[sl] += 1.0
    elif sig == "Epf":
        if smooth:
            val, w = (_lse_max if smooth == "lse" else _smooth_max)(Q[sl])
            if grad:
                d_q[sl] += w
        else:
            val = Q[sl].max()
            if grad:
                d_q[sl.start + int(np.argmax(Q[sl]))] += 1.0
    elif sig == "Elt":
        if grad:
            raise NonDifferentiableCost("Elt (argmax difference) has no gradient")
        val = float(np.argmax(Q[sl]) - np.argmax(P[sl]))
    else:
        raise KeyError(f"unknown signature {sig!r}")

    val = float(val)
    if not grad:
        return val
    if np.any(d_qb):
        d_q += split.pullback(d_qb)
    return val, d_q


def continuous_signatures(P, Q, convention: str = "exceedance", split: FlowSplit | None = None):
    """All whole-period signatures as ``{id: SignatureValue}``."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise WindowOutOfRange("rainfall and discharge must have equal length")
    if P.sum() <= 0:
        raise ZeroRainfall("total rainfall is zero; runoff coefficients undefined")
    split = split or split_flow(Q)
    out = {}
    for sig in CONTINUOUS:
        v = signature(sig, P, Q, split=split, convention=convention)
        flag = "undefined" if not np.isfinite(v) else None
        out[sig] = SignatureValue(sig, v, UNITS[sig], "whole-period", None, flag)
    return out


def event_signatures(P, Q, event, split: FlowSplit | None = None, event_id: int | None = None, ids=EVENT):
    """Flood-event signatures over the inclusive window ``event.start .. event.end``.

    The baseflow is separated on the full series and then windowed.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    window = (event.start, event.end)
    sl = _window(Q.size, window)
    if any(s in RAIN_RATIOS for s in ids) and P[sl].sum() <= 0:
        raise ZeroEventRainfall(f"no rainfall in event window {window}")
    split = split or split_flow(Q)
    out = {}
    for sig in ids:
        v = signature(sig, P, Q, window=window, split=split)
        flag = "undefined" if not np.isfinite(v) else None
        out[sig] = SignatureValue(sig, v, UNITS[sig], "event", event_id, flag)
    return out
