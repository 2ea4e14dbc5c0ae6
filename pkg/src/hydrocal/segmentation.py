"""Automated flood-event segmentation of paired hourly rainfall/discharge.

Steps, per detected discharge peak ``tp``:

1. peaks: strict local maxima above ``mph`` (default: 0.995-quantile of Q),
   at least ``mpd`` hours apart (higher peak wins, ties -> earlier);
2. start: among times in ``(tp - 72, tp)`` whose rainfall gradient exceeds
   the 0.8-quantile of the gradient over ``[tp - 72, tp]``, the earliest one
   whose rainfall energy exceeds 0.2 x the maximal energy over
   ``[tp - 72, tp]``.  Energy at ``t`` is the L2 norm of the 24 rainfall
   values ``P[t - 1 .. t + 22]``;
3. end: the ``te`` in ``[tp, start + 240]`` minimising the sum of
   ``|Q - Qb|`` over ``te - 1 .. te + 47``;
4. merge: consecutive events are fused while the later one ends before
   ``start + 240`` of the first (or overlaps the running group).

Rainfall is stamped at the end of its accumulation hour, so a block of rain
first recorded at index ``s`` starts at time ``s - 1``; that is the time the
central-difference gradient picks up.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from hydrocal.errors import InsufficientHistory, LengthMismatch
from hydrocal.signatures import split_flow

logger = logging.getLogger(__name__)

LOOKBACK = 72
MAX_DURATION = 240
ENERGY_WINDOW = 24
END_WINDOW = 48
PEAK_QUANTILE = 0.995
GRADIENT_QUANTILE = 0.8
ENERGY_FRACTION = 0.2
MIN_PEAK_DISTANCE = 12


@dataclass(frozen=True)
class FloodEvent:
    """One event; ``start``, ``peak`` and ``end`` are hour indices into the
    segmented series (``end`` inclusive)."""

    start: int
    peak: int
    end: int
    merged_from: int = 1
    criteria: dict = field(default_factory=dict, compare=False)

    def timestamps(self, origin):
        origin = np.datetime64(origin, "h")
        return tuple(origin + np.timedelta64(int(v), "h") for v in (self.start, self.peak, self.end))

    def shifted(self, offset: int) -> "FloodEvent":
        crit = dict(self.criteria)
        if "gradient_time" in crit:
            crit["gradient_time"] += offset
        return FloodEvent(self.start + offset, self.peak + offset, self.end + offset, self.merged_from, crit)


def detect_peaks(q, mph: float | None = None, mpd: int = MIN_PEAK_DISTANCE) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.size < 3:
        raise LengthMismatch("peak detection needs at least 3 values")
    if mph is None:
        mph = float(np.quantile(q, PEAK_QUANTILE))
    inner = np.arange(1, q.size - 1)
    cand = inner[(q[inner] > q[inner - 1]) & (q[inner] > q[inner + 1]) & (q[inner] > mph)]
    if cand.size == 0 or mpd <= 1:
        return cand
    # highest first, earlier index first on ties
    ranked = cand[np.lexsort((cand, -q[cand]))]
    keep = []
    for i in ranked:
        if all(abs(int(i) - k) >= mpd for k in keep):
            keep.append(int(i))
    return np.array(sorted(keep), dtype=np.int64)


def rainfall_energy(P, t: int) -> float:
    P = np.asarray(P, dtype=float)
    lo = max(t - 1, 0)
    hi = min(t - 1 + ENERGY_WINDOW, P.size)
    return float(np.sqrt(np.sum(P[lo:hi] ** 2)))


def event_start(P, t_peak: int, gradient=None):
    """Return ``(start_index, criteria)`` for the peak at ``t_peak``."""
    P = np.asarray(P, dtype=float)
    if t_peak < LOOKBACK:
        raise InsufficientHistory(f"peak at {t_peak} has less than {LOOKBACK} h of rainfall history")
    if gradient is None:
        gradient = np.gradient(P)
    lo = t_peak - LOOKBACK
    q80 = float(np.quantile(gradient[lo : t_peak + 1], GRADIENT_QUANTILE))
    candidates = [t for t in range(lo + 1, t_peak) if gradient[t] > q80]
    energies = np.array([rainfall_energy(P, t) for t in range(lo, t_peak + 1)])
    e_max = float(energies.max())
    for t in candidates:
        if rainfall_energy(P, t) > ENERGY_FRACTION * e_max:
            return t, {
                "gradient_time": t,
                "gradient_threshold": q80,
                "energy": rainfall_energy(P, t),
                "energy_max": e_max,
                "fallback": False,
            }
    logger.debug("no rainfall start criterion fired for peak at %d; using peak - %d h", t_peak, LOOKBACK)
    return lo, {"gradient_threshold": q80, "energy_max": e_max, "fallback": True}


def event_end(Q, t_peak: int, start: int, quickflow=None) -> int:
    Q = np.asarray(Q, dtype=float)
    if quickflow is None:
        quickflow = split_flow(Q).quickflow
    d = np.abs(quickflow)
    n = Q.size
    last = min(start + MAX_DURATION, n - 1)
    te = np.arange(t_peak, last + 1)
    # direct sums: differenced cumsums leave round-off on the zero tail and break ties
    sums = np.array([d[max(t - 1, 0) : min(t + END_WINDOW - 1, n - 1) + 1].sum() for t in te])
    return int(te[int(np.argmin(sums))])


def merge_events(events):
    """Fuse consecutive events that fall within ``MAX_DURATION`` hours of the
    group's start; overlapping events are always fused."""
    events = sorted(events, key=lambda e: (e.start, e.peak))
    out = []
    group = []
    for ev in events:
        if group:
            g_start = group[0].start
            g_end = max(e.end for e in group)
            if ev.end < g_start + MAX_DURATION or ev.start <= g_end:
                group.append(ev)
                continue
            out.append(_fuse(group))
        group = [ev]
    if group:
        out.append(_fuse(group))
    return out


def _fuse(group):
    if len(group) == 1:
        return group[0]
    main = max(group, key=lambda e: e.criteria.get("peak_value", 0.0))
    return FloodEvent(
        start=group[0].start,
        peak=main.peak,
        end=max(e.end for e in group),
        merged_from=sum(e.merged_from for e in group),
        criteria={"merged": [e.criteria for e in group], "peak_value": main.criteria.get("peak_value")},
    )


def segment(P, Q, mph: float | None = None, mpd: int = MIN_PEAK_DISTANCE):
    """Segment a rainfall/discharge pair into flood events."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape or P.ndim != 1:
        raise LengthMismatch("rainfall and discharge must be aligned 1-D series")
    if Q.size < 3:
        return []
    peaks = detect_peaks(Q, mph, mpd)
    if peaks.size == 0:
        return []
    grad = np.gradient(P)
    quick = split_flow(Q).quickflow
    events = []
    early = [int(tp) for tp in peaks if tp < LOOKBACK]
    if early:
        logger.warning("dropped %d peak(s) with less than %d h of history (first at %d)", len(early), LOOKBACK, early[0])
    for tp in peaks:
        tp = int(tp)
        if tp < LOOKBACK:
            continue
        sd, crit = event_start(P, tp, grad)
        ed = event_end(Q, tp, sd, quick)
        crit["peak_value"] = float(Q[tp])
        events.append(FloodEvent(sd, tp, ed, 1, crit))
    fallback = [e.peak for e in events if e.criteria.get("fallback")]
    if fallback:
        logger.warning("%d of %d peak(s) had no rainfall start criterion; started at peak - %d h",
                       len(fallback), len(events), LOOKBACK)
    return merge_events(events)


def event_mask(n: int, events) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for e in events:
        mask[e.start : e.end + 1] = True
    return mask
