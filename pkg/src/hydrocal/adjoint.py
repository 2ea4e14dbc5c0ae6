"""Discrete adjoint of the gridded model.

The reverse sweep walks time backwards and, inside each step, the cells in
reverse topological order. States are replayed from checkpoints stored
every ``every`` steps (``every = 1`` keeps the full trajectory); the replay
uses the same kernels as the forward run, so the recomputed states are
bit-identical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np

from hydrocal.errors import NonDifferentiableCost
from hydrocal.model import (
    EXCHANGE_EXPONENT,
    FAST_SPLIT,
    I_CI,
    I_CP,
    I_CR,
    I_CTL,
    I_CTR,
    I_ML,
    LOWER,
    MM_KM2_PER_H_TO_M3S,
    S_HI,
    S_HP,
    S_HR,
    S_HTL,
    S_HTR,
    UPPER,
    ParameterField,
    _route,
    _simulate,
    _vertical,
    prepare,
)

DEFAULT_MEMORY_CAP = 512 * 1024**2  # bytes of stored states before checkpointing kicks in


@numba.njit(cache=True)
def _drain_adj(h, c, a_rem, a_q):
    """Adjoint of (rem, q) = drain(h, c); returns (a_h, a_c)."""
    if h <= 0.0:
        return a_rem, 0.0
    u = (h / c) ** 4
    d = (1.0 + u) ** -1.25
    a_h = a_q + (a_rem - a_q) * d
    a_c = (a_rem - a_q) * h * d * u / c
    return a_h, a_c


@numba.njit(cache=True)
def _vertical_adj(ci, cp, ctr, ctl, ml, hi, hp, htr, htl, p, e, a_hi2, a_hp2, a_htr2, a_htl2, a_r):
    # --- replay forward intermediates
    avail = hi + p
    case_b = e >= avail
    ei = min(e, avail)
    en = e - ei
    pn = max(0.0, avail - ei - ci)
    x = hp / cp
    ps = 0.0
    tp = 0.0
    te = 0.0
    if pn > 0.0:
        tp = np.tanh(pn / cp)
        ps = cp * (1.0 - x * x) * tp / (1.0 + x * tp)
    if en > 0.0:
        te = np.tanh(en / cp)
    pr = pn - ps
    y = htr / ctr
    f = ml * y**EXCHANGE_EXPONENT
    tr_in = htr + FAST_SPLIT * pr
    tl_in = htl + (1.0 - FAST_SPLIT) * pr
    s_tr = tr_in + f
    s_tl = tl_in + f
    htr_b = max(0.0, s_tr)
    htl_b = max(0.0, s_tl)

    g_ci = 0.0
    g_cp = 0.0
    g_ctr = 0.0
    g_ctl = 0.0
    g_ml = 0.0

    # --- transfer
    a_htr_b, g = _drain_adj(htr_b, ctr, a_htr2, a_r)
    g_ctr += g
    a_htl_b, g = _drain_adj(htl_b, ctl, a_htl2, a_r)
    g_ctl += g
    a_s_tr = a_htr_b if s_tr > 0.0 else 0.0
    a_s_tl = a_htl_b if s_tl > 0.0 else 0.0
    a_f = a_s_tr + a_s_tl
    a_pr = FAST_SPLIT * a_s_tr + (1.0 - FAST_SPLIT) * a_s_tl
    a_htr = a_s_tr
    a_htl = a_s_tl
    g_ml += a_f * y**EXCHANGE_EXPONENT
    if y > 0.0:
        a_y = a_f * ml * EXCHANGE_EXPONENT * y ** (EXCHANGE_EXPONENT - 1.0)
        a_htr += a_y / ctr
        g_ctr -= a_y * htr / (ctr * ctr)

    # --- production
    a_pn = a_pr
    a_ps = a_hp2 - a_pr
    a_es = -a_hp2
    a_hp = a_hp2
    a_x = 0.0
    a_en = 0.0
    if pn > 0.0:
        num = cp * (1.0 - x * x) * tp
        den = 1.0 + x * tp
        d_x = (cp * (-2.0 * x) * tp * den - num * tp) / (den * den)
        d_tp = (cp * (1.0 - x * x) * den - num * x) / (den * den)
        a_x += a_ps * d_x
        g_cp += a_ps * (1.0 - x * x) * tp / den
        a_tp = a_ps * d_tp
        a_pn += a_tp * (1.0 - tp * tp) / cp
        g_cp -= a_tp * (1.0 - tp * tp) * pn / (cp * cp)
    if en > 0.0:
        den = 1.0 + (1.0 - x) * te
        a_hp += a_es * (2.0 - x) * te / den
        a_x += a_es * hp * te * ((2.0 - x) * te - den) / (den * den)
        a_te = a_es * hp * (2.0 - x) / (den * den)
        a_en += a_te * (1.0 - te * te) / cp
        g_cp -= a_te * (1.0 - te * te) * en / (cp * cp)
    a_hp += a_x / cp
    g_cp -= a_x * hp / (cp * cp)

    # --- interception
    if case_b:
        a_avail = -a_en
    elif avail - e - ci > 0.0:
        a_avail = a_pn
        g_ci += a_hi2 - a_pn
    else:
        a_avail = a_hi2
    return a_avail, a_hp, a_htr, a_htl, g_ci, g_cp, g_ctr, g_ctl, g_ml


@numba.njit(cache=True)
def _reverse(params, ckpt, every, rain, pet, down, area, dq):
    """Accumulate d(cost)/d(params) and d(cost)/d(h0) from d(cost)/d(q)."""
    nt = rain.shape[0]
    n = params.shape[0]
    grad = np.zeros((n, 6))
    a_h = np.zeros((n, 5))
    buf = np.zeros((every, n, 5))
    inflow = np.zeros(n)
    runoff = np.zeros(n)
    a_inflow = np.zeros(n)
    nseg = ckpt.shape[0]
    for s in range(nseg - 1, -1, -1):
        t0 = s * every
        t1 = min(nt, t0 + every)
        # replay the segment (identical arithmetic to _simulate)
        _, _, _, _, seg = _simulate(params, ckpt[s], rain[t0:t1], pet[t0:t1], down, area, 1)
        for j in range(t1 - t0):
            buf[j] = seg[j]
        for t in range(t1 - 1, t0 - 1, -1):
            h = buf[t - t0]
            inflow[:] = 0.0
            for i in range(n):
                _, _, _, _, r, _, _ = _vertical(
                    params[i, I_CI], params[i, I_CP], params[i, I_CTR], params[i, I_CTL], params[i, I_ML],
                    h[i, S_HI], h[i, S_HP], h[i, S_HTR], h[i, S_HTL], rain[t, i], pet[t, i],
                )
                runoff[i] = r
                _, out = _route(params[i, I_CR], h[i, S_HR], r + inflow[i] / area)
                if down[i] >= 0:
                    inflow[down[i]] += out * area
            a_inflow[:] = 0.0
            for i in range(n - 1, -1, -1):
                aq = dq[t, i]
                if down[i] >= 0:
                    aq += a_inflow[down[i]]
                cr = params[i, I_CR]
                ek = np.exp(-1.0 / cr)
                k = 1.0 - ek
                hr_a = h[i, S_HR] + runoff[i] + inflow[i] / area
                a_hr_next = a_h[i, S_HR]
                a_hr_a = aq * area * k + a_hr_next * (1.0 - k)
                a_k = (aq * area - a_hr_next) * hr_a
                grad[i, I_CR] += a_k * (-ek / (cr * cr))
                a_inflow[i] = a_hr_a / area
                a_hi, a_hp, a_htr, a_htl, g_ci, g_cp, g_ctr, g_ctl, g_ml = _vertical_adj(
                    params[i, I_CI], params[i, I_CP], params[i, I_CTR], params[i, I_CTL], params[i, I_ML],
                    h[i, S_HI], h[i, S_HP], h[i, S_HTR], h[i, S_HTL], rain[t, i], pet[t, i],
                    a_h[i, S_HI], a_h[i, S_HP], a_h[i, S_HTR], a_h[i, S_HTL], a_hr_a,
                )
                a_h[i, S_HI] = a_hi
                a_h[i, S_HP] = a_hp
                a_h[i, S_HTR] = a_htr
                a_h[i, S_HTL] = a_htl
                a_h[i, S_HR] = a_hr_a
                grad[i, I_CI] += g_ci
                grad[i, I_CP] += g_cp
                grad[i, I_CTR] += g_ctr
                grad[i, I_CTL] += g_ctl
                grad[i, I_ML] += g_ml
    return grad, a_h


@dataclass
class Trajectory:
    """Checkpointed forward run sufficient for a reverse sweep."""

    params: np.ndarray
    rain: np.ndarray
    pet: np.ndarray
    down: np.ndarray
    area: float
    every: int
    checkpoints: np.ndarray
    outflow: np.ndarray  # (nsteps, n_active), mm km2 / h

    @property
    def nsteps(self) -> int:
        return self.rain.shape[0]

    def replay(self, segment: int) -> np.ndarray:
        """States at the start of every step of one checkpoint segment."""
        t0 = segment * self.every
        t1 = min(self.nsteps, t0 + self.every)
        _, _, _, _, states = _simulate(
            self.params, self.checkpoints[segment], self.rain[t0:t1], self.pet[t0:t1], self.down, self.area, 1
        )
        return states


def checkpoint_interval(nsteps: int, ncells: int, memory_cap: int = DEFAULT_MEMORY_CAP) -> int:
    full = nsteps * ncells * 5 * 8
    if full <= memory_cap:
        return 1
    # two-level scheme: checkpoints plus one replayed segment, both ~ sqrt(T)
    return max(1, int(math.ceil(math.sqrt(nsteps))))


def forward_trajectory(plan, theta, h0, forcing, every: int | None = None, memory_cap=DEFAULT_MEMORY_CAP):
    params, state, rain, pet = prepare(plan, theta, h0, forcing)
    down = plan.downstream_positions()
    if every is None:
        every = checkpoint_interval(rain.shape[0], params.shape[0], memory_cap)
    q, _, _, _, ckpt = _simulate(params, state, rain, pet, down, plan.cell_area, every)
    return Trajectory(params, rain, pet, down, plan.cell_area, every, ckpt, q)


def reverse_sweep(traj: Trajectory, dq: np.ndarray):
    """Pull ``d cost / d outflow`` (per active cell, mm km2/h units) back to
    ``(d cost / d params, d cost / d h0)`` on the active cells."""
    return _reverse(traj.params, traj.checkpoints, traj.every, traj.rain, traj.pet, traj.down, traj.area, dq)


def _to_grid(plan, vec):
    k = vec.shape[1]
    out = np.zeros((k, plan.shape[0] * plan.shape[1]))
    out[:, plan.order] = vec.T
    return out.reshape(k, *plan.shape)


def gradient(plan, theta, h0, forcing, config, obs, gauge, mode="distributed", every=None):
    """Cost and its exact gradient with respect to every parameter grid.

    Returns ``(breakdown, ParameterField)``; the breakdown is evaluated in
    the smoothed form whose gradient is returned. With ``h0=None`` the
    default initial state (a function of ``theta``) is differentiated too.
    """
    from hydrocal.calibrate.cost import evaluate_cost

    if not config.differentiable:
        raise NonDifferentiableCost(f"cost uses non-smooth signature(s): {sorted(config.non_smooth)}")
    traj = forward_trajectory(plan, theta, h0, forcing, every)
    pos = plan.position()[plan.flat(gauge.outlet)]
    sim = traj.outflow[:, pos] * MM_KM2_PER_H_TO_M3S
    breakdown, d_sim = evaluate_cost(config, theta, sim, obs, mode=mode, smooth=True, grad=True, active=plan.active)
    dq = np.zeros_like(traj.outflow)
    dq[:, pos] = d_sim * MM_KM2_PER_H_TO_M3S
    g_act, a_h0 = reverse_sweep(traj, dq)
    g = _to_grid(plan, g_act)
    if h0 is None:
        a0 = _to_grid(plan, a_h0)
        g[I_CP] += 0.5 * a0[S_HP]
        g[I_CTR] += 0.2 * a0[S_HTR]
        g[I_CTL] += 0.2 * a0[S_HTL]
    g[:, ~plan.active] = 0.0
    if breakdown.reg_grad is not None:
        g += breakdown.alpha_reg * breakdown.reg_grad
    return breakdown, ParameterField(g)


@dataclass
class GradientReport:
    rows: list  # (epsilon, relative_error, direction_id)
    skipped: str | None = None

    def best_errors(self) -> dict:
        best = {}
        for eps, err, d in self.rows:
            best[d] = min(err, best.get(d, np.inf))
        return best

    @property
    def max_best_error(self) -> float:
        b = self.best_errors()
        return max(b.values()) if b else np.nan

    @property
    def passed(self) -> bool:
        return self.skipped is None and bool(self.rows) and self.max_best_error < 1e-5

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "relative_error", "direction_id"])
            for eps, err, d in self.rows:
                w.writerow([repr(float(eps)), repr(float(err)), int(d)])


EPSILONS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)


def directional_check(value_and_grad, value, x, directions, epsilons=EPSILONS) -> GradientReport:
    """Central finite differences of ``value`` against ``<grad, d>``."""
    _, g = value_and_grad(x)
    rows = []
    for k, d in enumerate(directions):
        ana = float(np.dot(g.ravel(), d.ravel()))
        for eps in epsilons:
            fd = (value(x + eps * d) - value(x - eps * d)) / (2.0 * eps)
            err = abs(fd - ana) / max(abs(ana), 1e-300)
            rows.append((eps, err, k))
    return GradientReport(rows)


def gradient_test(plan, theta, h0, forcing, config, obs, gauge, directions=10, seed=0, mode="distributed",
                  epsilons=EPSILONS) -> GradientReport:
    """Classic gradient test in the bound-normalised control space.

    Random unit directions ``d`` over the active cells; the control is
    ``u = (theta - lower) / (upper - lower)`` so the steps are comparable
    across parameters.
    """
    from hydrocal.calibrate.cost import evaluate_cost

    if not config.differentiable:
        return GradientReport([], skipped=f"non-differentiable signature(s): {sorted(config.non_smooth)}")
    span = (UPPER - LOWER)[:, None, None]
    lower = LOWER[:, None, None]
    act = plan.active
    u0 = (theta.values - lower) / span
    pos = plan.position()[plan.flat(gauge.outlet)]

    def field(u):
        return ParameterField(lower + u * span)

    def value(u):
        th = field(u)
        traj = forward_trajectory(plan, th, h0, forcing, every=0)
        sim = traj.outflow[:, pos] * MM_KM2_PER_H_TO_M3S
        return evaluate_cost(config, th, sim, obs, mode=mode, smooth=True, active=act).total

    def value_and_grad(u):
        b, g = gradient(plan, field(u), h0, forcing, config, obs, gauge, mode=mode)
        return b.total, g.values * span

    rng = np.random.default_rng(seed)
    dirs = []
    for _ in range(directions):
        d = np.zeros_like(u0)
        d[:, act] = rng.standard_normal((6, int(act.sum())))
        dirs.append(d / np.linalg.norm(d))
    return directional_check(value_and_grad, value, u0, dirs, epsilons)
