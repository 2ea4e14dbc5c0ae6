"""Variational calibration of distributed parameter fields.

The control is the bound-normalised field ``u = (theta - lower) / span`` on
the active cells; gradients come from the adjoint and the box is handled by
L-BFGS-B (scipy's implementation of the Byrd-Lu-Nocedal-Zhu algorithm).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from hydrocal.errors import NonDifferentiableCost
from hydrocal.model import LOWER, UPPER, ParameterField

MAXITER = 200
GTOL = 1e-6
FTOL = 1e-8
MEMORY = 10


@dataclass
class LBFGSBResult:
    x: np.ndarray
    fun: float
    nit: int
    stop_reason: str
    history: list = field(default_factory=list)  # (iter, J, projected-gradient norm)


def projected_gradient(x, g, lower, upper):
    pg = g.copy()
    pg[(x <= lower) & (g > 0)] = 0.0
    pg[(x >= upper) & (g < 0)] = 0.0
    return pg


def lbfgsb(fun_grad, x0, lower, upper, maxiter=MAXITER, gtol=GTOL, ftol=FTOL, memory=MEMORY, callback=None):
    """Minimise ``fun_grad(x) -> (f, g)`` on the box ``[lower, upper]``."""
    lower = np.broadcast_to(np.asarray(lower, dtype=float), np.shape(x0))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), np.shape(x0))
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    last = {}

    def fg(x):
        f, g = fun_grad(x)
        last["x"], last["f"], last["g"] = x.copy(), f, g
        return f, g

    f0, g0 = fg(x0)
    history = [(0, float(f0), float(np.linalg.norm(projected_gradient(x0, g0, lower, upper), np.inf)))]
    if history[0][2] < gtol:
        return LBFGSBResult(x0, float(f0), 0, "projected gradient below tolerance", history)

    def cb(xk):
        if not np.array_equal(last.get("x"), xk):
            fg(xk)
        pg = float(np.linalg.norm(projected_gradient(xk, last["g"], lower, upper), np.inf))
        history.append((len(history), float(last["f"]), pg))
        if callback is not None:
            callback(xk, last["f"], pg)

    res = minimize(
        fg,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(lower, upper)),
        callback=cb,
        options={"maxiter": maxiter, "maxcor": memory, "gtol": gtol, "ftol": ftol},
    )
    x, f = res.x, float(res.fun)
    if f > f0:  # never hand back something worse than the first guess
        x, f = x0, float(f0)
    msg = res.message if isinstance(res.message, str) else res.message.decode()
    return LBFGSBResult(x, f, int(res.nit), msg, history)


@dataclass
class VDAResult:
    theta: ParameterField
    breakdown: object
    iterations: int
    stop_reason: str
    log: list  # dicts: iter, J, j_d, j_c, j_f, J_reg, grad_norm
    objective: float = np.nan  # final smoothed J, the quantity minimised
    initial_objective: float = np.nan


def vda_optimize(problem, background: ParameterField, maxiter=MAXITER, gtol=GTOL, ftol=FTOL, memory=MEMORY,
                 alpha_reg=None) -> VDAResult:
    """Distributed calibration started from (and regularised towards) ``background``."""
    config = problem.config
    if not config.differentiable:
        raise NonDifferentiableCost(f"VDA needs a smooth cost; got {sorted(config.non_smooth)}")
    config = replace(config, background=background)
    if alpha_reg is not None:
        config = replace(config, alpha_reg=alpha_reg)
    prob = problem.with_config(config)
    act = prob.plan.active
    span = (UPPER - LOWER)[:, None]
    lower = LOWER[:, None]
    base = background.values.copy()
    cache = {}

    def field_of(u):
        v = base.copy()
        v[:, act] = lower + u.reshape(6, -1) * span
        return ParameterField(v)

    def fun_grad(u):
        b, g = prob.value_and_grad(field_of(u))
        cache[u.tobytes()] = b
        return b.total, (g.values[:, act] * span).ravel()

    log = []

    def cb(u, f, pg):
        b = cache.get(u.tobytes())
        log.append({"iter": len(log) + 1, "J": f, "j_d": getattr(b, "j_d", np.nan), "j_c": getattr(b, "j_c", np.nan),
                    "j_f": getattr(b, "j_f", np.nan), "J_reg": getattr(b, "j_reg", np.nan), "grad_norm": pg})

    u0 = ((base[:, act] - lower) / span).ravel()
    res = lbfgsb(fun_grad, u0, 0.0, 1.0, maxiter, gtol, ftol, memory, cb)
    b0 = cache[u0.tobytes()] if u0.tobytes() in cache else None
    if b0 is not None:
        log.insert(0, {"iter": 0, "J": b0.total, "j_d": b0.j_d, "j_c": b0.j_c, "j_f": b0.j_f, "J_reg": b0.j_reg,
                       "grad_norm": res.history[0][2]})
    theta = field_of(res.x)
    final = prob.breakdown(theta, mode="distributed")
    return VDAResult(theta, final, res.nit, res.stop_reason, log, res.fun, res.history[0][1])
