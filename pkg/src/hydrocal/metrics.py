"""Efficiency metrics and their gradients with respect to the simulation."""

import numpy as np

from hydrocal.errors import ConstantObs, DegenerateObs, LengthMismatch


def _check(sim, obs):
    sim = np.asarray(sim, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if sim.shape != obs.shape or sim.ndim != 1:
        raise LengthMismatch(f"sim {sim.shape} and obs {obs.shape} must be equal-length 1-D series")
    if sim.size < 2:
        raise LengthMismatch("need at least two values")
    return sim, obs


def nse(sim, obs) -> float:
    """Nash-Sutcliffe efficiency."""
    sim, obs = _check(sim, obs)
    den = np.sum((obs - obs.mean()) ** 2)
    if den == 0.0:
        raise ConstantObs("observed series is constant; NSE undefined")
    return float(1.0 - np.sum((sim - obs) ** 2) / den)


def nse_loss_grad(sim, obs):
    """Return ``(1 - NSE, d(1 - NSE)/d sim)``."""
    sim, obs = _check(sim, obs)
    den = np.sum((obs - obs.mean()) ** 2)
    if den == 0.0:
        raise ConstantObs("observed series is constant; NSE undefined")
    resid = sim - obs
    return float(np.sum(resid**2) / den), 2.0 * resid / den


def _kge_parts(sim, obs):
    mu, mu_o = sim.mean(), obs.mean()
    sd, sd_o = sim.std(), obs.std()
    if mu_o == 0.0 or sd_o == 0.0:
        raise DegenerateObs("observed mean and standard deviation must be non-zero for KGE")
    cov = np.mean((sim - mu) * (obs - mu_o))
    r = cov / (sd * sd_o) if sd > 0.0 else 0.0
    return mu, mu_o, sd, sd_o, cov, r


def kge(sim, obs, alpha=1.0, beta=1.0, gamma=1.0) -> float:
    """Kling-Gupta efficiency with weights on the correlation, variability
    and bias terms (all 1 gives the usual KGE)."""
    sim, obs = _check(sim, obs)
    mu, mu_o, sd, sd_o, _, r = _kge_parts(sim, obs)
    ed2 = alpha * (r - 1.0) ** 2 + beta * (sd / sd_o - 1.0) ** 2 + gamma * (mu / mu_o - 1.0) ** 2
    return float(1.0 - np.sqrt(ed2))


def kge_loss_grad(sim, obs, alpha=1.0, beta=1.0, gamma=1.0):
    """Return ``(1 - KGE, d(1 - KGE)/d sim)``."""
    sim, obs = _check(sim, obs)
    n = sim.size
    mu, mu_o, sd, sd_o, cov, r = _kge_parts(sim, obs)
    b = sd / sd_o
    g = mu / mu_o
    loss = np.sqrt(alpha * (r - 1.0) ** 2 + beta * (b - 1.0) ** 2 + gamma * (g - 1.0) ** 2)
    if loss == 0.0:
        return 0.0, np.zeros(n)
    d_mu = np.full(n, 1.0 / n)
    if sd > 0.0:
        d_sd = (sim - mu) / (n * sd)
        d_cov = (obs - mu_o) / n
        d_r = d_cov / (sd * sd_o) - cov * d_sd / (sd**2 * sd_o)
    else:
        d_sd = np.zeros(n)
        d_r = np.zeros(n)
    grad = (alpha * (r - 1.0) * d_r + beta * (b - 1.0) * d_sd / sd_o + gamma * (g - 1.0) * d_mu / mu_o) / loss
    return float(loss), grad
