"""Variance-based (Sobol) sensitivity of hydrological signatures.

Sampling follows the Saltelli scheme: two independent ``N x k`` matrices
``A`` and ``B`` from a scrambled Sobol sequence of dimension ``2k`` and, for
each input ``j``, ``AB_j`` = ``A`` with column ``j`` taken from ``B``.
Estimators (Saltelli et al. 2010)::

    S_j  = mean(yB * (yAB_j - yA)) / V
    ST_j = mean((yA - yAB_j) ** 2) / (2 V)

with ``V`` the variance of the pooled ``yA`` and ``yB``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from hydrocal.errors import BadN, NoEvents, ZeroVariance
from hydrocal.model import LOWER, PARAM_NAMES, UPPER, simulate_batch
from hydrocal.segmentation import segment
from hydrocal.signatures import CONTINUOUS, EVENT, signature, split_flow

logger = logging.getLogger(__name__)

MODEL_BOUNDS = np.column_stack([LOWER, UPPER])


@dataclass
class SampleDesign:
    A: np.ndarray
    B: np.ndarray
    AB: np.ndarray  # (k, N, k)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.A.shape[1]

    @property
    def n_evals(self) -> int:
        return self.N * (self.k + 2)

    def rows(self) -> np.ndarray:
        """All evaluation rows: ``A``, ``B``, then each ``AB_j``."""
        return np.vstack([self.A, self.B, *self.AB])

    def split(self, y):
        """Inverse of :meth:`rows` for an output vector."""
        y = np.asarray(y)
        N, k = self.N, self.k
        return y[:N], y[N : 2 * N], y[2 * N :].reshape(k, N)


@dataclass
class SobolResult:
    first_order: np.ndarray
    total_order: np.ndarray
    variance: float
    n_evals: int
    names: tuple = ()

    def as_rows(self, label: str = ""):
        names = self.names or tuple(f"x{j + 1}" for j in range(self.first_order.size))
        return [(label, n, float(s), float(t)) for n, s, t in zip(names, self.first_order, self.total_order)]


def saltelli_sample(N: int, bounds, seed: int = 0) -> SampleDesign:
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise BadN("bounds must be a (k, 2) array with lower < upper")
    if N < 1 or N & (N - 1):
        raise BadN(f"N must be a power of 2, got {N}")
    k = bounds.shape[0]
    base = qmc.Sobol(d=2 * k, scramble=True, seed=seed).random(N)
    lo, hi = bounds[:, 0], bounds[:, 1]
    A = lo + base[:, :k] * (hi - lo)
    B = lo + base[:, k:] * (hi - lo)
    AB = np.repeat(A[None], k, axis=0)
    for j in range(k):
        AB[j, :, j] = B[:, j]
    return SampleDesign(A, B, AB)


def sobol_indices(yA, yB, yAB, names=()) -> SobolResult:
    yA = np.asarray(yA, dtype=float)
    yB = np.asarray(yB, dtype=float)
    yAB = np.atleast_2d(np.asarray(yAB, dtype=float))
    if yA.shape != yB.shape or yAB.shape[1] != yA.size:
        raise ValueError("inconsistent evaluation vector lengths")
    if not (np.all(np.isfinite(yA)) and np.all(np.isfinite(yB)) and np.all(np.isfinite(yAB))):
        raise ValueError("non-finite model outputs")
    V = float(np.var(np.concatenate([yA, yB])))
    if V <= 0.0:
        raise ZeroVariance("output variance is zero")
    S = np.mean(yB[None] * (yAB - yA[None]), axis=1) / V
    ST = 0.5 * np.mean((yA[None] - yAB) ** 2, axis=1) / V
    return SobolResult(S, ST, V, yA.size * (yAB.shape[0] + 2), tuple(names))


def sobol_analyze(fun, bounds, N: int, seed: int = 0, names=()) -> SobolResult:
    """Indices of a vectorised scalar function ``fun(X) -> (n,)``."""
    design = saltelli_sample(N, bounds, seed)
    y = np.asarray(fun(design.rows()), dtype=float)
    return sobol_indices(*design.split(y), names=names)


def _signature_matrix(P, Q, signature_ids, events, warmup):
    """Signatures of each discharge row (mm/h): ``(n_runs, n_signatures)``."""
    P = P[warmup:]
    out = np.empty((Q.shape[0], len(signature_ids)))
    for r in range(Q.shape[0]):
        q = Q[r, warmup:]
        split = split_flow(q)
        for c, sig in enumerate(signature_ids):
            if sig in CONTINUOUS:
                out[r, c] = signature(sig, P, q, split=split)
            else:
                vals = [signature(sig, P, q, window=(e.start, e.end), split=split) for e in events]
                out[r, c] = np.mean(vals)
    return out


@dataclass
class GSSAResult:
    table: dict  # signature -> SobolResult
    design: SampleDesign = field(repr=False)
    events: list = field(default_factory=list)

    def rows(self):
        """``(signature, parameter, first_order, total_order)`` tuples."""
        out = []
        for sig, res in self.table.items():
            out.extend(res.as_rows(sig))
        return out


def signature_gssa(plan, catchment, forcing, bounds=MODEL_BOUNDS, N: int = 64, signature_ids=CONTINUOUS + EVENT,
                   seed: int = 0, warmup: int = 0, reference=None, h0=None, segment_kwargs=None) -> GSSAResult:
    """First- and total-order indices of each signature w.r.t. the six
    spatially uniform parameters.

    Event signatures are averaged over windows segmented once on
    ``reference`` (gauge discharge in m3/s; by default the run at the
    log-midpoint of the bounds) and reused for every sample.
    """
    signature_ids = tuple(signature_ids)
    design = saltelli_sample(N, bounds, seed)
    rows = design.rows()
    area = catchment.n_cells * plan.cell_area
    to_mm = 3.6 / area
    P = forcing.catchment_rainfall(catchment)

    Q = simulate_batch(plan, catchment, rows, forcing, h0) * to_mm
    if np.all(np.ptp(Q[:, warmup:], axis=0) == 0.0):
        raise ZeroVariance("simulated discharge does not depend on the parameters")

    events = []
    if any(s in EVENT for s in signature_ids):
        if reference is None:
            b = np.asarray(bounds, dtype=float)
            mid = np.where(b[:, 0] > 0, np.sqrt(np.abs(b[:, 0] * b[:, 1])), b.mean(axis=1))
            reference = simulate_batch(plan, catchment, mid[None], forcing, h0)[0]
        events = segment(P[warmup:], np.asarray(reference)[warmup:] * to_mm, **(segment_kwargs or {}))
        if not events:
            raise NoEvents("no flood event found on the reference series for event-signature GSSA")

    Y = _signature_matrix(P, Q, signature_ids, events, warmup)

    table = {}
    flat = []
    for c, sig in enumerate(signature_ids):
        y = Y[:, c]
        if not np.all(np.isfinite(y)):
            logger.warning("signature %s undefined for %d sample(s)", sig, int(np.sum(~np.isfinite(y))))
        yA, yB, yAB = design.split(y)
        try:
            table[sig] = sobol_indices(yA, yB, yAB, names=PARAM_NAMES if design.k == 6 else ())
        except ZeroVariance:
            flat.append(sig)
    if flat:
        raise ZeroVariance(f"zero output variance for {', '.join(flat)}")
    return GSSAResult(table, design, events)
