"""Pareto dominance utilities and SAW selection of a compromise solution."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hydrocal.errors import EmptyFront


def dominates(a, b) -> bool:
    """``a`` Pareto-dominates ``b`` (minimisation)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def pareto_filter(points) -> np.ndarray:
    """Indices of the non-dominated rows of ``points``, in input order.

    Exact duplicates do not dominate each other, so all copies survive.
    """
    F = np.atleast_2d(np.asarray(points, dtype=float))
    n = F.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)  # column j dominated by some row i
    return np.flatnonzero(~dominated)


@dataclass
class ParetoSet:
    """Mutually non-dominated ``(theta, objectives)`` pairs."""

    thetas: np.ndarray  # (n, k)
    objectives: np.ndarray  # (n, m)
    generations: int = 0
    n_evals: int = 0
    history: list = field(default_factory=list)  # per generation: best value of each objective

    def __post_init__(self):
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        self.objectives = np.atleast_2d(np.asarray(self.objectives, dtype=float))

    def __len__(self):
        return self.objectives.shape[0]

    @classmethod
    def from_points(cls, thetas, objectives, **kw):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        objectives = np.atleast_2d(np.asarray(objectives, dtype=float))
        keep = pareto_filter(objectives)
        return cls(thetas[keep], objectives[keep], **kw)

    def best(self, j: int):
        i = int(np.argmin(self.objectives[:, j]))
        return self.thetas[i], self.objectives[i]


def saw_scores(objectives, c: int):
    """Return ``(row_sums, weights, F)`` of simple additive weighting.

    Columns are normalised to ``F = (f+ - f) / (f+ - f-)`` (0 for a constant
    column); the constrained column ``c`` gets weight ``e**d`` and the others
    ``e - e**d`` with ``d = f+_c - f-_c``.
    """
    f = np.atleast_2d(np.asarray(objectives, dtype=float))
    if f.shape[0] == 0:
        raise EmptyFront("cannot select from an empty front")
    if not 0 <= c < f.shape[1]:
        raise IndexError(f"constrained column {c} out of range for {f.shape[1]} objectives")
    hi = f.max(axis=0)
    lo = f.min(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    F = np.where(span > 0, (hi - f) / safe, 0.0)
    d = span[c]
    w = np.full(f.shape[1], np.e - np.exp(d))
    w[c] = np.exp(d)
    return (F * w).sum(axis=1), w, F


def saw_select(pareto, c: int = 0) -> int:
    """Index of the SAW-selected solution (ties go to the lowest index)."""
    objectives = pareto.objectives if isinstance(pareto, ParetoSet) else pareto
    rows, _, _ = saw_scores(objectives, c)
    return int(np.argmax(rows))
