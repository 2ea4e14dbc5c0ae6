"""NSGA-II for multi-objective calibration of uniform parameters.

Genes live on the unit cube and map to parameters through a
:class:`~hydrocal.calibrate.sbs.SearchSpace` (log-uniform for capacities).
Besides the working population an archive keeps every non-dominated point
evaluated so far.
"""

from __future__ import annotations

import numpy as np

from hydrocal.calibrate.pareto import ParetoSet, pareto_filter
from hydrocal.calibrate.sbs import SearchSpace

POP_SIZE = 64
GENERATIONS = 100
ETA_CROSSOVER = 15.0
ETA_MUTATION = 20.0
P_CROSSOVER = 0.9


def non_dominated_sort(F: np.ndarray) -> list:
    """Fronts (lists of row indices), best first."""
    n = F.shape[0]
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(count == 0)
    while current.size:
        fronts.append(current)
        count = count - dom[current].sum(axis=0)
        count[current] = -1
        current = np.flatnonzero(count == 0)
    assert sum(f.size for f in fronts) == n
    return fronts


def crowding_distance(F: np.ndarray) -> np.ndarray:
    n, m = F.shape
    d = np.zeros(n)
    if n <= 2:
        d[:] = np.inf
        return d
    for j in range(m):
        order = np.argsort(F[:, j], kind="stable")
        f = F[order, j]
        d[order[0]] = d[order[-1]] = np.inf
        span = f[-1] - f[0]
        if span > 0:
            d[order[1:-1]] += (f[2:] - f[:-2]) / span
    return d


def _rank_and_crowd(F):
    rank = np.empty(F.shape[0], dtype=np.int64)
    crowd = np.empty(F.shape[0])
    fronts = non_dominated_sort(F)
    for r, idx in enumerate(fronts):
        rank[idx] = r
        crowd[idx] = crowding_distance(F[idx])
    return rank, crowd, fronts


def _archive_update(arch_X, arch_F, X, F):
    """Merge candidates into a non-dominated archive in O(n * batch)."""
    keep = pareto_filter(F)
    X, F = X[keep], F[keep]
    if arch_F.shape[0]:
        # candidates dominated by the archive
        le = np.all(arch_F[:, None, :] <= F[None, :, :], axis=2)
        lt = np.any(arch_F[:, None, :] < F[None, :, :], axis=2)
        ok = ~np.any(le & lt, axis=0)
        X, F = X[ok], F[ok]
        # archive points dominated by surviving candidates
        le = np.all(F[:, None, :] <= arch_F[None, :, :], axis=2)
        lt = np.any(F[:, None, :] < arch_F[None, :, :], axis=2)
        stay = ~np.any(le & lt, axis=0)
        arch_X, arch_F = arch_X[stay], arch_F[stay]
    return np.vstack([arch_X, X]), np.vstack([arch_F, F])


def _tournament(rng, rank, crowd, n):
    a = rng.integers(0, rank.size, n)
    b = rng.integers(0, rank.size, n)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] >= crowd[b]))
    return np.where(a_wins, a, b)


def sbx(rng, p1, p2, eta=ETA_CROSSOVER, rate=P_CROSSOVER):
    """Bounded simulated-binary crossover on [0, 1]."""
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() > rate:
        return c1, c2
    for i in range(p1.size):
        if rng.random() > 0.5 or abs(p1[i] - p2[i]) < 1e-14:
            continue
        y1, y2 = min(p1[i], p2[i]), max(p1[i], p2[i])
        u = rng.random()
        children = []
        for beta in (1.0 + 2.0 * y1 / (y2 - y1), 1.0 + 2.0 * (1.0 - y2) / (y2 - y1)):
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                bq = (u * alpha) ** (1.0 / (eta + 1.0))
            else:
                bq = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
            children.append(bq)
        a = np.clip(0.5 * (y1 + y2 - children[0] * (y2 - y1)), 0.0, 1.0)
        b = np.clip(0.5 * (y1 + y2 + children[1] * (y2 - y1)), 0.0, 1.0)
        if rng.random() < 0.5:
            a, b = b, a
        c1[i], c2[i] = a, b
    return c1, c2


def polynomial_mutation(rng, x, eta=ETA_MUTATION, rate=None):
    x = x.copy()
    rate = 1.0 / x.size if rate is None else rate
    for i in range(x.size):
        if rng.random() >= rate:
            continue
        y = x[i]
        u = rng.random()
        mp = 1.0 / (eta + 1.0)
        if u < 0.5:
            xy = 1.0 - y
            val = 2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0)
            dq = val**mp - 1.0
        else:
            xy = y
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0)
            dq = 1.0 - val**mp
        x[i] = np.clip(y + dq, 0.0, 1.0)
    return x


def nsga_optimize(objectives, space: SearchSpace | None = None, pop_size=POP_SIZE, generations=GENERATIONS,
                  seed=0, eta_c=ETA_CROSSOVER, eta_m=ETA_MUTATION, p_crossover=P_CROSSOVER, p_mutation=None,
                  evaluate=None, callback=None) -> ParetoSet:
    """Minimise the vector function ``objectives(theta) -> (m,)`` over ``space``.

    ``evaluate`` maps a list of parameter vectors to objective vectors (for
    example a process-pool ``map``); the default is sequential.
    """
    space = space or SearchSpace.model()
    zlo, zhi = space.z_bounds
    k = zlo.size
    rng = np.random.default_rng(seed)
    evaluate = evaluate or (lambda xs: [objectives(x) for x in xs])

    def decode(U):
        return np.array([space.from_z(zlo + u * (zhi - zlo)) for u in U])

    def score(U):
        X = decode(U)
        F = np.atleast_2d(np.asarray(list(evaluate(list(X))), dtype=float))
        if F.shape[0] != U.shape[0]:
            F = F.reshape(U.shape[0], -1)
        return X, F

    pop_size += pop_size % 2
    U = rng.random((pop_size, k))
    X, F = score(U)
    arch_X, arch_F = _archive_update(X[:0], F[:0], X, F)
    history = [F.min(axis=0)]
    n_evals = pop_size

    for gen in range(generations):
        rank, crowd, _ = _rank_and_crowd(F)
        parents = _tournament(rng, rank, crowd, pop_size)
        kids = []
        for i in range(0, pop_size, 2):
            c1, c2 = sbx(rng, U[parents[i]], U[parents[i + 1]], eta_c, p_crossover)
            kids.append(polynomial_mutation(rng, c1, eta_m, p_mutation))
            kids.append(polynomial_mutation(rng, c2, eta_m, p_mutation))
        KU = np.array(kids)
        KX, KF = score(KU)
        n_evals += pop_size

        allU = np.vstack([U, KU])
        allX = np.vstack([X, KX])
        allF = np.vstack([F, KF])
        _, _, fronts = _rank_and_crowd(allF)
        chosen = []
        for front in fronts:
            if len(chosen) + front.size <= pop_size:
                chosen.extend(front.tolist())
                continue
            d = crowding_distance(allF[front])
            order = np.argsort(-d, kind="stable")
            chosen.extend(front[order[: pop_size - len(chosen)]].tolist())
            break
        chosen = np.array(chosen)
        U, X, F = allU[chosen], allX[chosen], allF[chosen]

        arch_X, arch_F = _archive_update(arch_X, arch_F, KX, KF)
        history.append(F.min(axis=0))
        if callback is not None:
            callback(gen + 1, arch_X, arch_F)

    # collapse exact duplicates so the archive is a set
    _, first = np.unique(np.hstack([arch_X, arch_F]), axis=0, return_index=True)
    first = np.sort(first)
    return ParetoSet(arch_X[first], arch_F[first], generations, n_evals, history)
