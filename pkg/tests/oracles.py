"""Brute-force reference implementations used only by the tests."""
from itertools import combinations

import numpy as np

from mgdispatch.lp import LinearProgram


def pav(y):
    """Unweighted least-squares nondecreasing fit by pooling adjacent violators."""
    blocks = []                      # [mean, size]
    for v in np.asarray(y, dtype=float):
        blocks.append([v, 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            m2, n2 = blocks.pop()
            m1, n1 = blocks.pop()
            blocks.append([(m1 * n1 + m2 * n2) / (n1 + n2), n1 + n2])
    return np.concatenate([np.full(n, m) for m, n in blocks])


def _independent_rows(E, e, tol):
    """Drop equality rows implied by earlier ones; ``(None, None)`` if inconsistent."""
    keep = []
    for i in range(len(E)):
        rows = keep + [i]
        if np.linalg.matrix_rank(E[rows]) == len(rows):
            keep = rows
        elif np.linalg.matrix_rank(np.column_stack([E[rows], e[rows]])) == len(keep) + 1:
            return None, None
    return E[keep].reshape(-1, E.shape[1]), e[keep]


def vertex_enumeration(lp, tol=1e-9):
    """Minimum of a box-bounded LP over all basic feasible points.

    Every vertex makes all equality rows and ``n - n_eq`` of the
    inequalities (rows and finite bounds) tight.  Returns ``(objective, x)``
    or ``(None, None)`` when no vertex is feasible.
    """
    n = lp.n_vars
    G, h = [], []
    E, e = [], []
    for i in range(lp.n_rows):
        if lp.sense[i] == '=':
            E.append(lp.A[i]), e.append(lp.b[i])
        elif lp.sense[i] == '<':
            G.append(lp.A[i]), h.append(lp.b[i])
        else:
            G.append(-lp.A[i]), h.append(-lp.b[i])
    eye = np.eye(n)
    for j in range(n):
        if np.isfinite(lp.ub[j]):
            G.append(eye[j]), h.append(lp.ub[j])
        if np.isfinite(lp.lb[j]):
            G.append(-eye[j]), h.append(-lp.lb[j])
    G, h = np.array(G), np.array(h)
    E, e = _independent_rows(np.array(E).reshape(-1, n), np.array(e), tol)
    if E is None:
        return None, None
    k = n - len(E)
    if k < 0:
        raise ValueError('more equalities than variables')
    subsets = np.array(list(combinations(range(len(G)), k)), dtype=int).reshape(-1, k)
    M = np.concatenate([np.broadcast_to(E, (len(subsets),) + E.shape), G[subsets]], axis=1)
    r = np.concatenate([np.broadcast_to(e, (len(subsets), len(e))), h[subsets]], axis=1)
    ok = np.abs(np.linalg.det(M)) > 1e-10
    if not ok.any():
        return None, None
    X = np.linalg.solve(M[ok], r[ok][..., None])[..., 0]
    feasible = np.all(X @ G.T <= h + tol, axis=1)
    if len(E):
        feasible &= np.all(np.abs(X @ E.T - e) <= tol, axis=1)
    if not feasible.any():
        return None, None
    X = X[feasible]
    obj = X @ lp.c + lp.offset
    best = int(np.argmin(obj))
    return float(obj[best]), X[best]


def random_feasible_lp(rng, n_max=8):
    """Box-bounded LP with up to `n_max` variables built around a feasible point."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, 4 if n >= 6 else 6))
    lb = rng.uniform(-5, 0, n)
    ub = lb + rng.uniform(0.5, 6, n)
    x0 = rng.uniform(lb, ub)
    A = rng.normal(size=(m, n)).round(3)
    A[rng.random((m, n)) < 0.25] = 0.0
    sense = rng.choice(['<', '>', '='], size=m, p=[0.45, 0.4, 0.15])
    # at most n - 1 equalities keeps a vertex search meaningful
    n_eq = int(np.sum(sense == '='))
    if n_eq >= n:
        sense[sense == '='] = '<'
    slack = rng.uniform(0, 2, m)
    b = A @ x0 + np.where(sense == '<', slack, np.where(sense == '>', -slack, 0.0))
    c = rng.normal(size=n).round(3)
    return LinearProgram(c=c, A=A, b=b, sense=sense, lb=lb, ub=ub)
