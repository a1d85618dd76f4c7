"""Brute-force reference computations.

Deliberately naive and independent of the fast paths they are used to check:
no shared helpers with ``geometry.min_enclosing_ball`` or the closed-form
hyperboxes. Only suitable for tiny inputs.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def exact_min_enclosing_ball(points, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Exact MEB by enumerating every support set of 1..d+1 points.

    For each candidate support, the circumcenter inside its affine hull is
    found by solving a small linear system; the smallest such ball that
    encloses every point is the MEB. Exponential; intended for d <= 3 and a
    dozen points.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n, d = x.shape
    best_c, best_r = None, np.inf
    for size in range(1, min(d + 1, n) + 1):
        for support in combinations(range(n), size):
            s = x[list(support)]
            base = s[0]
            if size == 1:
                c = base
            else:
                diffs = s[1:] - base
                # c = base + diffs.T @ beta with |c - s_i| equal for all i
                a = 2.0 * diffs @ diffs.T
                b = np.einsum("ij,ij->i", diffs, diffs)
                with np.errstate(all="ignore"):
                    det = np.linalg.det(a)
                if not abs(det) >= 1e-14:
                    continue
                beta = np.linalg.solve(a, b)
                c = base + diffs.T @ beta
            r = float(np.max(np.linalg.norm(s - c, axis=1)))
            if r >= best_r:
                continue
            if np.all(np.linalg.norm(x - c, axis=1) <= r + tol):
                best_c, best_r = c, r
    return best_c, best_r


def enumerate_subset_means(vectors, size: int) -> np.ndarray:
    """Mean of every ``size``-subset, by explicit Python loops."""
    v = np.asarray(vectors, dtype=float)
    out = []
    for subset in combinations(range(len(v)), size):
        acc = np.zeros(v.shape[1])
        for i in subset:
            acc = acc + v[i]
        out.append(acc / size)
    return np.array(out)


def brute_force_centroid_box(vectors, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate-wise min/max over the enumerated subset means."""
    means = enumerate_subset_means(vectors, size)
    return means.min(axis=0), means.max(axis=0)


def interval_hulls_intersection(values, size: int) -> tuple[float, float]:
    """1-D safe area: intersect the ranges of every ``size``-subset of scalars."""
    vals = np.asarray(values, dtype=float).ravel()
    lo, hi = -np.inf, np.inf
    for subset in combinations(range(len(vals)), size):
        sub = vals[list(subset)]
        lo = max(lo, float(sub.min()))
        hi = min(hi, float(sub.max()))
    return lo, hi


def finite_difference_grad(f, x: np.ndarray, coords, step: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x`` along the listed coordinates."""
    out = np.empty(len(coords))
    for j, k in enumerate(coords):
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        out[j] = (f(xp) - f(xm)) / (2.0 * step)
    return out
