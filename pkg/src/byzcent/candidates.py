"""Quantities the server can derive from one round's received vectors.

A :class:`Layout` is everything the server sees: ``n``, ``t`` and the ``m``
received vectors keyed by client id. From it we build the candidate centroid
set (means of every ``(n - t)``-subset), its bounding box, the trimmed trusted
hyperbox, the covering ball and the safe area.

Received vectors are stored sorted by client id, so every order statistic,
subset enumeration and tie-break is independent of arrival order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterable, Optional

import numpy as np

from .geometry import (
    DEFAULT_MEB_EPS,
    EXACT_TOL,
    Ball,
    GeometryError,
    Hyperbox,
    as_vector,
    meb_weights,
    span_coordinates,
)

ENUMERATION_CAP = 1_000_000
SAFE_AREA_MAX_DIM = 2
SAFE_AREA_MAX_CLIENTS = 12


class LayoutError(ValueError):
    pass


class EnumerationCapError(RuntimeError):
    pass


class UnsupportedInstanceError(ValueError):
    pass


class SafeAreaEmptyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Layout:
    """The server-side view of a round.

    Attributes:
        n: number of clients.
        t: upper bound on Byzantine clients, ``3t < n``.
        vectors: ``(m, d)`` received vectors, ``n - t <= m <= n``.
        ids: client id of each row; defaults to ``0..m-1``.
    """

    n: int
    t: int
    vectors: np.ndarray
    ids: Optional[np.ndarray] = None

    def __post_init__(self):
        n, t = int(self.n), int(self.t)
        if t < 0 or n < 1:
            raise LayoutError(f"need n >= 1 and t >= 0, got n={n}, t={t}")
        if 3 * t >= n:
            raise LayoutError(f"need t < n/3, got n={n}, t={t}")
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2:
            raise LayoutError(f"received vectors must form an (m, d) array, got shape {v.shape}")
        m = v.shape[0]
        if not n - t <= m <= n:
            raise LayoutError(f"need n - t <= m <= n, got m={m} with n={n}, t={t}")
        if not np.all(np.isfinite(v)):
            raise LayoutError("received vectors contain non-finite values")
        ids = np.arange(m) if self.ids is None else np.asarray(self.ids, dtype=np.int64).ravel()
        if ids.shape != (m,):
            raise LayoutError(f"got {ids.shape[0]} client ids for {m} vectors")
        if len(np.unique(ids)) != m:
            raise LayoutError("client ids must be distinct")
        order = np.argsort(ids, kind="stable")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "vectors", v[order])
        object.__setattr__(self, "ids", ids[order])

    @classmethod
    def from_received(cls, n: int, t: int, received: Iterable[tuple[int, np.ndarray]]) -> "Layout":
        pairs = list(received)
        if not pairs:
            raise LayoutError("no vectors received")
        ids = [cid for cid, _ in pairs]
        vecs = np.stack([as_vector(v) for _, v in pairs])
        return cls(n, t, vecs, np.asarray(ids))

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    @property
    def quorum(self) -> int:
        """Subset size ``n - t`` used for candidate centroids."""
        return self.n - self.t

    @property
    def n_candidates(self) -> int:
        return comb(self.m, self.quorum)

    def received(self) -> list[tuple[int, np.ndarray]]:
        return [(int(cid), vec) for cid, vec in zip(self.ids, self.vectors)]


@dataclass(frozen=True)
class CandidateCentroidSet:
    centroids: np.ndarray
    subsets: np.ndarray

    def __len__(self) -> int:
        return len(self.centroids)


def subset_indices(m: int, size: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """All ``size``-subsets of ``range(m)`` in lexicographic order, as a ``(K, size)`` array."""
    count = comb(m, size)
    if count > cap:
        raise EnumerationCapError(
            f"C({m}, {size}) = {count} subsets exceeds the enumeration cap {cap}; "
            "use the closed-form centroid_hyperbox / trimmed_trusted_hyperbox instead"
        )
    return np.array(list(combinations(range(m), size)), dtype=np.int64).reshape(count, size)


def candidate_centroids(layout: Layout, cap: int = ENUMERATION_CAP) -> CandidateCentroidSet:
    subsets = subset_indices(layout.m, layout.quorum, cap)
    centroids = layout.vectors[subsets].sum(axis=1) / layout.quorum
    return CandidateCentroidSet(centroids, subsets)


def centroid_hyperbox(layout: Layout) -> Hyperbox:
    """Bounding box of the candidate centroids, without enumerating subsets.

    In each coordinate the extreme subset means are the means of the
    ``n - t`` smallest and the ``n - t`` largest received values.
    """
    q = layout.quorum
    s = np.sort(layout.vectors, axis=0)
    return Hyperbox(s[:q].mean(axis=0), s[-q:].mean(axis=0))


def trimmed_trusted_hyperbox(layout: Layout) -> Hyperbox:
    """Per coordinate, the interval between the ``(m-(n-t)+1)``-th and ``(n-t)``-th smallest values."""
    s = np.sort(layout.vectors, axis=0)
    trim = layout.m - layout.quorum
    return Hyperbox(s[trim], s[layout.quorum - 1])


def covering_ball(layout: Layout, eps: float = DEFAULT_MEB_EPS, cap: int = ENUMERATION_CAP) -> Ball:
    """Approximate minimum ball enclosing all candidate centroids.

    The candidates live in the affine span of the received vectors, so the
    ball is computed in isometric span coordinates (at most ``m`` of them)
    and mapped back. This keeps the cost independent of ``d``.
    """
    if not eps > 0:
        raise GeometryError(f"eps must be positive, got {eps}")
    subsets = subset_indices(layout.m, layout.quorum, cap)
    origin, basis, coords = span_coordinates(layout.vectors)
    if coords.shape[1] == 0:
        return Ball(layout.vectors[0].copy(), 0.0)
    cand = coords[subsets].sum(axis=1) / layout.quorum
    lam = meb_weights(cand, eps)
    c = lam @ cand
    radius = float(np.sqrt(np.max(np.sum((cand - c) ** 2, axis=1))))
    return Ball(origin + c @ basis, radius)


# ---------------------------------------------------------------------------
# Safe area
# ---------------------------------------------------------------------------


def _depth_halfplanes(vectors: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Halfspaces ``a @ x <= b`` whose intersection is the safe area (d <= 2).

    A point lies in every ``(n-t)``-subset hull iff every closed halfspace
    through it contains at least ``k = m - (n-t) + 1`` received vectors, i.e.
    ``u @ x <= k-th largest of u @ v_i`` for every direction ``u``. That bound
    is linear in ``u`` between directions where two projections swap, so the
    coordinate axes plus the normals of every pair of distinct vectors suffice.
    """
    d = vectors.shape[1]
    dirs = [np.eye(d), -np.eye(d)]
    if d == 2:
        diff = vectors[:, None, :] - vectors[None, :, :]
        iu = np.triu_indices(len(vectors), 1)
        diff = diff[iu]
        norms = np.linalg.norm(diff, axis=1)
        diff = diff[norms > 0] / norms[norms > 0, None]
        normals = np.stack([-diff[:, 1], diff[:, 0]], axis=1)
        dirs += [normals, -normals]
    a = np.concatenate(dirs)
    proj = vectors @ a.T
    b = -np.sort(-proj, axis=0)[k - 1]
    return a, b


def _project_onto_polytope(a: np.ndarray, b: np.ndarray, target: np.ndarray, tol: float) -> Optional[np.ndarray]:
    """Exact Euclidean projection onto ``{x : a x <= b}`` in dimension <= 2 by enumeration."""
    if np.all(a @ target <= b + tol):
        return target.copy()
    d = a.shape[1]
    cands = [target[None, :] - (a @ target - b)[:, None] * a]
    if d == 2:
        i, j = np.triu_indices(len(a), 1)
        det = a[i, 0] * a[j, 1] - a[i, 1] * a[j, 0]
        ok = np.abs(det) > 1e-12
        i, j, det = i[ok], j[ok], det[ok]
        x = (b[i] * a[j, 1] - a[i, 1] * b[j]) / det
        y = (a[i, 0] * b[j] - b[i] * a[j, 0]) / det
        cands.append(np.stack([x, y], axis=1))
    cands = np.concatenate(cands)
    feasible = np.all(cands @ a.T <= b + tol, axis=1)
    if not np.any(feasible):
        return None
    cands = cands[feasible]
    best = int(np.argmin(np.sum((cands - target) ** 2, axis=1)))
    return cands[best]


def check_safe_area_supported(layout: Layout) -> None:
    if layout.d > SAFE_AREA_MAX_DIM:
        raise UnsupportedInstanceError(
            f"safe area is only supported for d <= {SAFE_AREA_MAX_DIM}, got d={layout.d}"
        )
    if layout.n > SAFE_AREA_MAX_CLIENTS:
        raise UnsupportedInstanceError(
            f"safe area is only supported for n <= {SAFE_AREA_MAX_CLIENTS}, got n={layout.n}"
        )
    if max(3, layout.d + 1) * layout.t >= layout.n:
        raise UnsupportedInstanceError(
            f"safe area needs t < n/max(3, d+1), got n={layout.n}, t={layout.t}, d={layout.d}"
        )


def safe_area_point(layout: Layout, target, tol: float = EXACT_TOL) -> np.ndarray:
    """Point of the safe area closest to ``target``.

    Raises:
        UnsupportedInstanceError: d > 2, n > 12 or t too large.
        SafeAreaEmptyError: the numerical intersection is empty.
    """
    check_safe_area_supported(layout)
    target = as_vector(target)
    if target.shape[0] != layout.d:
        raise GeometryError(f"dimension mismatch: layout d={layout.d}, target d={target.shape[0]}")
    v = layout.vectors
    scale = max(1.0, float(np.abs(v).max()))
    k = layout.m - layout.quorum + 1
    a, b = _depth_halfplanes(v, k)
    q = _project_onto_polytope(a, b, target, tol * scale)
    if q is None:
        raise SafeAreaEmptyError("safe area is numerically empty")
    return q
