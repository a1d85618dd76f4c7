"""Euclidean primitives: distances, enclosing balls, hyperboxes and convex hulls.

Everything here is a pure function of its inputs and works in any dimension.
Vectors are 1-D ``float64`` numpy arrays; point sets are ``(N, d)`` arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-9
ITERATIVE_TOL = 1e-6
DEFAULT_MEB_EPS = 1e-4

ArrayLike = Union[np.ndarray, Sequence[float], Sequence[Sequence[float]]]


class GeometryError(ValueError):
    """Raised on malformed geometric input (empty sets, bad dimensions, NaN)."""


def as_vector(v: ArrayLike) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise GeometryError(f"expected a vector, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("vector has non-finite entries")
    return arr


def as_points(points: ArrayLike) -> np.ndarray:
    """Coerce a point list to a finite ``(N, d)`` array; 1-D input is N points in R^1."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise GeometryError(f"expected a list of vectors, got array of shape {arr.shape}")
    if arr.shape[0] == 0:
        raise GeometryError("empty point set")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("point set has non-finite entries")
    return arr


def _check_dim(points: np.ndarray, p: np.ndarray) -> None:
    if points.shape[1] != p.shape[0]:
        raise GeometryError(
            f"dimension mismatch: points have d={points.shape[1]}, vector has d={p.shape[0]}"
        )


def euclidean_distance(a: ArrayLike, b: ArrayLike) -> float:
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise GeometryError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.linalg.norm(a - b))


def pairwise_distances(points: ArrayLike) -> np.ndarray:
    """Full ``(N, N)`` Euclidean distance matrix."""
    x = as_points(points)
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def diameter(points: ArrayLike) -> float:
    x = as_points(points)
    if len(x) == 1:
        return 0.0
    return float(pairwise_distances(x).max())


# ---------------------------------------------------------------------------
# Hyperboxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hyperbox:
    """Closed axis-parallel box ``[lo[0], hi[0]] x ... x [lo[d-1], hi[d-1]]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lo)
        hi = as_vector(self.hi)
        if lo.shape != hi.shape:
            raise GeometryError("hyperbox bounds have different dimensions")
        if np.any(lo > hi):
            k = int(np.argmax(lo > hi))
            raise GeometryError(f"hyperbox has lo > hi at coordinate {k}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def bounding(cls, points: ArrayLike) -> "Hyperbox":
        """Smallest box containing ``points``."""
        x = as_points(points)
        return cls(x.min(axis=0), x.max(axis=0))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.widths))

    def is_point(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.widths <= tol))

    def contains(self, p: ArrayLike, tol: float = EXACT_TOL) -> bool:
        p = as_vector(p)
        if p.shape != self.lo.shape:
            raise GeometryError(f"dimension mismatch: box d={self.dim}, vector d={p.shape[0]}")
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))


def hyperbox_intersection(a: Hyperbox, b: Hyperbox, tol: float = EXACT_TOL) -> Optional[Hyperbox]:
    """Intersect two boxes; ``None`` when they are disjoint by more than ``tol``.

    Coordinates whose intervals miss each other by at most ``tol`` collapse
    to the midpoint of the gap.
    """
    if a.dim != b.dim:
        raise GeometryError(f"dimension mismatch: {a.dim} vs {b.dim}")
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    gap = lo - hi
    if np.any(gap > tol):
        return None
    crossed = gap > 0
    if np.any(crossed):
        mid = 0.5 * (lo[crossed] + hi[crossed])
        lo = lo.copy()
        hi = hi.copy()
        lo[crossed] = mid
        hi[crossed] = mid
    return Hyperbox(lo, hi)


# ---------------------------------------------------------------------------
# Minimum enclosing ball
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise GeometryError(f"ball radius must be non-negative, got {self.radius}")
        object.__setattr__(self, "center", as_vector(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, p: ArrayLike, tol: float = EXACT_TOL) -> bool:
        return euclidean_distance(self.center, p) <= self.radius + tol


def span_coordinates(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Isometric coordinates of ``points`` inside their affine span.

    Returns ``(origin, basis, coords)`` with ``points ~= origin + coords @ basis``
    and ``basis`` having orthonormal rows. Distances between rows of ``coords``
    equal distances between the original points.
    """
    origin = points.mean(axis=0)
    centered = points - origin
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    keep = s > s[0] * 1e-13 if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    if not np.any(keep):
        return origin, np.zeros((0, points.shape[1])), np.zeros((len(points), 0))
    return origin, vt[keep], u[:, keep] * s[keep]


def meb_weights(points: np.ndarray, eps: float = DEFAULT_MEB_EPS, max_iter: int = 200_000) -> np.ndarray:
    """Convex weights whose combination is a (1+eps)-approximate MEB center.

    Farthest-point conditional-gradient iteration with away steps on the dual
    ``max_l sum_i l_i |p_i|^2 - |sum_i l_i p_i|^2`` over the simplex. The dual
    value lower-bounds the squared optimal radius, so stopping once every point
    lies within ``(1+eps)^2`` times it certifies the approximation.
    """
    n_pts = len(points)
    lam = np.zeros(n_pts)
    if n_pts == 1:
        lam[0] = 1.0
        return lam
    first = int(np.argmax(np.sum((points - points[0]) ** 2, axis=1)))
    second = int(np.argmax(np.sum((points - points[first]) ** 2, axis=1)))
    lam[first] += 0.5
    lam[second] += 0.5
    target = (1.0 + eps) ** 2 - 1.0
    for _ in range(max_iter):
        c = lam @ points
        dist2 = np.sum((points - c) ** 2, axis=1)
        phi = float(lam @ dist2)
        if phi <= 0.0:
            # support collapsed onto identical points; all points coincide
            return lam
        k = int(np.argmax(dist2))
        grow = dist2[k] / phi - 1.0
        if grow <= target:
            return lam
        support = np.flatnonzero(lam > 0)
        i = int(support[np.argmin(dist2[support])])
        shrink = 1.0 - dist2[i] / phi
        if grow >= shrink:
            step = grow / (2.0 * (1.0 + grow))
            lam *= 1.0 - step
            lam[k] += step
        else:
            # largest step that keeps lam[i] >= 0; shrink == 1 means p_i sits on the center
            drop = lam[i] / (1.0 - lam[i]) if lam[i] < 1.0 else np.inf
            step = drop if shrink >= 1.0 else min(shrink / (2.0 * (1.0 - shrink)), drop)
            lam *= 1.0 + step
            lam[i] -= step
            if lam[i] < 1e-15:
                lam[i] = 0.0
            lam /= lam.sum()
    logger.warning("MEB iteration hit max_iter=%d before reaching eps=%g", max_iter, eps)
    return lam


def min_enclosing_ball(points: ArrayLike, eps: float = DEFAULT_MEB_EPS) -> Ball:
    """Approximate minimum enclosing ball of a finite point set.

    The returned radius is the largest distance from the returned center to
    any point, so every point is contained, and it is at most ``(1+eps)``
    times the exact minimum radius.

    Args:
        points: ``(N, d)`` array or list of vectors (a 1-D list is read as N
            scalars).
        eps: relative accuracy, must be positive.
    """
    if not eps > 0:
        raise GeometryError(f"eps must be positive, got {eps}")
    x = as_points(points)
    origin, basis, coords = span_coordinates(x)
    if coords.shape[1] == 0:
        return Ball(x[0].copy(), 0.0)
    lam = meb_weights(coords, eps)
    center = origin + (lam @ coords) @ basis
    radius = float(np.sqrt(np.max(np.sum((x - center) ** 2, axis=1))))
    return Ball(center, radius)


# ---------------------------------------------------------------------------
# Convex hulls
# ---------------------------------------------------------------------------


def _affine_minimizer(p: np.ndarray) -> np.ndarray:
    """Weights ``a`` with ``sum(a) = 1`` minimizing ``|a @ p|`` (signs unconstrained)."""
    k = len(p)
    gram = p @ p.T
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = gram
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k]


def min_norm_point(points: np.ndarray, tol: float = EXACT_TOL, max_iter: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Point of minimum Euclidean norm in ``conv(points)`` (Wolfe's corral method).

    Returns ``(x, weights)`` with ``x = weights @ points``, weights on the simplex.
    Stops when the conditional-gradient duality gap certifies ``|x|`` within
    ``tol`` of the optimum, when no vertex improves, or after ``max_iter``.
    """
    n_pts = len(points)
    sq = np.einsum("ij,ij->i", points, points)
    j = int(np.argmin(sq))
    corral = np.array([j])
    w = np.array([1.0])
    x = points[j].copy()
    for _ in range(max_iter):
        xx = float(x @ x)
        if xx <= tol * tol:
            break
        dots = points @ x
        j = int(np.argmin(dots))
        gap = xx - dots[j]
        # |x| - |x*| <= 2 gap / |x|
        if gap <= tol * tol or 2.0 * gap <= tol * np.sqrt(xx):
            break
        if j in corral:
            break
        corral = np.append(corral, j)
        w = np.append(w, 0.0)
        for _inner in range(len(corral) + 1):
            alpha = _affine_minimizer(points[corral])
            if np.all(alpha > 1e-14):
                w = alpha
                break
            neg = alpha <= 1e-14
            denom = w[neg] - alpha[neg]
            ratios = np.where(denom > 0, w[neg] / np.where(denom > 0, denom, 1.0), 0.0)
            theta = min(1.0, float(ratios.min()))
            w = (1.0 - theta) * w + theta * alpha
            keep = w > 1e-14
            corral = corral[keep]
            w = w[keep] / w[keep].sum()
        x = w @ points[corral]
        if j not in corral:
            # newest vertex dropped immediately: numerical stall
            break
    weights = np.zeros(n_pts)
    weights[corral] = w
    return x, weights


class HullMembership(NamedTuple):
    contains: bool
    weights: Optional[np.ndarray]
    distance: float


def convex_hull_contains(points: ArrayLike, p: ArrayLike, tol: float = EXACT_TOL) -> HullMembership:
    """Whether ``p`` lies within ``tol`` of ``conv(points)``.

    When it does, ``weights`` is a witness: convex weights with
    ``|weights @ points - p| <= tol``.
    """
    if not tol > 0:
        raise GeometryError(f"tol must be positive, got {tol}")
    x = as_points(points)
    p = as_vector(p)
    _check_dim(x, p)
    residual, weights = min_norm_point(x - p, tol)
    dist = float(np.linalg.norm(residual))
    if dist <= tol:
        return HullMembership(True, weights, dist)
    return HullMembership(False, None, dist)


def project_onto_hull(points: ArrayLike, p: ArrayLike, tol: float = EXACT_TOL) -> np.ndarray:
    """Closest point of ``conv(points)`` to ``p``, accurate to ``tol`` in distance."""
    x = as_points(points)
    p = as_vector(p)
    _check_dim(x, p)
    residual, _ = min_norm_point(x - p, tol)
    return p + residual
