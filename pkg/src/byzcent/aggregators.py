"""Server-side aggregation rules.

Every rule takes a :class:`~byzcent.candidates.Layout` and returns an
:class:`AggregationResult`. Rules never see which clients are faulty.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .candidates import (
    Layout,
    centroid_hyperbox,
    check_safe_area_supported,
    covering_ball,
    safe_area_point,
    subset_indices,
    trimmed_trusted_hyperbox,
)
from .geometry import DEFAULT_MEB_EPS, EXACT_TOL, hyperbox_intersection


class AggregationIntegrityError(RuntimeError):
    """An invariant that theory guarantees did not hold numerically."""


class UnknownAggregatorError(ValueError):
    pass


@dataclass
class AggregationResult:
    output: np.ndarray
    aggregator_name: str
    diagnostics: dict[str, Any] = field(default_factory=dict)


def aggregate_mean(layout: Layout) -> AggregationResult:
    return AggregationResult(layout.vectors.mean(axis=0), "mean")


def aggregate_ball_center(layout: Layout, eps: float = DEFAULT_MEB_EPS) -> AggregationResult:
    """Center of the minimum ball covering all candidate centroids."""
    ball = covering_ball(layout, eps)
    return AggregationResult(ball.center, "ball_center", {"radius": ball.radius})


def _subset_diameters(vectors: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    diff = vectors[:, None, :] - vectors[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    q = subsets.shape[1]
    if q < 2:
        return np.zeros(len(subsets))
    a, b = np.triu_indices(q, 1)
    return dist[subsets[:, a], subsets[:, b]].max(axis=1)


def aggregate_mda(layout: Layout) -> AggregationResult:
    """Minimum-diameter averaging.

    Picks the ``(n - t)``-subset with the smallest maximum pairwise distance
    (first in lexicographic order on ties) and returns its candidate centroid.
    """
    subsets = subset_indices(layout.m, layout.quorum)
    diam = _subset_diameters(layout.vectors, subsets)
    best = int(np.argmin(diam))
    chosen = subsets[best]
    # same reduction shape as candidate_centroids, so the result is bit-identical
    output = layout.vectors[chosen[None, :]].sum(axis=1)[0] / layout.quorum
    return AggregationResult(
        output,
        "mda",
        {
            "subset": [int(i) for i in chosen],
            "subset_ids": [int(layout.ids[i]) for i in chosen],
            "diameter": float(diam[best]),
        },
    )


def aggregate_box(layout: Layout, tol: float = EXACT_TOL) -> AggregationResult:
    """Center of the intersection of the trimmed trusted hyperbox and the centroid hyperbox."""
    tth = trimmed_trusted_hyperbox(layout)
    ch = centroid_hyperbox(layout)
    scale = max(1.0, float(np.abs(layout.vectors).max()))
    box = hyperbox_intersection(tth, ch, tol * scale)
    if box is None:
        gap = float(np.max(np.maximum(tth.lo, ch.lo) - np.minimum(tth.hi, ch.hi)))
        raise AggregationIntegrityError(
            f"trimmed trusted hyperbox and centroid hyperbox are disjoint (gap {gap:.3e})"
        )
    return AggregationResult(box.center, "box", {"tth": tth, "ch": ch, "intersection": box})


def aggregate_safe_area(layout: Layout, eps: float = DEFAULT_MEB_EPS, tol: float = EXACT_TOL) -> AggregationResult:
    """Safe-area point closest to the covering-ball center (only d <= 2, n <= 12)."""
    check_safe_area_supported(layout)
    ball = covering_ball(layout, eps)
    out = safe_area_point(layout, ball.center, tol)
    return AggregationResult(out, "safe_area", {"target": ball.center, "radius": ball.radius})


AGGREGATORS: dict[str, Callable[..., AggregationResult]] = {
    "mean": aggregate_mean,
    "ball_center": aggregate_ball_center,
    "mda": aggregate_mda,
    "box": aggregate_box,
    "safe_area": aggregate_safe_area,
}

EPS_AWARE = {"ball_center", "safe_area"}


def get_aggregator(name: str, eps: float | None = None) -> Callable[[Layout], AggregationResult]:
    """Look up an aggregation rule by name, optionally binding its ``eps``."""
    try:
        fn = AGGREGATORS[name]
    except KeyError:
        raise UnknownAggregatorError(
            f"unknown aggregator {name!r}; valid names: {', '.join(sorted(AGGREGATORS))}"
        ) from None
    if eps is not None and name in EPS_AWARE:
        return functools.partial(fn, eps=eps)
    return fn
