"""Ground-truth-aware metrics and adversarial instance generators.

This is the only module that knows which clients are faulty. Aggregators
receive a :class:`Layout`; the simulator keeps a :class:`GroundTruth` next to
it and hands both to the functions here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .candidates import Layout, covering_ball
from .geometry import DEFAULT_MEB_EPS, EXACT_TOL, Hyperbox, as_points, convex_hull_contains, diameter

ZERO_RADIUS = 1e-12
INFINITE_RATIO = math.inf
VALIDITY_KINDS = ("weak", "strong", "box", "convex")


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    honest_ids: tuple[int, ...]
    honest_vectors: np.ndarray
    faulty_ids: frozenset[int]

    def __post_init__(self):
        vecs = as_points(self.honest_vectors)
        if len(vecs) != len(self.honest_ids):
            raise InstanceError("honest ids and vectors differ in length")
        if set(self.honest_ids) & set(self.faulty_ids):
            raise InstanceError("a client cannot be both honest and faulty")
        object.__setattr__(self, "honest_vectors", vecs)
        object.__setattr__(self, "honest_ids", tuple(int(i) for i in self.honest_ids))
        object.__setattr__(self, "faulty_ids", frozenset(int(i) for i in self.faulty_ids))

    @classmethod
    def from_pairs(cls, honest: Iterable[tuple[int, np.ndarray]], faulty_ids: Iterable[int]) -> "GroundTruth":
        pairs = list(honest)
        if not pairs:
            raise InstanceError("ground truth needs at least one honest vector")
        return cls(tuple(i for i, _ in pairs), np.stack([np.asarray(v, float) for _, v in pairs]), frozenset(faulty_ids))


def cent_star(truth: GroundTruth) -> np.ndarray:
    """Centroid of the non-faulty vectors."""
    return truth.honest_vectors.mean(axis=0)


def nonfaulty_diameter(truth: GroundTruth) -> float:
    return diameter(truth.honest_vectors)


def trusted_hyperbox(truth: GroundTruth) -> Hyperbox:
    return Hyperbox.bounding(truth.honest_vectors)


@dataclass(frozen=True)
class RatioReport:
    cent_star: np.ndarray
    rad_cov: float
    distance: float
    ratio: float

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.ratio)


def format_ratio(ratio: float) -> str:
    return "inf" if math.isinf(ratio) else repr(float(ratio))


def approximation_ratio(
    output, truth: GroundTruth, layout: Layout, eps: float = DEFAULT_MEB_EPS, rad_cov: Optional[float] = None
) -> RatioReport:
    """``dist(output, Cent*) / Rad_cov``, with the zero-radius cases made explicit.

    Pass ``rad_cov`` to reuse a covering radius already computed for ``layout``.
    """
    output = np.asarray(output, dtype=np.float64)
    cs = cent_star(truth)
    if output.shape != cs.shape or cs.shape[0] != layout.d:
        raise InstanceError("output, ground truth and layout dimensions disagree")
    rad = covering_ball(layout, eps).radius if rad_cov is None else float(rad_cov)
    dist = float(np.linalg.norm(output - cs))
    if rad <= ZERO_RADIUS:
        ratio = 0.0 if dist <= ZERO_RADIUS else INFINITE_RATIO
    else:
        ratio = dist / rad
    return RatioReport(cs, rad, dist, ratio)


def check_validity(kind: str, truth: GroundTruth, layout: Layout, output, tol: float = EXACT_TOL) -> bool:
    """Whether ``output`` satisfies the named validity condition for this ground truth.

    Weak and strong validity are vacuous unless their premise holds (every
    client honest and identical, resp. every honest vector identical).
    """
    output = np.asarray(output, dtype=np.float64)
    honest = truth.honest_vectors
    if kind in ("weak", "strong"):
        if kind == "weak" and (truth.faulty_ids or len(honest) < layout.n):
            return True
        if not np.all(honest == honest[0]):
            return True
        return bool(np.linalg.norm(output - honest[0]) <= tol)
    if kind == "box":
        return trusted_hyperbox(truth).contains(output, tol)
    if kind == "convex":
        return convex_hull_contains(honest, output, tol).contains
    raise InstanceError(f"unknown validity kind {kind!r}; valid kinds: {', '.join(VALIDITY_KINDS)}")


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------


def _assemble(n: int, t: int, honest: list[np.ndarray], faulty: list[np.ndarray]) -> tuple[Layout, GroundTruth]:
    vectors = np.stack(honest + faulty)
    layout = Layout(n, t, vectors, np.arange(len(vectors)))
    k = len(honest)
    truth = GroundTruth(tuple(range(k)), vectors[:k], frozenset(range(k, len(vectors))))
    return layout, truth


def box_lb_k(n: int, t: int, d: int) -> int:
    return min((n - t) // t, d)


def gen_box_lb_instance(n: int, t: int, d: int, x: float = 1.0) -> tuple[Layout, GroundTruth]:
    """Layout whose trimmed trusted hyperbox is the origin while Cent* is far from it.

    With ``k = min(floor((n-t)/t), d)``: ``t`` honest vectors at ``x * e_j`` for
    each ``j < k``, the other honest vectors and all ``t`` faulty ones at the
    origin. Honest clients get ids ``0..n-t-1``, faulty ones the rest.
    """
    if t < 1 or n <= 3 * t:
        raise InstanceError(f"box lower-bound instance needs t >= 1 and n > 3t, got n={n}, t={t}")
    if d < 1 or not x > 0:
        raise InstanceError(f"box lower-bound instance needs d >= 1 and x > 0, got d={d}, x={x}")
    k = box_lb_k(n, t, d)
    zero = np.zeros(d)
    honest = [zero.copy() for _ in range(n - t - k * t)]
    for j in range(k):
        honest += [x * np.eye(d)[j] for _ in range(t)]
    faulty = [zero.copy() for _ in range(t)]
    return _assemble(n, t, honest, faulty)


def box_lb_bound(n: int, t: int, d: int) -> float:
    """Lower bound on the ratio of any box-valid rule on the instance above."""
    return math.sqrt(box_lb_k(n, t, d) / 2.0)


def gen_convex_lb_instance(n: int, t: int, d: int, eps: float = 1.0) -> tuple[Layout, GroundTruth]:
    """Layout whose safe area collapses to the origin.

    ``t`` honest vectors at ``eps * e_i`` for every axis ``i``; the remaining
    ``n - d t`` vectors sit at the origin and ``t`` of them are faulty.
    """
    if t < 1 or n <= max(3, d + 1) * t:
        raise InstanceError(
            f"convex lower-bound instance needs t >= 1 and n > max(3, d+1) t, got n={n}, t={t}, d={d}"
        )
    if not eps > 0:
        raise InstanceError(f"eps must be positive, got {eps}")
    zero = np.zeros(d)
    honest = []
    for i in range(d):
        honest += [eps * np.eye(d)[i] for _ in range(t)]
    honest += [zero.copy() for _ in range(n - d * t - t)]
    faulty = [zero.copy() for _ in range(t)]
    return _assemble(n, t, honest, faulty)


FAULT_STYLES = ("far", "flip", "cluster", "inlier", "omit")


def gen_random_instance(
    n: int,
    t: int,
    d: int,
    seed: int,
    faults: Optional[int] = None,
    style: Optional[str] = None,
) -> tuple[Layout, GroundTruth]:
    """Random honest cloud plus ``faults`` (default ``t``) adversarial vectors.

    ``style`` picks how faulty clients behave; by default it is drawn from
    ``FAULT_STYLES``. ``omit`` drops the faulty messages entirely.
    """
    if faults is None:
        faults = t
    if not 0 <= faults <= t:
        raise InstanceError(f"need 0 <= faults <= t, got faults={faults}, t={t}")
    rng = np.random.default_rng(seed)
    if style is None:
        style = str(rng.choice(FAULT_STYLES))
    if style not in FAULT_STYLES:
        raise InstanceError(f"unknown fault style {style!r}")
    center = rng.normal(0.0, 3.0, d)
    spread = rng.uniform(0.1, 2.0)
    honest = [center + spread * rng.standard_normal(d) for _ in range(n - faults)]
    faulty = []
    if style == "far":
        faulty = [center + rng.normal(0.0, 20.0, d) for _ in range(faults)]
    elif style == "flip":
        faulty = [-h for h in honest[:faults]]
    elif style == "cluster":
        spot = center + rng.normal(0.0, 5.0, d)
        faulty = [spot.copy() for _ in range(faults)]
    elif style == "inlier":
        faulty = [center + 0.5 * spread * rng.standard_normal(d) for _ in range(faults)]
    order = rng.permutation(n)
    ids_h = [int(i) for i in order[: len(honest)]]
    ids_f = [int(i) for i in order[len(honest):]]
    truth = GroundTruth(tuple(ids_h), np.stack(honest), frozenset(ids_f))
    if style == "omit":
        layout = Layout(n, t, np.stack(honest), np.asarray(ids_h))
    else:
        layout = Layout(n, t, np.stack(honest + faulty), np.asarray(ids_h + ids_f))
    return layout, truth


# ---------------------------------------------------------------------------
# Layout files
# ---------------------------------------------------------------------------


def format_layout(layout: Layout, truth: Optional[GroundTruth] = None) -> str:
    """Plain-text layout: ``n t d m``, one ``id v0 .. v(d-1)`` line per vector, then ``faulty ids...``."""
    lines = [f"{layout.n} {layout.t} {layout.d} {layout.m}"]
    for cid, vec in zip(layout.ids, layout.vectors):
        lines.append(" ".join([str(int(cid))] + [repr(float(v)) for v in vec]))
    if truth is not None:
        lines.append(" ".join(["faulty"] + [str(i) for i in sorted(truth.faulty_ids)]))
    return "\n".join(lines) + "\n"


def write_layout_file(path, layout: Layout, truth: Optional[GroundTruth] = None) -> None:
    Path(path).write_text(format_layout(layout, truth))


def read_layout_file(path) -> tuple[Layout, Optional[GroundTruth]]:
    raw = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not raw or len(raw[0]) != 4:
        raise InstanceError(f"{path}: first line must be 'n t d m'")
    n, t, d, m = (int(v) for v in raw[0])
    rows = raw[1 : 1 + m]
    if len(rows) != m or any(len(r) != d + 1 for r in rows):
        raise InstanceError(f"{path}: expected {m} vector lines with {d + 1} fields")
    ids = np.array([int(r[0]) for r in rows])
    vecs = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(m, d)
    layout = Layout(n, t, vecs, ids)
    tail = raw[1 + m :]
    if not tail:
        return layout, None
    if tail[0][0] != "faulty":
        raise InstanceError(f"{path}: expected a 'faulty' line after the vectors")
    faulty = frozenset(int(v) for v in tail[0][1:])
    keep = [i for i, cid in enumerate(ids) if int(cid) not in faulty]
    truth = GroundTruth(tuple(int(ids[i]) for i in keep), vecs[keep], faulty)
    return layout, truth
