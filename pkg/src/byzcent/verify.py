"""Randomized property suites driven by ``byzcent verify``.

Each suite draws its instances from ``derive_seed(seed, trial, suite_tag)``,
so a (suite, seed, trials) triple always produces the same report. A failed
check records the offending layout in the plain-text layout format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .aggregators import aggregate_ball_center, aggregate_box, aggregate_mda, aggregate_safe_area
from .attacks import derive_seed
from .candidates import (
    Layout,
    UnsupportedInstanceError,
    candidate_centroids,
    centroid_hyperbox,
    check_safe_area_supported,
    covering_ball,
    trimmed_trusted_hyperbox,
)
from .evaluation import (
    FAULT_STYLES,
    GroundTruth,
    approximation_ratio,
    box_lb_bound,
    check_validity,
    format_layout,
    gen_box_lb_instance,
    gen_convex_lb_instance,
    gen_random_instance,
)
from .flsim.mlp import MLPConfig, forward_loss_grad, init_model, ModelParams
from .geometry import DEFAULT_MEB_EPS, EXACT_TOL
from .oracles import brute_force_centroid_box, enumerate_subset_means, exact_min_enclosing_ball, finite_difference_grad

SUITES = ("geometry", "bounds", "lowerbounds", "gradients")
_SUITE_TAGS = {name: i + 1 for i, name in enumerate(SUITES)}

RATIO_SLACK = 1e-6
BALL_SLACK = 1e-3
GRAD_REL_TOL = 1e-4


@dataclass
class Violation:
    check: str
    detail: str
    reproducer: str = ""


@dataclass
class SuiteReport:
    suite: str
    trials: int
    checks: int = 0
    violations: list[Violation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    worst: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def expect(self, cond: bool, check: str, detail: str, reproducer: str = "") -> None:
        self.checks += 1
        if not cond:
            self.violations.append(Violation(check, detail, reproducer))

    def track(self, key: str, value: float) -> None:
        if not math.isnan(value):
            self.worst[key] = max(self.worst.get(key, -math.inf), value)

    def lines(self) -> list[str]:
        out = [f"suite {self.suite}: {self.trials} trials, {self.checks} checks, {len(self.violations)} violations"]
        for key in sorted(self.worst):
            out.append(f"  max {key} = {self.worst[key]:.12g}")
        out += [f"  note: {n}" for n in self.notes]
        for v in self.violations[:5]:
            out.append(f"  VIOLATION {v.check}: {v.detail}")
        if self.violations and self.violations[0].reproducer:
            out.append("  reproducer (first violation):")
            out += ["    " + ln for ln in self.violations[0].reproducer.splitlines()]
        return out


def _rng(seed: int, trial: int, suite: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, trial, _SUITE_TAGS[suite]))


def _random_instance(
    rng: np.random.Generator, n_range: tuple[int, int], d_range: tuple[int, int], min_t: int, exact_faults: bool
) -> tuple[Layout, GroundTruth]:
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    t = int(rng.integers(min_t, (n - 1) // 3 + 1))
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    faults = t if exact_faults else int(rng.integers(0, t + 1))
    styles = [s for s in FAULT_STYLES if s != "omit"] if exact_faults else list(FAULT_STYLES)
    style = str(rng.choice(styles))
    return gen_random_instance(n, t, d, int(rng.integers(2**63)), faults=faults, style=style)


def _scale(layout: Layout) -> float:
    return max(1.0, float(np.abs(layout.vectors).max()))


def check_geometry_trial(report: SuiteReport, layout: Layout, truth: GroundTruth) -> None:
    """Fast paths against brute-force oracles on one small layout."""
    dump = format_layout(layout, truth)
    q = layout.quorum
    ch = centroid_hyperbox(layout)
    lo, hi = brute_force_centroid_box(layout.vectors, q)
    err = float(max(np.abs(ch.lo - lo).max(), np.abs(ch.hi - hi).max()))
    report.track("centroid_box_error", err)
    report.expect(err <= 1e-12, "centroid_hyperbox", f"closed form differs from enumeration by {err:.3e}", dump)

    tth = trimmed_trusted_hyperbox(layout)
    box = aggregate_box(layout)
    tol = EXACT_TOL * _scale(layout)
    inside = tth.contains(box.output, tol) and ch.contains(box.output, tol)
    report.expect(inside, "box_membership", "Box output outside TTH intersect CH", dump)

    cents = candidate_centroids(layout).centroids
    mda = aggregate_mda(layout).output
    exact = bool(np.any(np.all(cents == mda, axis=1)))
    report.expect(exact, "mda_membership", "MDA output is not bitwise a candidate centroid", dump)
    ref = enumerate_subset_means(layout.vectors, q)
    gap = float(np.min(np.abs(ref - mda).max(axis=1)))
    report.expect(gap <= 1e-12, "mda_oracle", f"MDA output {gap:.3e} away from every enumerated mean", dump)

    if len(cents) <= 15 and layout.d <= 3:
        _, r_exact = exact_min_enclosing_ball(cents)
        r = covering_ball(layout).radius
        ok = r_exact - 1e-9 <= r <= (1 + DEFAULT_MEB_EPS) * r_exact + 1e-9
        report.expect(ok, "covering_ball", f"radius {r!r} vs exact {r_exact!r}", dump)


def suite_geometry(seed: int, trials: int) -> SuiteReport:
    """Random layouts with n <= 8, t < n/3, d <= 4."""
    report = SuiteReport("geometry", trials)
    for trial in range(trials):
        layout, truth = _random_instance(_rng(seed, trial, "geometry"), (4, 8), (1, 4), 0, exact_faults=False)
        check_geometry_trial(report, layout, truth)
    return report


def box_ratio_bound(layout: Layout) -> float:
    return 2.0 * math.sqrt(min(layout.n, layout.d))


def check_bounds_trial(report: SuiteReport, layout: Layout, truth: GroundTruth) -> None:
    """Approximation-ratio upper bounds and box validity for one layout."""
    dump = format_layout(layout, truth)
    rad = covering_ball(layout).radius

    def ratio_of(out) -> float:
        return approximation_ratio(out, truth, layout, rad_cov=rad).ratio

    r_ball = ratio_of(aggregate_ball_center(layout).output)
    report.track("ratio_ball_center", r_ball)
    report.expect(r_ball <= 1 + BALL_SLACK, "ball_center_bound", f"ratio {r_ball!r} > 1", dump)

    r_mda = ratio_of(aggregate_mda(layout).output)
    report.track("ratio_mda", r_mda)
    report.expect(r_mda <= 2 + RATIO_SLACK, "mda_bound", f"ratio {r_mda!r} > 2", dump)

    box = aggregate_box(layout).output
    r_box = ratio_of(box)
    report.track("ratio_box_over_bound", r_box / box_ratio_bound(layout))
    report.expect(
        r_box <= box_ratio_bound(layout) + RATIO_SLACK,
        "box_bound",
        f"ratio {r_box!r} > 2 sqrt(min(n, d)) = {box_ratio_bound(layout)!r}",
        dump,
    )
    ok = check_validity("box", truth, layout, box, EXACT_TOL * _scale(layout))
    report.expect(ok, "box_validity", "Box output outside the trusted hyperbox", dump)

    try:
        check_safe_area_supported(layout)
    except UnsupportedInstanceError:
        return
    r_safe = ratio_of(aggregate_safe_area(layout).output)
    report.track("ratio_safe_area_over_bound", r_safe / (2 * layout.d + 1))
    report.expect(
        r_safe <= 2 * layout.d + 1 + BALL_SLACK, "safe_area_bound", f"ratio {r_safe!r} > 2d + 1", dump
    )


def suite_bounds(seed: int, trials: int) -> SuiteReport:
    """Random layouts with exactly t >= 1 faulty vectors sent; n in [4, 10], d in [1, 6]."""
    report = SuiteReport("bounds", trials)
    for trial in range(trials):
        layout, truth = _random_instance(_rng(seed, trial, "bounds"), (4, 10), (1, 6), 1, exact_faults=True)
        check_bounds_trial(report, layout, truth)
    return report


BOX_LB_CASES = ((4, 1, 3), (7, 2, 5), (10, 3, 8))
CONVEX_LB_CASES_1D = ((4, 1), (7, 2), (10, 3), (5, 1))


def check_box_lb(report: SuiteReport, n: int, t: int, d: int, x: float = 1.0) -> float:
    layout, truth = gen_box_lb_instance(n, t, d, x)
    dump = format_layout(layout, truth)
    tth = trimmed_trusted_hyperbox(layout)
    report.expect(tth.is_point(EXACT_TOL), "box_lb_point", f"TTH not a point for {(n, t, d)}", dump)
    ratio = approximation_ratio(tth.center, truth, layout).ratio
    bound = box_lb_bound(n, t, d)
    report.expect(ratio >= bound - 1e-9, "box_lb_ratio", f"{(n, t, d)}: ratio {ratio!r} < {bound!r}", dump)
    return ratio


def check_convex_lb(report: SuiteReport, n: int, t: int, d: int) -> float:
    layout, truth = gen_convex_lb_instance(n, t, d)
    ratio = approximation_ratio(aggregate_safe_area(layout).output, truth, layout).ratio
    report.expect(
        ratio >= 2 * d * 0.95,
        "convex_lb_ratio",
        f"{(n, t, d)}: safe-area ratio {ratio!r} < {2 * d * 0.95!r}",
        format_layout(layout, truth),
    )
    return ratio


def suite_lowerbounds(seed: int, trials: int) -> SuiteReport:
    """Lower-bound constructions: the fixed cases plus ``trials`` random box cases.

    The two-dimensional convex construction is measured and reported as a
    note only: its ratio is 2 rather than 4 (see the README).
    """
    report = SuiteReport("lowerbounds", trials)
    for case in BOX_LB_CASES:
        check_box_lb(report, *case)
    for trial in range(trials):
        rng = _rng(seed, trial, "lowerbounds")
        t = int(rng.integers(1, 4))
        n = int(rng.integers(3 * t + 1, 3 * t + 8))
        d = int(rng.integers(1, 10))
        check_box_lb(report, n, t, d, float(rng.uniform(0.1, 10.0)))
    for n, t in CONVEX_LB_CASES_1D:
        check_convex_lb(report, n, t, 1)
    for n, t in ((4, 1), (7, 2)):
        layout, truth = gen_convex_lb_instance(n, t, 2)
        ratio = approximation_ratio(aggregate_safe_area(layout).output, truth, layout).ratio
        report.notes.append(f"convex d=2 construction (n={n}, t={t}): safe-area ratio {ratio:.6f}")
    return report


def gradient_relative_error(params: ModelParams, x: np.ndarray, y: np.ndarray, coords) -> float:
    _, g = forward_loss_grad(params, x, y)

    def loss_at(flat):
        return forward_loss_grad(ModelParams(flat, params.layer_sizes), x, y)[0]

    fd = finite_difference_grad(loss_at, params.flat, coords)
    num = float(np.linalg.norm(g[coords] - fd))
    den = max(float(np.linalg.norm(g[coords])), float(np.linalg.norm(fd)), 1e-8)
    return num / den


def random_small_mlp(rng: np.random.Generator) -> tuple[ModelParams, np.ndarray, np.ndarray]:
    depth = int(rng.integers(2, 5))
    sizes = tuple(int(s) for s in rng.integers(2, 7, size=depth))
    sizes = sizes + (int(rng.integers(2, 5)),)
    params = init_model(MLPConfig(sizes, init_seed=int(rng.integers(2**32))))
    # nonzero biases so that ReLU kinks are not all at the origin
    params.flat += 0.1 * rng.standard_normal(params.flat.shape)
    batch = int(rng.integers(1, 9))
    x = rng.standard_normal((batch, sizes[0]))
    y = rng.integers(0, sizes[-1], size=batch)
    return params, x, y


def suite_gradients(seed: int, trials: int) -> SuiteReport:
    """Backprop against central differences (step 1e-5) on 5 random coordinates per model."""
    report = SuiteReport("gradients", trials)
    for trial in range(trials):
        rng = _rng(seed, trial, "gradients")
        params, x, y = random_small_mlp(rng)
        coords = rng.choice(params.flat.size, size=min(5, params.flat.size), replace=False)
        err = gradient_relative_error(params, x, y, coords)
        report.track("relative_error", err)
        report.expect(err <= GRAD_REL_TOL, "gradient", f"trial {trial}: relative error {err:.3e}, sizes {params.layer_sizes}")
    return report


SUITE_FUNCS: dict[str, Callable[[int, int], SuiteReport]] = {
    "geometry": suite_geometry,
    "bounds": suite_bounds,
    "lowerbounds": suite_lowerbounds,
    "gradients": suite_gradients,
}


def run_suites(name: str, seed: int, trials: int) -> list[SuiteReport]:
    names: Optional[tuple[str, ...]] = SUITES if name == "all" else (name,)
    if name != "all" and name not in SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}; valid suites: {', '.join(SUITES + ('all',))}")
    return [SUITE_FUNCS[s](seed, trials) for s in names]
