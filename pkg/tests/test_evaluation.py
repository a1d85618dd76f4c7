import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzcent.aggregators import aggregate_box
from byzcent.candidates import Layout, covering_ball, trimmed_trusted_hyperbox
from byzcent.evaluation import (
    GroundTruth,
    InstanceError,
    approximation_ratio,
    box_lb_bound,
    cent_star,
    check_validity,
    format_ratio,
    gen_box_lb_instance,
    gen_convex_lb_instance,
    gen_random_instance,
    nonfaulty_diameter,
    read_layout_file,
    write_layout_file,
)
from byzcent.oracles import enumerate_subset_means, exact_min_enclosing_ball


def truth_of(vectors, faulty=()):
    vecs = np.atleast_2d(np.asarray(vectors, float))
    return GroundTruth(tuple(range(len(vecs))), vecs, frozenset(faulty))


def test_cent_star():
    assert cent_star(truth_of([[0.0], [1.0], [2.0]]))[0] == 1.0
    assert np.array_equal(cent_star(truth_of([[4.0, 5.0]])), [4.0, 5.0])
    _, truth = gen_box_lb_instance(4, 1, 3, 1.0)
    assert np.allclose(cent_star(truth), [1 / 3] * 3)


def test_nonfaulty_diameter():
    assert nonfaulty_diameter(truth_of([[1.0, 1.0]])) == 0.0
    assert nonfaulty_diameter(truth_of([[0.0, 0.0], [3.0, 4.0]])) == pytest.approx(5.0)
    assert nonfaulty_diameter(truth_of([[0.0], [1.0], [2.0]])) == pytest.approx(2.0)


class TestRatio:
    def test_zero_at_cent_star(self, layout_a):
        truth = GroundTruth((0, 1, 2), layout_a.vectors[:3], frozenset({3}))
        assert approximation_ratio(cent_star(truth), truth, layout_a).ratio == 0.0

    def test_layout_a_box(self, layout_a):
        truth = GroundTruth((0, 1, 2), layout_a.vectors[:3], frozenset({3}))
        rep = approximation_ratio([1.5], truth, layout_a)
        assert rep.distance == pytest.approx(0.5)
        assert rep.rad_cov == pytest.approx(5 / 3, rel=1e-4)
        assert rep.ratio == pytest.approx(0.3, rel=1e-4)

    def test_box_lb_origin(self):
        layout, truth = gen_box_lb_instance(4, 1, 3, 1.0)
        rep = approximation_ratio(np.zeros(3), truth, layout)
        _, r_exact = exact_min_enclosing_ball(enumerate_subset_means(layout.vectors, 3))
        assert rep.distance == pytest.approx(math.sqrt(3) / 3)
        assert rep.ratio == pytest.approx(rep.distance / r_exact, rel=1e-4)
        # frozen: (1/sqrt(3)) / (sqrt(2/3)/3) = 3/sqrt(2)
        assert rep.ratio == pytest.approx(2.1213203435596424, rel=1e-4)

    def test_zero_radius_cases(self):
        layout = Layout(4, 1, np.ones((4, 1)))
        truth = truth_of(np.ones((3, 1)), faulty={3})
        assert approximation_ratio([1.0], truth, layout).ratio == 0.0
        rep = approximation_ratio([2.0], truth, layout)
        assert rep.is_infinite and format_ratio(rep.ratio) == "inf"

    def test_rad_cov_reuse(self, layout_a):
        truth = GroundTruth((0, 1, 2), layout_a.vectors[:3], frozenset({3}))
        assert approximation_ratio([1.5], truth, layout_a, rad_cov=0.5).ratio == pytest.approx(1.0)

    def test_dimension_mismatch(self, layout_a):
        truth = GroundTruth((0, 1, 2), layout_a.vectors[:3], frozenset({3}))
        with pytest.raises(InstanceError):
            approximation_ratio([1.0, 2.0], truth, layout_a)


class TestValidity:
    def test_strong(self):
        v = np.array([1.0, 2.0])
        layout = Layout(4, 1, np.vstack([np.tile(v, (3, 1)), [[9.0, 9.0]]]))
        truth = truth_of(np.tile(v, (3, 1)), faulty={3})
        assert check_validity("strong", truth, layout, v, 1e-9)
        assert not check_validity("strong", truth, layout, v + 2e-9, 1e-9)

    def test_box(self):
        layout = Layout(2, 0, np.array([[0.0, 0.0], [1.0, 1.0]]))
        truth = truth_of([[0.0, 0.0], [1.0, 1.0]])
        assert check_validity("box", truth, layout, [0.5, 0.5])
        assert not check_validity("box", truth, layout, [2.0, 0.0])

    def test_weak_vacuous_with_faults(self, layout_a):
        truth = GroundTruth((0, 1, 2), np.zeros((3, 1)), frozenset({3}))
        assert check_validity("weak", truth, layout_a, [99.0])

    def test_convex(self):
        layout = Layout(3, 0, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        truth = truth_of(layout.vectors)
        assert check_validity("convex", truth, layout, [0.2, 0.2])
        assert not check_validity("convex", truth, layout, [1.0, 1.0])

    def test_unknown_kind(self, layout_a):
        with pytest.raises(InstanceError):
            check_validity("fuzzy", truth_of(layout_a.vectors), layout_a, [0.0])


class TestGenerators:
    def test_box_lb_small(self):
        layout, truth = gen_box_lb_instance(4, 1, 3, 1.0)
        assert np.array_equal(truth.honest_vectors, np.eye(3))
        assert truth.faulty_ids == frozenset({3})
        assert np.array_equal(layout.vectors[3], np.zeros(3))
        assert box_lb_bound(4, 1, 3) == pytest.approx(math.sqrt(1.5))

    @pytest.mark.parametrize("n,t,d", [(4, 1, 3), (7, 2, 5), (10, 3, 8), (13, 4, 2), (5, 1, 9)])
    def test_box_lb_tth_is_origin(self, n, t, d):
        layout, truth = gen_box_lb_instance(n, t, d, 2.5)
        tth = trimmed_trusted_hyperbox(layout)
        assert np.array_equal(tth.lo, np.zeros(d)) and np.array_equal(tth.hi, np.zeros(d))
        out = aggregate_box(layout).output
        assert approximation_ratio(out, truth, layout).ratio >= box_lb_bound(n, t, d) - 1e-9

    def test_convex_lb_small(self):
        layout, truth = gen_convex_lb_instance(4, 1, 1)
        assert sorted(truth.honest_vectors[:, 0]) == [0.0, 0.0, 1.0]
        assert truth.faulty_ids == frozenset({3}) and layout.vectors[3, 0] == 0.0
        assert cent_star(truth)[0] == pytest.approx(1 / 3)

    @pytest.mark.parametrize("n,t", [(4, 1), (7, 2), (10, 3)])
    def test_convex_lb_one_dim_geometry(self, n, t):
        layout, truth = gen_convex_lb_instance(n, t, 1)
        assert cent_star(truth)[0] == pytest.approx(t / (n - t))
        _, r = exact_min_enclosing_ball(enumerate_subset_means(layout.vectors, n - t))
        assert r == pytest.approx(t / (2 * (n - t)))

    @pytest.mark.parametrize("n,t", [(7, 2), (10, 3)])
    def test_convex_lb_two_dim_geometry(self, n, t):
        # Cent* sits at t/(n-t) on both axes; the covering radius is sqrt(2) t / (2 (n-t)).
        layout, truth = gen_convex_lb_instance(n, t, 2)
        assert np.allclose(cent_star(truth), [t / (n - t)] * 2)
        _, r = exact_min_enclosing_ball(enumerate_subset_means(layout.vectors, n - t))
        assert r == pytest.approx(math.sqrt(2) * t / (2 * (n - t)))

    def test_convex_lb_infeasible(self):
        with pytest.raises(InstanceError):
            gen_convex_lb_instance(6, 2, 2)
        with pytest.raises(InstanceError):
            gen_box_lb_instance(3, 1, 2)

    def test_random_deterministic(self):
        a, ta = gen_random_instance(10, 3, 5, 7)
        b, tb = gen_random_instance(10, 3, 5, 7)
        assert np.array_equal(a.vectors, b.vectors) and ta.faulty_ids == tb.faulty_ids

    def test_random_omit(self):
        layout, truth = gen_random_instance(10, 3, 4, 1, style="omit")
        assert layout.m == 7 and len(truth.faulty_ids) == 3


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 10), st.integers(1, 5))
def test_cent_star_in_covering_ball(seed, n, d):
    eps = 1e-4
    layout, truth = gen_random_instance(n, (n - 1) // 3, d, seed)
    ball = covering_ball(layout, eps)
    assert np.linalg.norm(cent_star(truth) - ball.center) <= ball.radius * (1 + eps) + 1e-9


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 10), st.integers(1, 5))
def test_inside_tth_implies_box_validity(seed, n, d):
    layout, truth = gen_random_instance(n, (n - 1) // 3, d, seed)
    tth = trimmed_trusted_hyperbox(layout)
    rng = np.random.default_rng(seed)
    p = tth.lo + rng.uniform(0, 1, d) * tth.widths
    assert check_validity("box", truth, layout, p, 1e-12)


def test_layout_file_round_trip(tmp_path):
    layout, truth = gen_random_instance(10, 3, 5, 7)
    path = tmp_path / "layout.txt"
    write_layout_file(path, layout, truth)
    back, btruth = read_layout_file(path)
    assert np.array_equal(back.vectors, layout.vectors) and np.array_equal(back.ids, layout.ids)
    assert btruth.faulty_ids == truth.faulty_ids
    assert path.read_text().splitlines()[0] == f"10 3 5 {layout.m}"


def test_layout_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("4 1 1\n")
    with pytest.raises(InstanceError):
        read_layout_file(bad)
    bad.write_text("4 1 1 4\n0 1.0\n")
    with pytest.raises(InstanceError):
        read_layout_file(bad)
