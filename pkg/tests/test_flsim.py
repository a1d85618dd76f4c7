import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzcent.aggregators import aggregate_box, aggregate_mda, aggregate_mean, get_aggregator
from byzcent.attacks import AttackSpec
from byzcent.candidates import candidate_centroids, centroid_hyperbox, trimmed_trusted_hyperbox
from byzcent.dataio import Dataset, synth_blobs
from byzcent.flsim import (
    MLPConfig,
    ModelParams,
    PartitionError,
    TrainConfig,
    TrainingError,
    evaluate_model,
    forward_loss_grad,
    init_model,
    init_state,
    local_update,
    partition_data,
    run_metadata,
    run_round_fedavg,
    run_round_fedsgd,
    run_training,
    unflatten,
)
from byzcent.oracles import finite_difference_grad
from byzcent.verify import gradient_relative_error, random_small_mlp

BLOBS = synth_blobs(10, 3, 40, 0.5, 0)
BASE = TrainConfig(rounds=5, lr=0.3, n=10, t=3, aggregator="mean", hidden=(8,), seed=1)


class Recorder:
    """Wraps an aggregator and keeps the last layout and result."""

    def __init__(self, fn):
        self.fn = fn
        self.layout = None
        self.result = None

    def __call__(self, layout):
        self.layout = layout
        self.result = self.fn(layout)
        return self.result


class TestModel:
    def test_init_deterministic_and_sized(self):
        cfg = MLPConfig((4, 3, 2), init_seed=5)
        a, b = init_model(cfg), init_model(cfg)
        assert np.array_equal(a.flat, b.flat)
        assert a.flat.size == 23 == cfg.n_params
        for w, bias in a.layers():
            assert np.all(bias == 0)
            assert np.all(np.abs(w) <= 1 / math.sqrt(w.shape[0]))

    def test_flat_order(self):
        flat = np.arange(23, dtype=float)
        (w1, b1), (w2, b2) = unflatten(flat, (4, 3, 2))
        assert w1[0].tolist() == [0, 1, 2] and b1.tolist() == [12, 13, 14]
        assert w2[0].tolist() == [15, 16] and b2.tolist() == [21, 22]

    def test_views_round_trip(self):
        p = init_model(MLPConfig((4, 3, 2)))
        w, _ = p.layers()[0]
        w[0, 0] = 42.0
        assert p.flat[0] == 42.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MLPConfig((4,))
        with pytest.raises(ValueError):
            MLPConfig((4, 2), activation="tanh")
        with pytest.raises(ValueError):
            ModelParams(np.zeros(5), (4, 3, 2))


class TestLossGrad:
    def test_duplicate_batch_invariance(self):
        rng = np.random.default_rng(0)
        p = init_model(MLPConfig((4, 3, 2)))
        x, y = rng.standard_normal((5, 4)), rng.integers(0, 2, 5)
        l1, g1 = forward_loss_grad(p, x, y)
        l2, g2 = forward_loss_grad(p, np.vstack([x, x]), np.concatenate([y, y]))
        assert l1 == pytest.approx(l2, rel=1e-12) and np.allclose(g1, g2, rtol=1e-12, atol=1e-15)

    def test_finite_differences(self):
        rng = np.random.default_rng(1)
        p = init_model(MLPConfig((4, 3, 2), init_seed=2))
        p.flat += 0.1 * rng.standard_normal(p.flat.size)
        x, y = rng.standard_normal((6, 4)), rng.integers(0, 2, 6)
        coords = rng.choice(23, 5, replace=False)
        _, g = forward_loss_grad(p, x, y)
        fd = finite_difference_grad(lambda f: forward_loss_grad(ModelParams(f, p.layer_sizes), x, y)[0], p.flat, coords)
        assert np.linalg.norm(g[coords] - fd) <= 1e-4 * np.linalg.norm(fd)

    def test_zero_model_two_classes(self):
        p = ModelParams(np.zeros(23), (4, 3, 2))
        loss, _ = forward_loss_grad(p, np.ones((4, 4)), np.array([0, 1, 0, 1]))
        assert loss == pytest.approx(math.log(2))

    def test_dimension_mismatch(self):
        p = init_model(MLPConfig((4, 3, 2)))
        with pytest.raises(ValueError):
            forward_loss_grad(p, np.ones((2, 5)), np.array([0, 1]))
        with pytest.raises(ValueError):
            forward_loss_grad(p, np.ones((0, 4)), np.array([], dtype=int))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_gradient_check_random_models(seed):
    params, x, y = random_small_mlp(np.random.default_rng(seed))
    coords = np.random.default_rng(seed + 1).choice(params.flat.size, min(5, params.flat.size), replace=False)
    assert gradient_relative_error(params, x, y, coords) <= 1e-4


class TestEvaluate:
    def test_majority_class(self):
        p = ModelParams(np.zeros(23), (4, 3, 2))
        p.layers()[-1][1][:] = [1.0, 0.0]
        y = np.array([0] * 9 + [1])
        acc, _ = evaluate_model(p, np.ones((10, 4)), y)
        assert acc == pytest.approx(0.9)

    def test_confident_correct_logits(self):
        p = ModelParams(np.zeros(23), (4, 3, 2))
        p.layers()[-1][1][:] = [50.0, 0.0]
        acc, loss = evaluate_model(p, np.ones((3, 4)), np.zeros(3, dtype=int))
        assert acc == 1.0 and loss < 1e-20

    def test_zero_model_ten_classes(self):
        sizes = (6, 4, 10)
        p = ModelParams(np.zeros(MLPConfig(sizes).n_params), sizes)
        _, loss = evaluate_model(p, np.ones((10, 6)), np.arange(10))
        assert loss == pytest.approx(2.302585092994046)


class TestLocalUpdate:
    def setup_method(self):
        rng = np.random.default_rng(3)
        self.p = init_model(MLPConfig((4, 3, 2)))
        self.x, self.y = rng.standard_normal((8, 4)), rng.integers(0, 2, 8)

    def test_full_batch_single_step(self):
        out = local_update(self.p, self.x, self.y, 1, 8, 0.1, 0)
        _, g = forward_loss_grad(self.p, self.x, self.y)
        assert np.allclose(out.flat, self.p.flat - 0.1 * g, rtol=0, atol=1e-14)

    def test_zero_lr(self):
        assert np.array_equal(local_update(self.p, self.x, self.y, 3, 2, 0.0, 0).flat, self.p.flat)

    def test_deterministic(self):
        a = local_update(self.p, self.x, self.y, 2, 3, 0.1, 9)
        b = local_update(self.p, self.x, self.y, 2, 3, 0.1, 9)
        assert np.array_equal(a.flat, b.flat)
        assert not np.array_equal(a.flat, self.p.flat)

    def test_errors(self):
        with pytest.raises(ValueError):
            local_update(self.p, self.x[:0], self.y[:0], 1, 2, 0.1, 0)
        with pytest.raises(ValueError):
            local_update(self.p, self.x, self.y, 0, 2, 0.1, 0)


class TestPartition:
    def test_homogeneous(self):
        ds = Dataset(np.zeros((100, 1)), np.arange(100) % 10, 10)
        shards = partition_data(ds, "homogeneous", 10, 0)
        assert [len(s) for s in shards] == [10] * 10

    def test_extreme_two_labels(self):
        ds = Dataset(np.zeros((2000, 1)), np.repeat(np.arange(10), 200), 10)
        for seed in range(5):
            shards = partition_data(ds, "extreme", 10, seed)
            assert all(len(np.unique(ds.labels[s])) == 2 for s in shards)

    def test_mild_shard_sizes(self):
        ds = Dataset(np.zeros((200, 1)), np.zeros(200, dtype=int), 1)
        sizes = sorted(len(s) for s in partition_data(ds, "mild", 10, 0))
        assert sizes == [10] + [20] * 8 + [30]

    def test_mild_rotation(self):
        ds = Dataset(np.zeros((2000, 1)), np.repeat(np.arange(10), 200), 10)
        shards = partition_data(ds, "mild", 10, 0)
        for c in range(10):
            counts = [int(np.sum(ds.labels[s] == c)) for s in shards]
            assert counts[c] == 10 and counts[(c + 1) % 10] == 30

    def test_errors(self):
        ds = Dataset(np.zeros((20, 1)), np.zeros(20, dtype=int), 1)
        with pytest.raises(PartitionError):
            partition_data(ds, "extreme", 5, 0)
        with pytest.raises(PartitionError, match="valid schemes"):
            partition_data(ds, "dirichlet", 5, 0)
        with pytest.raises(PartitionError):
            partition_data(ds, "mild", 2, 0)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["homogeneous", "mild", "extreme"]), st.integers(3, 12), st.integers(0, 1000))
def test_partition_is_disjoint_cover(scheme, n, seed):
    ds = Dataset(np.zeros((600, 1)), np.repeat(np.arange(10), 60), 10)
    try:
        shards = partition_data(ds, scheme, n, seed)
    except PartitionError:
        assert scheme == "extreme"
        return
    merged = np.sort(np.concatenate(shards))
    assert np.array_equal(merged, np.arange(600))


class TestRounds:
    def test_mean_no_attack_is_textbook(self):
        state = init_state(BASE, BLOBS, BLOBS)
        new, rec = run_round_fedsgd(state, aggregate_mean, AttackSpec())
        grads = [forward_loss_grad(state.params, BLOBS.features[s], BLOBS.labels[s])[1] for s in state.shards]
        assert np.allclose(new.flat, state.params.flat - BASE.lr * np.mean(grads, axis=0), atol=1e-15)
        assert rec.round == 1 and 0 <= rec.accuracy <= 1

    @pytest.mark.parametrize("name", ["mda", "box", "ball_center"])
    def test_identical_clients_match_mean(self, name):
        data = Dataset(np.tile(BLOBS.features[:12], (10, 1)), np.tile(BLOBS.labels[:12], 10), 3)
        cfg = replace(BASE, aggregator=name)
        state = init_state(cfg, data, data)
        state.shards = [np.arange(12) + 12 * i for i in range(10)]
        mean_step, _ = run_round_fedsgd(state, aggregate_mean, AttackSpec())
        step, _ = run_round_fedsgd(state, get_aggregator(name), AttackSpec())
        assert np.allclose(step.flat, mean_step.flat, atol=1e-12)

    def test_sign_flip_mda_output_in_candidates(self):
        cfg = replace(BASE, aggregator="mda", attack=AttackSpec("sign_flip", 1))
        state = init_state(cfg, BLOBS, BLOBS)
        rec = Recorder(aggregate_mda)
        run_round_fedsgd(state, rec, cfg.attack)
        cents = candidate_centroids(rec.layout).centroids
        assert np.any(np.all(cents == rec.result.output, axis=1))

    def test_fedavg_matches_fedsgd(self):
        cfg = replace(BASE, mode="fedavg", local_steps=1, batch_size=10_000)
        state = init_state(cfg, BLOBS, BLOBS)
        avg, _ = run_round_fedavg(state, aggregate_mean, AttackSpec())
        sgd, _ = run_round_fedsgd(state, aggregate_mean, AttackSpec())
        assert np.max(np.abs(avg.flat - sgd.flat)) <= 1e-10

    def test_fedavg_omit(self):
        cfg = replace(BASE, mode="fedavg", aggregator="box", attack=AttackSpec("omit", 3))
        state = init_state(cfg, BLOBS, BLOBS)
        rec = Recorder(aggregate_box)
        run_round_fedavg(state, rec, cfg.attack)
        assert rec.layout.m == 7

    def test_fedavg_sign_flip_box_membership(self):
        cfg = replace(BASE, mode="fedavg", aggregator="box", attack=AttackSpec("sign_flip", 1))
        state = init_state(cfg, BLOBS, BLOBS)
        rec = Recorder(aggregate_box)
        new, _ = run_round_fedavg(state, rec, cfg.attack)
        out = rec.result.output
        assert trimmed_trusted_hyperbox(rec.layout).contains(out, 1e-9)
        assert centroid_hyperbox(rec.layout).contains(out, 1e-9)
        assert np.array_equal(new.flat, out)

    def test_aggregator_failure_names_round(self):
        state = init_state(BASE, BLOBS, BLOBS)

        def broken(layout):
            raise RuntimeError("boom")

        with pytest.raises(TrainingError, match="round 1"):
            run_round_fedsgd(state, broken, AttackSpec())


def test_train_config_validation():
    with pytest.raises(ValueError):
        replace(BASE, rounds=0)
    with pytest.raises(ValueError):
        replace(BASE, lr=0.0)
    with pytest.raises(ValueError):
        replace(BASE, n=9, t=3)
    with pytest.raises(ValueError):
        replace(BASE, attack=AttackSpec("sign_flip", 4))


def test_lr_schedule():
    cfg = replace(BASE, lr=0.5, rounds=10)
    assert cfg.lr_at(1) == 0.5
    assert cfg.lr_at(21) == pytest.approx(0.25)
    assert run_metadata(cfg)["fedavg_combine"] == "mean"


def _strip(records):
    return [replace(r, elapsed_ms=0.0) for r in records]


def test_training_is_deterministic():
    cfg = replace(BASE, aggregator="mda", attack=AttackSpec("gaussian_noise", 2, sigma=1.0), rounds=4)
    assert _strip(run_training(cfg, BLOBS, BLOBS)) == _strip(run_training(cfg, BLOBS, BLOBS))


def test_separable_data_reaches_full_train_accuracy():
    data = synth_blobs(8, 3, 40, 0.2, 4)
    cfg = replace(BASE, rounds=200, lr=0.5, track_metrics=False)
    records = run_training(cfg, data, data)
    assert max(r.accuracy for r in records) == 1.0


@pytest.mark.parametrize("name", ["mda", "box"])
def test_round_ratios_respect_bounds(name):
    cfg = replace(BASE, aggregator=name, attack=AttackSpec("sign_flip", 3), rounds=15)
    records = run_training(cfg, BLOBS, BLOBS)
    bound = 2.0 if name == "mda" else 2 * math.sqrt(min(cfg.n, 115))
    for r in records:
        if r.rad_cov > 1e-12:
            assert r.approx_ratio <= bound + 1e-6
