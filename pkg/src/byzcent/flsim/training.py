"""FedSGD and FedAvg round loops with a pluggable server-side aggregator.

Per round ``r`` (1-based), client ``i`` draws its randomness from
``derive_seed(seed, i, 2r)`` for local training and ``derive_seed(seed, i, 2r+1)``
for its attack, so the two streams never collide. The learning rate decays as
``lr_r = lr / (1 + (lr / rounds) * (r - 1))``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from ..aggregators import AggregationResult, get_aggregator
from ..attacks import AttackSpec, apply_attack, derive_seed, select_attacked
from ..candidates import Layout, covering_ball
from ..dataio import Dataset
from ..evaluation import GroundTruth, approximation_ratio, nonfaulty_diameter
from ..geometry import DEFAULT_MEB_EPS
from .mlp import MLPConfig, ModelParams, evaluate_model, forward_loss_grad, init_model, local_update
from .partition import partition_data

MODES = ("fedsgd", "fedavg")
FEDAVG_COMBINE = "mean"


class TrainingError(RuntimeError):
    """A round could not be completed; the message names the round."""


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "fedsgd"
    rounds: int = 100
    lr: float = 0.01
    n: int = 10
    t: int = 3
    aggregator: str = "mda"
    eps: float = DEFAULT_MEB_EPS
    attack: AttackSpec = field(default_factory=AttackSpec)
    partition: str = "homogeneous"
    local_steps: int = 1
    batch_size: int = 32
    seed: int = 0
    hidden: tuple[int, ...] = (32, 16)
    track_metrics: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; valid modes: {', '.join(MODES)}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.t < 0 or self.n <= 3 * self.t:
            raise ValueError(f"need n > 3t, got n={self.n}, t={self.t}")
        if self.attack.f > self.t:
            raise ValueError(f"attack.f={self.attack.f} exceeds the tolerated t={self.t}")
        if self.local_steps < 1 or self.batch_size < 1:
            raise ValueError("local_steps and batch_size must be >= 1")

    def lr_at(self, round_index: int) -> float:
        decay = self.lr / self.rounds
        return self.lr / (1.0 + decay * (round_index - 1))


@dataclass(frozen=True)
class RoundRecord:
    round: int
    accuracy: float
    loss: float
    rad_cov: float
    nonfaulty_diameter: float
    approx_ratio: float
    elapsed_ms: float


@dataclass
class SimState:
    config: TrainConfig
    train: Dataset
    test: Dataset
    shards: list[np.ndarray]
    attacked: frozenset[int]
    params: ModelParams
    round: int = 0

    @property
    def next_round(self) -> int:
        return self.round + 1


def init_state(config: TrainConfig, train: Dataset, test: Dataset) -> SimState:
    shards = partition_data(train, config.partition, config.n, config.seed)
    if any(len(s) == 0 for s in shards):
        raise TrainingError("a client received an empty shard")
    attacked = select_attacked(config.n, config.attack.f, config.seed)
    sizes = (train.dim, *config.hidden, train.class_count)
    params = init_model(MLPConfig(sizes, init_seed=config.seed))
    return SimState(config, train, test, shards, attacked, params)


def _transmit(
    state: SimState, honest_vectors: list[np.ndarray], attack: AttackSpec, r: int
) -> tuple[Layout, GroundTruth]:
    cfg = state.config
    pairs = []
    honest_pairs = []
    for cid, vec in enumerate(honest_vectors):
        if cid in state.attacked:
            sent = apply_attack(attack, vec, derive_seed(cfg.seed, cid, 2 * r + 1))
            if sent is not None:
                pairs.append((cid, sent))
        else:
            pairs.append((cid, vec))
            honest_pairs.append((cid, vec))
    layout = Layout.from_received(cfg.n, cfg.t, pairs)
    return layout, GroundTruth.from_pairs(honest_pairs, state.attacked)


def _record(
    state: SimState, params: ModelParams, layout: Layout, truth: GroundTruth, agg: AggregationResult, r: int, start: float
) -> RoundRecord:
    cfg = state.config
    acc, loss = evaluate_model(params, state.test.features, state.test.labels)
    if cfg.track_metrics:
        rad = covering_ball(layout, cfg.eps).radius
        diam = nonfaulty_diameter(truth)
        ratio = approximation_ratio(agg.output, truth, layout, cfg.eps, rad_cov=rad).ratio
    else:
        rad = diam = ratio = float("nan")
    return RoundRecord(r, acc, loss, rad, diam, ratio, (time.perf_counter() - start) * 1000.0)


def _aggregate(aggregator: Callable[[Layout], AggregationResult], layout: Layout, r: int) -> AggregationResult:
    try:
        return aggregator(layout)
    except Exception as exc:
        raise TrainingError(f"round {r}: aggregation failed: {type(exc).__name__}: {exc}") from exc


def run_round_fedsgd(
    state: SimState, aggregator: Callable[[Layout], AggregationResult], attack: AttackSpec
) -> tuple[ModelParams, RoundRecord]:
    """One FedSGD round: full-shard gradients, aggregated, one step of size ``lr_r``."""
    start = time.perf_counter()
    r = state.next_round
    grads = []
    for cid in range(state.config.n):
        idx = state.shards[cid]
        _, g = forward_loss_grad(state.params, state.train.features[idx], state.train.labels[idx])
        grads.append(g)
    layout, truth = _transmit(state, grads, attack, r)
    agg = _aggregate(aggregator, layout, r)
    new = ModelParams(state.params.flat - state.config.lr_at(r) * agg.output, state.params.layer_sizes)
    return new, _record(state, new, layout, truth, agg, r, start)


def run_round_fedavg(
    state: SimState, aggregator: Callable[[Layout], AggregationResult], attack: AttackSpec
) -> tuple[ModelParams, RoundRecord]:
    """One FedAvg round: local SGD from the global params, aggregated parameter vectors become the new model."""
    start = time.perf_counter()
    cfg = state.config
    r = state.next_round
    lr = cfg.lr_at(r)
    local = []
    for cid in range(cfg.n):
        idx = state.shards[cid]
        upd = local_update(
            state.params,
            state.train.features[idx],
            state.train.labels[idx],
            cfg.local_steps,
            cfg.batch_size,
            lr,
            derive_seed(cfg.seed, cid, 2 * r),
        )
        local.append(upd.flat)
    layout, truth = _transmit(state, local, attack, r)
    agg = _aggregate(aggregator, layout, r)
    new = ModelParams(agg.output.copy(), state.params.layer_sizes)
    return new, _record(state, new, layout, truth, agg, r, start)


def iter_training(config: TrainConfig, train: Dataset, test: Dataset) -> Iterator[RoundRecord]:
    """Run all rounds, yielding one record per round."""
    state = init_state(config, train, test)
    aggregator = get_aggregator(config.aggregator, config.eps)
    step = run_round_fedsgd if config.mode == "fedsgd" else run_round_fedavg
    for _ in range(config.rounds):
        state.params, rec = step(state, aggregator, config.attack)
        state.round = rec.round
        if not np.all(np.isfinite(state.params.flat)):
            raise TrainingError(f"round {rec.round}: model parameters became non-finite")
        yield rec


def run_training(
    config: TrainConfig, train: Dataset, test: Dataset, on_round: Optional[Callable[[RoundRecord], None]] = None
) -> list[RoundRecord]:
    records = []
    for rec in iter_training(config, train, test):
        records.append(rec)
        if on_round is not None:
            on_round(rec)
    return records


def run_metadata(config: TrainConfig) -> dict[str, str]:
    """Choices that are not visible in the per-round metrics."""
    return {
        "mode": config.mode,
        "lr_schedule": f"lr/(1+(lr/rounds)*(r-1)) lr={config.lr} rounds={config.rounds}",
        "fedavg_combine": FEDAVG_COMBINE,
        "local_steps_unit": "epochs",
        "attack_target": "gradients" if config.mode == "fedsgd" else "parameters",
        "seed_streams": "train=derive_seed(seed,client,2r) attack=derive_seed(seed,client,2r+1)",
    }
