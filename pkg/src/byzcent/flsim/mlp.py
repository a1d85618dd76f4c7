"""A small ReLU multilayer perceptron with softmax cross-entropy, on flat parameter vectors.

Flat layout: for each layer in order, the weight matrix ``W`` of shape
``(fan_in, fan_out)`` in row-major order, followed by its bias of length
``fan_out``. Aggregators and attacks only ever see this flat vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MLPConfig:
    layer_sizes: tuple[int, ...] = (784, 32, 16, 10)
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        if len(self.layer_sizes) < 2 or any(int(s) < 1 for s in self.layer_sizes):
            raise ValueError(f"need at least two positive layer sizes, got {self.layer_sizes}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))

    @property
    def n_params(self) -> int:
        s = self.layer_sizes
        return sum(s[i] * s[i + 1] + s[i + 1] for i in range(len(s) - 1))


@dataclass
class ModelParams:
    flat: np.ndarray
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64)
        expected = MLPConfig(self.layer_sizes).n_params
        if self.flat.shape != (expected,):
            raise ValueError(f"flat vector has shape {self.flat.shape}, layer sizes need ({expected},)")

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """``(W, b)`` views into ``flat``."""
        return unflatten(self.flat, self.layer_sizes)

    def copy(self) -> "ModelParams":
        return ModelParams(self.flat.copy(), self.layer_sizes)


def unflatten(flat: np.ndarray, layer_sizes) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    pos = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = flat[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = flat[pos : pos + fan_out]
        pos += fan_out
        out.append((w, b))
    return out


def init_model(cfg: MLPConfig) -> ModelParams:
    """Weights uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``, biases zero."""
    rng = np.random.default_rng(cfg.init_seed)
    parts = []
    s = cfg.layer_sizes
    for fan_in, fan_out in zip(s[:-1], s[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        parts.append(rng.uniform(-bound, bound, fan_in * fan_out))
        parts.append(np.zeros(fan_out))
    return ModelParams(np.concatenate(parts), s)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def logits(params: ModelParams, x: np.ndarray) -> np.ndarray:
    layers = params.layers()
    h = x
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
    w, b = layers[-1]
    return h @ w + b


def _check_batch(params: ModelParams, x: np.ndarray, y: np.ndarray) -> None:
    if len(x) == 0:
        raise ValueError("empty batch")
    if x.ndim != 2 or x.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"features have shape {x.shape}, model expects {params.layer_sizes[0]} inputs")
    if len(y) != len(x):
        raise ValueError("feature and label counts differ")


def forward_loss_grad(params: ModelParams, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over the batch and its gradient in flat layout."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_batch(params, x, y)
    layers = params.layers()
    acts = [x]
    pre = []
    h = x
    for w, b in layers[:-1]:
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    w, b = layers[-1]
    out = h @ w + b
    logp = _log_softmax(out)
    rows = np.arange(len(y))
    loss = float(-logp[rows, y].mean())

    delta = np.exp(logp)
    delta[rows, y] -= 1.0
    delta /= len(y)
    grads = []
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        grads.append((acts[li].T @ delta, delta.sum(axis=0)))
        if li > 0:
            delta = (delta @ w.T) * (pre[li - 1] > 0)
    flat = np.concatenate([g.ravel() for gw, gb in reversed(grads) for g in (gw, gb)])
    return loss, flat


def evaluate_model(params: ModelParams, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """``(accuracy, mean cross-entropy)`` on a labelled set."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_batch(params, x, y)
    logp = _log_softmax(logits(params, x))
    acc = float(np.mean(np.argmax(logp, axis=1) == y))
    loss = float(-logp[np.arange(len(y)), y].mean())
    return acc, loss


def local_update(
    params: ModelParams,
    x: np.ndarray,
    y: np.ndarray,
    steps: int,
    batch_size: int,
    lr: float,
    seed: int,
) -> ModelParams:
    """Local SGD: ``steps`` passes over the shard in seeded, shuffled mini-batches."""
    if len(x) == 0:
        raise ValueError("empty client shard")
    if steps < 1 or batch_size < 1:
        raise ValueError(f"need steps >= 1 and batch_size >= 1, got {steps}, {batch_size}")
    rng = np.random.default_rng(seed)
    cur = params.copy()
    for _ in range(steps):
        order = rng.permutation(len(x))
        for start in range(0, len(x), batch_size):
            idx = order[start : start + batch_size]
            _, g = forward_loss_grad(cur, x[idx], y[idx])
            cur.flat -= lr * g
    return cur
