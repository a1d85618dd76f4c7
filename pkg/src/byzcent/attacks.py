"""Byzantine client behaviours applied before the server sees a round's vectors.

Seeds: every random draw made on behalf of a client in a round uses
``derive_seed(run_seed, client_id, round)``, which chains the SplitMix64
finalizer over the three 64-bit words::

    h = mix(seed);  h = mix(h ^ client_id);  h = mix(h ^ round)

where ``mix(z)`` adds 0x9E3779B97F4A7C15, then applies
``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB;
z ^= z >> 31`` modulo 2**64. Negative inputs are taken modulo 2**64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

MASK64 = (1 << 64) - 1
ATTACK_KINDS = ("none", "sign_flip", "omit", "fixed_vector", "gaussian_noise", "shift")

# stream tag used in place of a client id when drawing the attacked set
SELECTION_STREAM = 0x5E1EC7


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, client_id: int, round_index: int) -> int:
    h = _mix64(seed & MASK64)
    h = _mix64(h ^ (client_id & MASK64))
    return _mix64(h ^ (round_index & MASK64))


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackSpec:
    """Which behaviour the attacked clients follow, and how many of them there are.

    ``value`` is the vector sent by ``fixed_vector`` (a scalar is broadcast);
    ``sigma`` is the noise scale of ``gaussian_noise``; ``direction`` and
    ``magnitude`` parametrize ``shift`` (direction defaults to all-ones).
    """

    kind: str = "none"
    f: int = 0
    value: Optional[tuple[float, ...]] = None
    sigma: float = 1.0
    direction: Optional[tuple[float, ...]] = None
    magnitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise AttackError(f"unknown attack kind {self.kind!r}; valid kinds: {', '.join(ATTACK_KINDS)}")
        if self.f < 0:
            raise AttackError(f"number of attacked clients must be >= 0, got {self.f}")
        if self.kind == "none" and self.f != 0:
            raise AttackError("attack kind 'none' requires f = 0")
        if self.kind == "fixed_vector" and self.value is None:
            raise AttackError("fixed_vector attack needs a value")
        if self.sigma < 0:
            raise AttackError(f"sigma must be >= 0, got {self.sigma}")


def _broadcast(param: Optional[tuple[float, ...]], d: int, name: str) -> np.ndarray:
    arr = np.asarray(param, dtype=np.float64).ravel()
    if arr.size == 1:
        return np.full(d, arr[0])
    if arr.size != d:
        raise AttackError(f"{name} has {arr.size} entries, expected 1 or {d}")
    return arr


def apply_attack(spec: AttackSpec, honest: np.ndarray, seed: int) -> Optional[np.ndarray]:
    """What an attacked client transmits instead of ``honest``; ``None`` means no message."""
    honest = np.asarray(honest, dtype=np.float64)
    kind = spec.kind
    if kind == "none":
        return honest.copy()
    if kind == "sign_flip":
        return -honest
    if kind == "omit":
        return None
    if kind == "fixed_vector":
        return _broadcast(spec.value, honest.shape[0], "value")
    if kind == "gaussian_noise":
        rng = np.random.default_rng(seed)
        return honest + spec.sigma * rng.standard_normal(honest.shape[0])
    if kind == "shift":
        direction = _broadcast(spec.direction if spec.direction is not None else (1.0,), honest.shape[0], "direction")
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise AttackError("shift direction must be non-zero")
        return honest + spec.magnitude * direction / norm
    raise AttackError(f"unknown attack kind {kind!r}")


def select_attacked(n: int, f: int, seed: int) -> frozenset[int]:
    """Fixed pseudo-random set of ``f`` client ids out of ``0..n-1``."""
    if not 0 <= f <= n:
        raise AttackError(f"cannot attack f={f} of n={n} clients")
    rng = np.random.default_rng(derive_seed(seed, SELECTION_STREAM, 0))
    return frozenset(int(i) for i in rng.choice(n, size=f, replace=False))
